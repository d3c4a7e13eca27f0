//! Dense row-major tensors and the handful of linear-algebra kernels the
//! rest of the crate is built on.
//!
//! Everything is `f64`. Matrix products above a small size threshold go
//! through `matrixmultiply`'s blocked dgemm; smaller ones use a plain
//! sequential loop so that results on tiny problems are reproducible
//! term-for-term against hand-written code.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Errors raised by tensor construction and the linear-algebra kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid shape {shape:?} for {len} values")]
    InvalidShape { shape: Vec<usize>, len: usize },
    #[error("{op}: expected rank {expected}, got shape {shape:?}")]
    Rank {
        op: &'static str,
        expected: usize,
        shape: Vec<usize>,
    },
    #[error("principal direction is undefined for an all-zero point set")]
    DegenerateDirection,
    #[error("context vector norm {norm:e} is too small to project against")]
    DegenerateContext { norm: f64 },
    #[error("correlation is undefined: {0}")]
    UndefinedCorrelation(&'static str),
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Norm below which a direction is treated as zero.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Products with fewer multiply-adds than this use the sequential kernel.
const GEMM_THRESHOLD: usize = 32 * 32 * 32;

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const PREVIEW: usize = 8;
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= PREVIEW {
            write!(f, "{:?}", self.data)
        } else {
            write!(f, "{:?}..", &self.data[..PREVIEW])
        }
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&e| e == 0) || shape.iter().product::<usize>() != data.len() {
            return Err(TensorError::InvalidShape {
                shape,
                len: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        assert!(shape.iter().all(|&e| e > 0), "zero extent in {shape:?}");
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "empty vector");
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    /// Matrix from nested rows; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(TensorError::ShapeMismatch {
                    op: "from_rows",
                    left: vec![cols],
                    right: vec![r.len()],
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Uniform samples in `[lo, hi)`.
    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], lo: f64, hi: f64, rng: &mut R) -> Self {
        let mut t = Self::zeros(shape);
        for v in &mut t.data {
            *v = rng.gen_range(lo..hi);
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Rows and columns of the tensor viewed as a matrix. Rank-1 tensors
    /// are row vectors; higher ranks fold trailing axes into columns.
    pub fn dims2(&self) -> (usize, usize) {
        match self.shape.len() {
            0 => (1, 1),
            1 => (1, self.shape[0]),
            _ => (self.shape[0], self.shape[1..].iter().product()),
        }
    }

    pub fn rows(&self) -> usize {
        self.dims2().0
    }

    pub fn cols(&self) -> usize {
        self.dims2().1
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols() + j]
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data.clone())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_same(&self, other: &Self, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(TensorError::ShapeMismatch {
                op,
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_same(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_same(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_same(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|v| v * k)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        if self.len() != other.len() {
            return Err(TensorError::ShapeMismatch {
                op: "dot",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(dot(&self.data, &other.data))
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Result<Self> {
        if self.rank() != 2 {
            return Err(TensorError::Rank {
                op: "transpose",
                expected: 2,
                shape: self.shape.clone(),
            });
        }
        let (r, c) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Self::new(vec![c, r], out)
    }

    /// Standard matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let (m, k, n) = (self.shape[0], self.shape[1], other.shape[1]);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, &self.data, false, &other.data, false, &mut out, 0.0);
        Self::new(vec![m, n], out)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `c = a' · b' + beta · c` where `a'` is `m×k` and `b'` is `k×n`, each
/// optionally stored transposed. All buffers are dense row-major.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    c: &mut [f64],
    beta: f64,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    // (row stride, column stride) of the logical operands
    let (rsa, csa) = if a_trans { (1, m) } else { (k, 1) };
    let (rsb, csb) = if b_trans { (1, k) } else { (n, 1) };
    if m * k * n >= GEMM_THRESHOLD {
        // SAFETY: strides describe exactly the buffers checked above.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                rsa as isize,
                csa as isize,
                b.as_ptr(),
                rsb as isize,
                csb as isize,
                beta,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        return;
    }
    if beta == 0.0 {
        c.iter_mut().for_each(|v| *v = 0.0);
    } else if beta != 1.0 {
        c.iter_mut().for_each(|v| *v *= beta);
    }
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * rsa + p * csa];
            for (j, cv) in crow.iter_mut().enumerate() {
                *cv += av * b[p * rsb + j * csb];
            }
        }
    }
}

/// Dominant right singular direction of the uncentered `N×d` point matrix.
///
/// Runs power iteration on the `d×d` Gram matrix `XᵀX` starting from a
/// seeded random vector, stopping after `iters` steps or once successive
/// iterates agree to within `1e-10` in cosine. The sign is fixed so that
/// the largest-magnitude entry is positive.
pub fn first_principal_direction(points: &Tensor, iters: usize, seed: u64) -> Result<Tensor> {
    if points.rank() != 2 {
        return Err(TensorError::Rank {
            op: "first_principal_direction",
            expected: 2,
            shape: points.shape.clone(),
        });
    }
    let gram = points.transpose()?.matmul(points)?;
    let d = points.shape[1];
    if gram.data.iter().all(|&v| v == 0.0) {
        return Err(TensorError::DegenerateDirection);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);

    let mut next = vec![0.0; d];
    for _ in 0..iters.max(1) {
        for (i, out) in next.iter_mut().enumerate() {
            *out = dot(gram.row(i), &v);
        }
        let nn = norm(&next);
        if nn < DEGENERATE_NORM {
            // start vector orthogonal to the column space; restart on an axis
            let j = (0..d)
                .max_by(|&a, &b| gram.at(a, a).total_cmp(&gram.at(b, b)))
                .unwrap_or(0);
            v.iter_mut().for_each(|x| *x = 0.0);
            v[j] = 1.0;
            continue;
        }
        next.iter_mut().for_each(|x| *x /= nn);
        let cos = dot(&next, &v).abs();
        std::mem::swap(&mut v, &mut next);
        if 1.0 - cos < 1e-10 {
            break;
        }
    }

    let (imax, _) = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("d >= 1");
    if v[imax] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(Tensor::vector(v))
}

/// Removes the component of `w` along `v0`: `(I − v0·v0ᵀ/|v0|²)·w`.
pub fn project_out(w: &Tensor, v0: &Tensor) -> Result<Tensor> {
    if w.len() != v0.len() {
        return Err(TensorError::ShapeMismatch {
            op: "project_out",
            left: w.shape.clone(),
            right: v0.shape.clone(),
        });
    }
    let mut out = w.clone();
    project_out_slice(&mut out.data, &v0.data)?;
    Ok(out)
}

pub(crate) fn project_out_slice(w: &mut [f64], v0: &[f64]) -> Result<()> {
    let nv = dot(v0, v0);
    if nv.sqrt() < DEGENERATE_NORM {
        return Err(TensorError::DegenerateContext { norm: nv.sqrt() });
    }
    let k = dot(w, v0) / nv;
    for (x, v) in w.iter_mut().zip(v0) {
        *x -= k * v;
    }
    Ok(())
}

/// Sample Pearson correlation of two equal-length series.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(TensorError::ShapeMismatch {
            op: "pearson_r",
            left: vec![x.len()],
            right: vec![y.len()],
        });
    }
    if x.len() < 2 {
        return Err(TensorError::UndefinedCorrelation("fewer than two samples"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(TensorError::UndefinedCorrelation("zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Cosine of the angle between two vectors; `None` if either is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn naive_matmul(a: &Tensor, b: &Tensor) -> Tensor {
        let (m, k, n) = (a.shape[0], a.shape[1], b.shape[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for p in 0..k {
                    acc += a.at(i, p) * b.at(p, j);
                }
                out[i * n + j] = acc;
            }
        }
        Tensor::matrix(m, n, out).unwrap()
    }

    fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
        a.data
            .iter()
            .zip(&b.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn matmul_identity_and_dot() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(Tensor::identity(2).matmul(&a).unwrap(), a);
        let r = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let c = Tensor::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        assert_eq!(r.matmul(&c).unwrap().data(), &[11.0]);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = Tensor::uniform(&[3, 4], -1.0, 1.0, &mut rng);
        let b = Tensor::uniform(&[4, 2], -1.0, 1.0, &mut rng);
        assert!(max_abs_diff(&a.matmul(&b).unwrap(), &naive_matmul(&a, &b)) <= 1e-12);
        // large enough to go through the blocked kernel
        let a = Tensor::uniform(&[40, 50], -1.0, 1.0, &mut rng);
        let b = Tensor::uniform(&[50, 30], -1.0, 1.0, &mut rng);
        assert!(max_abs_diff(&a.matmul(&b).unwrap(), &naive_matmul(&a, &b)) <= 1e-12);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 3]);
        let msg = a.matmul(&b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
    }

    #[test]
    fn gemm_transposed_operands() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(m, k, n) in &[(3usize, 4usize, 5usize), (40, 50, 30)] {
            let a = Tensor::uniform(&[k, m], -1.0, 1.0, &mut rng);
            let b = Tensor::uniform(&[n, k], -1.0, 1.0, &mut rng);
            let mut c = vec![0.0; m * n];
            gemm(m, k, n, a.data(), true, b.data(), true, &mut c, 0.0);
            let want = naive_matmul(&a.transpose().unwrap(), &b.transpose().unwrap());
            let got = Tensor::matrix(m, n, c).unwrap();
            assert!(max_abs_diff(&got, &want) < 1e-12);
        }
    }

    #[test]
    fn principal_direction_axis_cases() {
        let p = Tensor::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]]).unwrap();
        let v = first_principal_direction(&p, 100, 1).unwrap();
        assert!((v.data()[0] - 1.0).abs() < 1e-12 && v.data()[1].abs() < 1e-12);

        let p = Tensor::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        let v = first_principal_direction(&p, 100, 1).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v.data()[0] - h).abs() < 1e-10 && (v.data()[1] - h).abs() < 1e-10);
    }

    #[test]
    fn principal_direction_zero_input() {
        let p = Tensor::zeros(&[3, 2]);
        assert_eq!(
            first_principal_direction(&p, 100, 1).unwrap_err(),
            TensorError::DegenerateDirection
        );
    }

    #[test]
    fn principal_direction_matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = Tensor::uniform(&[50, 5], -1.0, 1.0, &mut rng);
        let v = first_principal_direction(&p, 100, 5).unwrap();

        let x = nalgebra::DMatrix::from_row_slice(50, 5, p.data());
        let eig = (x.transpose() * &x).symmetric_eigen();
        let imax = eig.eigenvalues.imax();
        let e = eig.eigenvectors.column(imax);
        let cos: f64 = (0..5).map(|i| e[i] * v.data()[i]).sum::<f64>().abs();
        assert!(cos >= 1.0 - 1e-8, "cos = {cos}");
    }

    #[test]
    fn project_out_cases() {
        let v0 = Tensor::vector(vec![1.0, 0.0]);
        let w = Tensor::vector(vec![2.0, 3.0]);
        assert_eq!(project_out(&w, &v0).unwrap().data(), &[0.0, 3.0]);
        let perp = Tensor::vector(vec![0.0, -4.0]);
        assert_eq!(project_out(&perp, &v0).unwrap(), perp);
        let par = Tensor::vector(vec![-5.0, 0.0]);
        assert_eq!(project_out(&par, &v0).unwrap().data(), &[0.0, 0.0]);
        let tiny = Tensor::vector(vec![1e-13, 0.0]);
        assert!(matches!(
            project_out(&w, &tiny),
            Err(TensorError::DegenerateContext { .. })
        ));
    }

    #[test]
    fn pearson_cases() {
        assert!((pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_r(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!(matches!(
            pearson_r(&[1.0, 1.0], &[1.0, 2.0]),
            Err(TensorError::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn pearson_matches_textbook_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x: Vec<f64> = (0..100).map(|_| rng.gen_range(0.0..5.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.gen_range(-2.0..2.0)).collect();
        // n Σxy − Σx Σy over sqrt(n Σx² − (Σx)²) sqrt(n Σy² − (Σy)²)
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|a| a * a).sum();
        let want = (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt());
        assert!((pearson_r(&x, &y).unwrap() - want).abs() <= 1e-12);
    }

    fn arb_matrix(r: usize, c: usize) -> impl Strategy<Value = Tensor> {
        proptest::collection::vec(-2.0f64..2.0, r * c)
            .prop_map(move |d| Tensor::matrix(r, c, d).unwrap())
    }

    proptest! {
        #[test]
        fn matmul_is_associative(
            (a, b, c) in (1usize..6, 1usize..6, 1usize..6, 1usize..6)
                .prop_flat_map(|(m, k, n, p)| (arb_matrix(m, k), arb_matrix(k, n), arb_matrix(n, p)))
        ) {
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            let scale = left.data().iter().map(|v| v.abs()).fold(1.0, f64::max);
            prop_assert!(max_abs_diff(&left, &right) <= 1e-9 * scale);
        }

        #[test]
        fn project_out_is_idempotent_and_orthogonal(
            w in proptest::collection::vec(-5.0f64..5.0, 4),
            v in proptest::collection::vec(-5.0f64..5.0, 4),
        ) {
            let v0 = Tensor::vector(v);
            prop_assume!(v0.norm() > 1e-3);
            let w = Tensor::vector(w);
            let once = project_out(&w, &v0).unwrap();
            let twice = project_out(&once, &v0).unwrap();
            prop_assert!(max_abs_diff(&once, &twice) <= 1e-10);
            prop_assert!(once.dot(&v0).unwrap().abs() <= 1e-10 * (1.0 + w.norm() * v0.norm()));
        }

        #[test]
        fn principal_direction_unit_and_permutation_invariant(
            rows in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 3), 2..12),
            seed in 0u64..1000,
        ) {
            let p = Tensor::from_rows(&rows).unwrap();
            prop_assume!(p.norm() > 1e-3);
            // require a clear spectral gap so the direction is well defined
            let x = nalgebra::DMatrix::from_row_slice(rows.len(), 3, p.data());
            let mut ev: Vec<f64> = (x.transpose() * &x).symmetric_eigen().eigenvalues.iter().copied().collect();
            ev.sort_by(|a, b| b.total_cmp(a));
            prop_assume!(ev[1] < 0.9 * ev[0]);

            let v = first_principal_direction(&p, 500, seed).unwrap();
            prop_assert!((v.norm() - 1.0).abs() <= 1e-10);
            let mut rev = rows.clone();
            rev.reverse();
            let u = first_principal_direction(&Tensor::from_rows(&rev).unwrap(), 500, seed + 1).unwrap();
            prop_assert!(max_abs_diff(&u, &v) <= 1e-3);
        }
    }
}
