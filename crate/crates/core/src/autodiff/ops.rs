//! Forward and adjoint rules for every [`Op`].

use super::{sigmoid, Graph, NodeId, Op};
use crate::tensor::{gemm, Tensor, TensorError};

type EvalResult = std::result::Result<Tensor, String>;

/// Patch geometry of a 2-D convolution over NHWC input rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_h: usize,
    pub in_w: usize,
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    /// "Same" zero padding: output extent is `ceil(in / stride)`, padding is
    /// split with the extra row/column at the bottom/right.
    pub fn same(
        in_h: usize,
        in_w: usize,
        channels: usize,
        kernel: usize,
        stride: usize,
    ) -> Result<Self, TensorError> {
        let bad = || TensorError::InvalidShape {
            shape: vec![in_h, in_w, channels, kernel, stride],
            len: 0,
        };
        if in_h == 0 || in_w == 0 || channels == 0 || kernel == 0 || stride == 0 {
            return Err(bad());
        }
        let out_h = in_h.div_ceil(stride);
        let out_w = in_w.div_ceil(stride);
        let pad_h = ((out_h - 1) * stride + kernel).saturating_sub(in_h);
        let pad_w = ((out_w - 1) * stride + kernel).saturating_sub(in_w);
        if kernel > in_h + pad_h || kernel > in_w + pad_w {
            return Err(bad());
        }
        Ok(Self {
            in_h,
            in_w,
            channels,
            kernel,
            stride,
            pad_top: pad_h / 2,
            pad_left: pad_w / 2,
            out_h,
            out_w,
        })
    }

    pub fn patch_len(&self) -> usize {
        self.kernel * self.kernel * self.channels
    }

    pub fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    pub fn input_len(&self) -> usize {
        self.in_h * self.in_w * self.channels
    }

    /// Calls `f(patch_col, input_offset)` for every in-bounds tap of output
    /// position `(oy, ox)`.
    #[inline]
    fn taps(&self, oy: usize, ox: usize, mut f: impl FnMut(usize, usize)) {
        let k = self.kernel;
        for ky in 0..k {
            let y = (oy * self.stride + ky) as isize - self.pad_top as isize;
            if y < 0 || y >= self.in_h as isize {
                continue;
            }
            for kx in 0..k {
                let x = (ox * self.stride + kx) as isize - self.pad_left as isize;
                if x < 0 || x >= self.in_w as isize {
                    continue;
                }
                let col = (ky * k + kx) * self.channels;
                let off = (y as usize * self.in_w + x as usize) * self.channels;
                for ch in 0..self.channels {
                    f(col + ch, off + ch);
                }
            }
        }
    }
}

/// Broadcast layout of a binary elementwise op over 2-D views.
struct Bcast {
    rows: usize,
    cols: usize,
    a: (usize, usize),
    b: (usize, usize),
    shape: Vec<usize>,
}

impl Bcast {
    fn new(a: &Tensor, b: &Tensor) -> std::result::Result<Self, String> {
        let (ar, ac) = a.dims2();
        let (br, bc) = b.dims2();
        let pick = |x: usize, y: usize| -> Option<usize> {
            if x == y || y == 1 {
                Some(x)
            } else if x == 1 {
                Some(y)
            } else {
                None
            }
        };
        let (Some(rows), Some(cols)) = (pick(ar, br), pick(ac, bc)) else {
            return Err(format!(
                "cannot broadcast {:?} with {:?}",
                a.shape(),
                b.shape()
            ));
        };
        let shape = if a.len() == rows * cols {
            a.shape().to_vec()
        } else if b.len() == rows * cols {
            b.shape().to_vec()
        } else {
            vec![rows, cols]
        };
        Ok(Self {
            rows,
            cols,
            a: (ar, ac),
            b: (br, bc),
            shape,
        })
    }

    #[inline]
    fn idx(dims: (usize, usize), i: usize, j: usize) -> usize {
        let r = if dims.0 == 1 { 0 } else { i };
        let c = if dims.1 == 1 { 0 } else { j };
        r * dims.1 + c
    }

    fn apply(&self, a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let n = self.rows * self.cols;
        let mut out = Vec::with_capacity(n);
        if a.len() == n && b.len() == n {
            out.extend(a.iter().zip(b).map(|(&x, &y)| f(x, y)));
            return out;
        }
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.push(f(a[Self::idx(self.a, i, j)], b[Self::idx(self.b, i, j)]));
            }
        }
        out
    }

    /// Sums a full-size gradient down to an operand's extent.
    fn reduce(&self, g: &[f64], dims: (usize, usize)) -> Vec<f64> {
        if dims.0 * dims.1 == g.len() {
            return g.to_vec();
        }
        let mut out = vec![0.0; dims.0 * dims.1];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[Self::idx(dims, i, j)] += g[i * self.cols + j];
            }
        }
        out
    }
}

fn with_shape(like: &Tensor, data: Vec<f64>) -> Tensor {
    Tensor::new(like.shape().to_vec(), data).expect("same length as template")
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Graph<'_> {
    pub(super) fn eval(&self, op: &Op) -> EvalResult {
        let v = |id: &NodeId| self.value(*id);
        match op {
            Op::Input | Op::Param(_) => unreachable!("leaves are not evaluated"),
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => {
                let (x, y) = (v(a), v(b));
                let bc = Bcast::new(x, y)?;
                let data = match op {
                    Op::Add(..) => bc.apply(x.data(), y.data(), |p, q| p + q),
                    Op::Sub(..) => bc.apply(x.data(), y.data(), |p, q| p - q),
                    _ => bc.apply(x.data(), y.data(), |p, q| p * q),
                };
                Tensor::new(bc.shape, data).map_err(|e| e.to_string())
            }
            Op::MatMul(a, b) => {
                let (x, y) = (v(a), v(b));
                let (m, k) = x.dims2();
                let (k2, n) = y.dims2();
                if k != k2 {
                    return Err(format!("inner dimensions differ: {:?} · {:?}", x.shape(), y.shape()));
                }
                let mut out = vec![0.0; m * n];
                gemm(m, k, n, x.data(), false, y.data(), false, &mut out, 0.0);
                Tensor::matrix(m, n, out).map_err(|e| e.to_string())
            }
            Op::Concat(parts) => {
                let rows = v(&parts[0]).rows();
                let mut widths = Vec::with_capacity(parts.len());
                for p in parts {
                    let t = v(p);
                    if t.rows() != rows {
                        return Err(format!("row count {} differs from {rows}", t.rows()));
                    }
                    widths.push(t.cols());
                }
                let total: usize = widths.iter().sum();
                let mut out = Vec::with_capacity(rows * total);
                for i in 0..rows {
                    for p in parts {
                        out.extend_from_slice(v(p).row(i));
                    }
                }
                Tensor::matrix(rows, total, out).map_err(|e| e.to_string())
            }
            Op::SliceCols { src, start, end } => {
                let t = v(src);
                let (rows, cols) = t.dims2();
                if start >= end || *end > cols {
                    return Err(format!("column range {start}..{end} outside 0..{cols}"));
                }
                let mut out = Vec::with_capacity(rows * (end - start));
                for i in 0..rows {
                    out.extend_from_slice(&t.row(i)[*start..*end]);
                }
                Tensor::matrix(rows, end - start, out).map_err(|e| e.to_string())
            }
            Op::Gather { src, rows } => {
                let t = v(src);
                let (n, cols) = t.dims2();
                if rows.is_empty() {
                    return Err("gather of zero rows".into());
                }
                let mut out = Vec::with_capacity(rows.len() * cols);
                for &r in rows {
                    if r >= n {
                        return Err(format!("row {r} out of range for {n} rows"));
                    }
                    out.extend_from_slice(t.row(r));
                }
                Tensor::matrix(rows.len(), cols, out).map_err(|e| e.to_string())
            }
            Op::SegmentSum { src, segments, count } => {
                let t = v(src);
                let (n, cols) = t.dims2();
                if segments.len() != n {
                    return Err(format!("{} segment ids for {n} rows", segments.len()));
                }
                let mut out = vec![0.0; count * cols];
                for (i, &s) in segments.iter().enumerate() {
                    if s >= *count {
                        return Err(format!("segment id {s} >= {count}"));
                    }
                    for (o, x) in out[s * cols..(s + 1) * cols].iter_mut().zip(t.row(i)) {
                        *o += x;
                    }
                }
                Tensor::matrix(*count, cols, out).map_err(|e| e.to_string())
            }
            Op::Reshape { src, shape } => v(src).reshape(shape).map_err(|e| e.to_string()),
            Op::Im2Col { src, geom } => {
                let t = v(src);
                let (batch, cols) = t.dims2();
                if cols != geom.input_len() {
                    return Err(format!(
                        "row length {cols} does not match {}x{}x{} input",
                        geom.in_h, geom.in_w, geom.channels
                    ));
                }
                let (pl, pos) = (geom.patch_len(), geom.positions());
                let mut out = vec![0.0; batch * pos * pl];
                for b in 0..batch {
                    let img = t.row(b);
                    for oy in 0..geom.out_h {
                        for ox in 0..geom.out_w {
                            let row = (b * pos + oy * geom.out_w + ox) * pl;
                            let patch = &mut out[row..row + pl];
                            geom.taps(oy, ox, |col, off| patch[col] = img[off]);
                        }
                    }
                }
                Tensor::matrix(batch * pos, pl, out).map_err(|e| e.to_string())
            }
            Op::Sigmoid(a) => Ok(v(a).map(sigmoid)),
            Op::Tanh(a) => Ok(v(a).map(f64::tanh)),
            Op::Relu(a) => Ok(v(a).map(|x| x.max(0.0))),
            Op::Sum(a) => Ok(Tensor::scalar(v(a).sum())),
            Op::Mean(a) => {
                let t = v(a);
                Ok(Tensor::scalar(t.sum() / t.len() as f64))
            }
            Op::StopGradient(a) => Ok(v(a).clone()),
            Op::L2Loss(p, t) => {
                let (x, y) = (v(p), v(t));
                if x.len() != y.len() {
                    return Err(format!("prediction {:?} vs target {:?}", x.shape(), y.shape()));
                }
                let sq: f64 = x.data().iter().zip(y.data()).map(|(a, b)| (a - b) * (a - b)).sum();
                Ok(Tensor::scalar(sq / x.rows() as f64))
            }
            Op::SigmoidCrossEntropy(l, t) => {
                let (x, y) = (v(l), v(t));
                if x.len() != y.len() {
                    return Err(format!("logits {:?} vs targets {:?}", x.shape(), y.shape()));
                }
                let total: f64 = x
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&z, &t)| softplus(z) - z * t)
                    .sum();
                Ok(Tensor::scalar(total / x.len() as f64))
            }
            Op::SoftmaxCrossEntropy { logits, labels } => {
                let x = v(logits);
                let (rows, k) = x.dims2();
                if labels.len() != rows {
                    return Err(format!("{} labels for {rows} rows", labels.len()));
                }
                let mut total = 0.0;
                for (i, &label) in labels.iter().enumerate() {
                    if label >= k {
                        return Err(format!("label {label} >= {k} classes"));
                    }
                    let row = x.row(i);
                    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
                    total += lse - row[label];
                }
                Ok(Tensor::scalar(total / rows as f64))
            }
        }
    }

    /// Adjoint contributions of `op` (output node `out`) to its inputs.
    pub(super) fn input_grads(&self, op: &Op, out: NodeId, g: &Tensor) -> Vec<(NodeId, Tensor)> {
        let v = |id: &NodeId| self.value(*id);
        let need = |id: &NodeId| self.nodes[id.0].requires_grad;
        let gd = g.data();
        match op {
            Op::Input | Op::Param(_) => vec![],
            Op::Add(a, b) | Op::Sub(a, b) => {
                let (x, y) = (v(a), v(b));
                let bc = Bcast::new(x, y).expect("validated in forward");
                let mut res = Vec::new();
                if need(a) {
                    res.push((*a, with_shape(x, bc.reduce(gd, bc.a))));
                }
                if need(b) {
                    let mut gb = bc.reduce(gd, bc.b);
                    if matches!(op, Op::Sub(..)) {
                        gb.iter_mut().for_each(|z| *z = -*z);
                    }
                    res.push((*b, with_shape(y, gb)));
                }
                res
            }
            Op::Mul(a, b) => {
                let (x, y) = (v(a), v(b));
                let bc = Bcast::new(x, y).expect("validated in forward");
                let mut res = Vec::new();
                if need(a) {
                    let full = bc.apply(gd, &bc.expand_b(y.data()), |p, q| p * q);
                    res.push((*a, with_shape(x, bc.reduce(&full, bc.a))));
                }
                if need(b) {
                    let full = bc.apply(gd, &bc.expand_a(x.data()), |p, q| p * q);
                    res.push((*b, with_shape(y, bc.reduce(&full, bc.b))));
                }
                res
            }
            Op::MatMul(a, b) => {
                let (x, y) = (v(a), v(b));
                let (m, k) = x.dims2();
                let n = y.cols();
                let mut res = Vec::new();
                if need(a) {
                    // dA = G · Bᵀ
                    let mut ga = vec![0.0; m * k];
                    gemm(m, n, k, gd, false, y.data(), true, &mut ga, 0.0);
                    res.push((*a, with_shape(x, ga)));
                }
                if need(b) {
                    // dB = Aᵀ · G
                    let mut gb = vec![0.0; k * n];
                    gemm(k, m, n, x.data(), true, gd, false, &mut gb, 0.0);
                    res.push((*b, with_shape(y, gb)));
                }
                res
            }
            Op::Concat(parts) => {
                let total = g.cols();
                let rows = g.rows();
                let mut start = 0;
                let mut res = Vec::new();
                for p in parts {
                    let t = v(p);
                    let w = t.cols();
                    if need(p) {
                        let mut gp = Vec::with_capacity(rows * w);
                        for i in 0..rows {
                            gp.extend_from_slice(&gd[i * total + start..i * total + start + w]);
                        }
                        res.push((*p, with_shape(t, gp)));
                    }
                    start += w;
                }
                res
            }
            Op::SliceCols { src, start, end } => {
                let t = v(src);
                let (rows, cols) = t.dims2();
                let w = end - start;
                let mut gs = vec![0.0; rows * cols];
                for i in 0..rows {
                    gs[i * cols + start..i * cols + end].copy_from_slice(&gd[i * w..(i + 1) * w]);
                }
                vec![(*src, with_shape(t, gs))]
            }
            Op::Gather { src, rows } => {
                let t = v(src);
                let cols = t.cols();
                let mut gs = vec![0.0; t.len()];
                for (i, &r) in rows.iter().enumerate() {
                    for (o, x) in gs[r * cols..(r + 1) * cols].iter_mut().zip(&gd[i * cols..(i + 1) * cols]) {
                        *o += x;
                    }
                }
                vec![(*src, with_shape(t, gs))]
            }
            Op::SegmentSum { src, segments, .. } => {
                let t = v(src);
                let cols = t.cols();
                let mut gs = Vec::with_capacity(t.len());
                for &s in segments {
                    gs.extend_from_slice(&gd[s * cols..(s + 1) * cols]);
                }
                vec![(*src, with_shape(t, gs))]
            }
            Op::Reshape { src, .. } => vec![(*src, with_shape(v(src), gd.to_vec()))],
            Op::Im2Col { src, geom } => {
                let t = v(src);
                let batch = t.rows();
                let (pl, pos, il) = (geom.patch_len(), geom.positions(), geom.input_len());
                let mut gs = vec![0.0; t.len()];
                for b in 0..batch {
                    let img = &mut gs[b * il..(b + 1) * il];
                    for oy in 0..geom.out_h {
                        for ox in 0..geom.out_w {
                            let row = (b * pos + oy * geom.out_w + ox) * pl;
                            let patch = &gd[row..row + pl];
                            geom.taps(oy, ox, |col, off| img[off] += patch[col]);
                        }
                    }
                }
                vec![(*src, with_shape(t, gs))]
            }
            Op::Sigmoid(a) => {
                let y = self.value(out).data();
                let ga = gd.iter().zip(y).map(|(g, s)| g * s * (1.0 - s)).collect();
                vec![(*a, with_shape(v(a), ga))]
            }
            Op::Tanh(a) => {
                let y = self.value(out).data();
                let ga = gd.iter().zip(y).map(|(g, t)| g * (1.0 - t * t)).collect();
                vec![(*a, with_shape(v(a), ga))]
            }
            Op::Relu(a) => {
                let x = v(a).data();
                let ga = gd
                    .iter()
                    .zip(x)
                    .map(|(g, &z)| if z > 0.0 { *g } else { 0.0 })
                    .collect();
                vec![(*a, with_shape(v(a), ga))]
            }
            Op::Sum(a) => vec![(*a, Tensor::filled(v(a).shape(), gd[0]))],
            Op::Mean(a) => {
                let t = v(a);
                vec![(*a, Tensor::filled(t.shape(), gd[0] / t.len() as f64))]
            }
            Op::StopGradient(_) => vec![],
            Op::L2Loss(p, t) => {
                let (x, y) = (v(p), v(t));
                let k = 2.0 * gd[0] / x.rows() as f64;
                let diff: Vec<f64> = x.data().iter().zip(y.data()).map(|(a, b)| k * (a - b)).collect();
                let mut res = Vec::new();
                if need(t) {
                    res.push((*t, with_shape(y, diff.iter().map(|d| -d).collect())));
                }
                if need(p) {
                    res.push((*p, with_shape(x, diff)));
                }
                res
            }
            Op::SigmoidCrossEntropy(l, t) => {
                let (x, y) = (v(l), v(t));
                let k = gd[0] / x.len() as f64;
                let mut res = Vec::new();
                if need(l) {
                    let gl = x
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(&z, &t)| k * (sigmoid(z) - t))
                        .collect();
                    res.push((*l, with_shape(x, gl)));
                }
                if need(t) {
                    res.push((*t, with_shape(y, x.data().iter().map(|&z| -k * z).collect())));
                }
                res
            }
            Op::SoftmaxCrossEntropy { logits, labels } => {
                let x = v(logits);
                let (rows, kc) = x.dims2();
                let scale = gd[0] / rows as f64;
                let mut gl = vec![0.0; rows * kc];
                for (i, &label) in labels.iter().enumerate() {
                    let row = x.row(i);
                    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let denom: f64 = row.iter().map(|z| (z - m).exp()).sum();
                    for j in 0..kc {
                        let p = (row[j] - m).exp() / denom;
                        gl[i * kc + j] = scale * (p - if j == label { 1.0 } else { 0.0 });
                    }
                }
                vec![(*logits, with_shape(x, gl))]
            }
        }
    }
}

impl Bcast {
    /// Operand `b` laid out at full `rows × cols` size.
    fn expand_b(&self, b: &[f64]) -> Vec<f64> {
        self.expand(b, self.b)
    }

    fn expand_a(&self, a: &[f64]) -> Vec<f64> {
        self.expand(a, self.a)
    }

    fn expand(&self, x: &[f64], dims: (usize, usize)) -> Vec<f64> {
        if x.len() == self.rows * self.cols {
            return x.to_vec();
        }
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.push(x[Self::idx(dims, i, j)]);
            }
        }
        out
    }
}
