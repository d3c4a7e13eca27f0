use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// `x·exp(−x² − y²)`.
pub fn surface_height(x: f64, y: f64) -> f64 {
    x * (-x * x - y * y).exp()
}

/// Samples the surface on a `resolution × resolution` grid over `[−2, 2]²`
/// and splits it: `⌈train_fraction·N⌉` seeded points for training, the rest
/// for testing. Both sets keep grid order.
pub fn make_surface_grid(
    resolution: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<SurfacePoint>, Vec<SurfacePoint>)> {
    if resolution < 2 || !(0.0..=1.0).contains(&train_fraction) {
        return Err(DataError::InvalidArgument(format!(
            "resolution {resolution} / train fraction {train_fraction}"
        )));
    }
    let step = 4.0 / (resolution - 1) as f64;
    let mut grid = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution {
            let (x, y) = (-2.0 + i as f64 * step, -2.0 + j as f64 * step);
            grid.push(SurfacePoint {
                x,
                y,
                z: surface_height(x, y),
            });
        }
    }
    let n = grid.len();
    let n_train = (train_fraction * n as f64 - 1e-9).ceil().max(0.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_train = vec![false; n];
    for i in sample(&mut rng, n, n_train) {
        is_train[i] = true;
    }
    let (train, test): (Vec<_>, Vec<_>) = grid.into_iter().zip(is_train).partition(|(_, t)| *t);
    Ok((
        train.into_iter().map(|(p, _)| p).collect(),
        test.into_iter().map(|(p, _)| p).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_form_heights() {
        assert_eq!(surface_height(0.0, 1.3), 0.0);
        assert!((surface_height(1.0, 0.0) - 0.3679).abs() < 1e-4);
    }

    #[test]
    fn split_sizes() {
        let (train, test) = make_surface_grid(81, 0.01, 0).unwrap();
        assert_eq!((train.len(), test.len()), (66, 6495));
    }

    #[test]
    fn grid_spans_square() {
        let (train, test) = make_surface_grid(3, 0.5, 1).unwrap();
        let mut xs: Vec<f64> = train.iter().chain(&test).map(|p| p.x).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        assert_eq!(xs, vec![-2.0, 0.0, 2.0]);
        assert!(make_surface_grid(1, 0.5, 1).is_err());
    }

    proptest! {
        #[test]
        fn deterministic_exact_partition(seed in 0u64..1000, res in 2usize..20, frac in 0.0f64..1.0) {
            let (a, b) = make_surface_grid(res, frac, seed).unwrap();
            let (a2, b2) = make_surface_grid(res, frac, seed).unwrap();
            prop_assert_eq!(&a, &a2);
            prop_assert_eq!(&b, &b2);
            prop_assert_eq!(a.len() + b.len(), res * res);
            let key = |p: &SurfacePoint| (p.x.to_bits(), p.y.to_bits());
            let mut all: Vec<_> = a.iter().chain(&b).map(key).collect();
            all.sort();
            all.dedup();
            prop_assert_eq!(all.len(), res * res);
        }
    }
}
