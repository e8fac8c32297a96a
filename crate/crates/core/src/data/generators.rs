use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{DataError, Dataset, DatasetMeta};
use crate::rng::substream;

pub const DEFAULT_RING_RADII: [f64; 3] = [0.5, 1.0, 1.5];
pub const DEFAULT_RING_WIDTH: f64 = 0.05;

/// 2-D points on concentric rings: ring `j` uniform, angle uniform on
/// `[0, 2π)`, radius `N(r_j, width²)`.
pub fn rings_generator(n: usize, radii: &[f64], width: f64, seed: u64) -> Result<Dataset, DataError> {
    if n == 0 {
        return Err(DataError::InvalidConfig("n must be at least 1".into()));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(DataError::InvalidConfig("radii must be positive".into()));
    }
    if !(width >= 0.0) || !width.is_finite() {
        return Err(DataError::InvalidConfig("width must be nonnegative".into()));
    }
    let mut rng = substream(seed, "data");
    let mut rows = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let j = rng.random_range(0..radii.len());
        let phi = rng.random::<f64>() * TAU;
        let r = radii[j] + width * rng.sample::<f64, _>(StandardNormal);
        let (s, c) = phi.sin_cos();
        rows.push(r * c);
        rows.push(r * s);
    }
    let meta = DatasetMeta {
        name: "rings".into(),
        params: format!("radii={radii:?} width={width}"),
        seed: Some(seed),
    };
    Ok(Dataset::new(2, rows)?.with_meta(meta))
}

/// Isotropic Gaussian mixture samples.
pub fn gmm_sampler(n: usize, means: &[Vec<f64>], sigma: f64, weights: &[f64], seed: u64) -> Result<Dataset, DataError> {
    if n == 0 {
        return Err(DataError::InvalidConfig("n must be at least 1".into()));
    }
    if means.is_empty() || means.len() != weights.len() {
        return Err(DataError::InvalidConfig("need one weight per mean".into()));
    }
    crate::energy::check_simplex(weights).map_err(|e| DataError::InvalidConfig(e.to_string()))?;
    let dim = means[0].len();
    if dim == 0 || means.iter().any(|m| m.len() != dim) {
        return Err(DataError::InvalidConfig("means must share one nonzero dimension".into()));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(DataError::InvalidConfig("sigma must be nonnegative".into()));
    }
    let mut rng = substream(seed, "data");
    let mut rows = Vec::with_capacity(dim * n);
    for _ in 0..n {
        let k = crate::energy::pick_weighted(weights, rng.random::<f64>());
        for &m in &means[k] {
            // sigma = 0 must reproduce the mean bit-exactly.
            let noise: f64 = rng.sample(StandardNormal);
            rows.push(if sigma == 0.0 { m } else { m + sigma * noise });
        }
    }
    let meta = DatasetMeta {
        name: "gmm".into(),
        params: format!("means={means:?} sigma={sigma} weights={weights:?}"),
        seed: Some(seed),
    };
    Ok(Dataset::new(dim, rows)?.with_meta(meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_width_rings_lie_on_the_circle() {
        let ds = rings_generator(500, &[1.0], 0.0, 3).unwrap();
        for row in ds.iter() {
            let r = (row[0] * row[0] + row[1] * row[1]).sqrt();
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ring_assignment_is_balanced() {
        // Radii far apart so assignment is recoverable from the norm.
        let ds = rings_generator(10_000, &[1.0, 2.0], 0.01, 11).unwrap();
        let inner = ds.iter().filter(|r| (r[0] * r[0] + r[1] * r[1]).sqrt() < 1.5).count() as f64;
        assert!((inner - 5000.0).abs() <= 3.0 * 2500f64.sqrt(), "inner count {inner}");
    }

    #[test]
    fn generators_are_deterministic() {
        let a = rings_generator(100, &DEFAULT_RING_RADII, DEFAULT_RING_WIDTH, 5).unwrap();
        let b = rings_generator(100, &DEFAULT_RING_RADII, DEFAULT_RING_WIDTH, 5).unwrap();
        let c = rings_generator(100, &DEFAULT_RING_RADII, DEFAULT_RING_WIDTH, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.rows(), c.rows());
    }

    #[test]
    fn gmm_degenerate_cases() {
        let means = vec![vec![1.0, 2.0], vec![-3.0, 0.5]];
        let ds = gmm_sampler(200, &means, 0.0, &[0.5, 0.5], 1).unwrap();
        for row in ds.iter() {
            assert!(row == means[0].as_slice() || row == means[1].as_slice());
        }
        let ds = gmm_sampler(200, &means, 0.3, &[1.0, 0.0], 1).unwrap();
        for row in ds.iter() {
            assert!((row[0] - 1.0).abs() < 2.0);
        }
        assert!(gmm_sampler(10, &means, 0.1, &[0.7, 0.7], 1).is_err());
    }

    #[test]
    fn gmm_single_component_mean() {
        let n = 20_000;
        let ds = gmm_sampler(n, &[vec![2.0]], 0.5, &[1.0], 9).unwrap();
        let mean = ds.rows().iter().sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 3.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn gmm_frequencies_match_weights() {
        let n = 10_000;
        let w = [0.2, 0.3, 0.5];
        let means = vec![vec![-10.0], vec![0.0], vec![10.0]];
        let ds = gmm_sampler(n, &means, 0.1, &w, 21).unwrap();
        for (k, &wk) in w.iter().enumerate() {
            let count = ds.rows().iter().filter(|x| (**x - means[k][0]).abs() < 1.0).count() as f64;
            let se = (n as f64 * wk * (1.0 - wk)).sqrt();
            assert!((count - n as f64 * wk).abs() < 3.0 * se, "component {k}: {count}");
        }
    }
}
