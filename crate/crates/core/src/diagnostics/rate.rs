use rayon::prelude::*;

use super::DiagnosticsError;
use crate::rng::indexed_substream;
use crate::samplers::Kernel;

/// Decay points closer than this many standard errors to zero are treated
/// as noise and end the fit window.
pub const NOISE_FLOOR_SE: f64 = 3.0;

/// `log d_k = log e + k log ρ` fitted by least squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricFit {
    pub e: f64,
    pub rho: f64,
    pub r2: f64,
}

/// `d_k = max_{z0} |E[u(z_k) | z0] − πu| / V(z0)` with the standard error
/// of the maximizing start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayPoint {
    pub k: usize,
    pub d: f64,
    pub se: f64,
}

impl DecayPoint {
    pub fn above_noise(&self) -> bool {
        self.d > NOISE_FLOOR_SE * self.se
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub fit: GeometricFit,
    /// Inclusive range of `k` used in the fit.
    pub window: (usize, usize),
    pub profile: Vec<DecayPoint>,
}

pub fn fit_geometric(ks: &[f64], ds: &[f64]) -> Result<GeometricFit, DiagnosticsError> {
    if ks.len() != ds.len() || ks.len() < 2 {
        return Err(DiagnosticsError::InvalidConfig("a geometric fit needs at least two matched points".into()));
    }
    if ds.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(DiagnosticsError::InvalidConfig("decay values must be positive".into()));
    }
    let n = ks.len() as f64;
    let ys: Vec<f64> = ds.iter().map(|d| d.ln()).collect();
    let kx = ks.iter().sum::<f64>() / n;
    let ky = ys.iter().sum::<f64>() / n;
    let sxx: f64 = ks.iter().map(|k| (k - kx) * (k - kx)).sum();
    if sxx == 0.0 {
        return Err(DiagnosticsError::InvalidConfig("fit needs distinct k values".into()));
    }
    let sxy: f64 = ks.iter().zip(&ys).map(|(k, y)| (k - kx) * (y - ky)).sum();
    let slope = sxy / sxx;
    let intercept = ky - slope * kx;
    let ss_tot: f64 = ys.iter().map(|y| (y - ky) * (y - ky)).sum();
    let ss_res: f64 = ks.iter().zip(&ys).map(|(k, y)| (y - intercept - slope * k).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(GeometricFit {
        e: intercept.exp(),
        rho: slope.exp(),
        r2,
    })
}

/// Runs `mc_samples` independent chains of `k_max` steps from every start
/// in `z0_set` and records `d_k` for `k = 1..=k_max`.
#[allow(clippy::too_many_arguments)]
pub fn decay_profile<K, U, V>(
    kernel: &K,
    pi_u: f64,
    u: &U,
    v: &V,
    z0_set: &[Vec<f64>],
    k_max: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<Vec<DecayPoint>, DiagnosticsError>
where
    K: Kernel + ?Sized,
    U: Fn(&[f64]) -> f64 + Sync,
    V: Fn(&[f64]) -> f64 + Sync,
{
    if z0_set.is_empty() || k_max == 0 || mc_samples < 2 {
        return Err(DiagnosticsError::InvalidConfig("need starts, k_max ≥ 1 and mc_samples ≥ 2".into()));
    }
    // Per start: (mean, se) of u(z_k) for each k, scaled by 1/V(z0).
    let per_start: Vec<Vec<(f64, f64)>> = z0_set
        .par_iter()
        .enumerate()
        .map(|(i, z0)| {
            let vz = v(z0);
            if !(vz > 0.0) || !vz.is_finite() {
                return Err(DiagnosticsError::InvalidConfig(format!("V({z0:?}) must be positive")));
            }
            let mut rng = indexed_substream(seed, "rate", i);
            let mut sum = vec![0.0; k_max];
            let mut sumsq = vec![0.0; k_max];
            for _ in 0..mc_samples {
                let mut z = z0.clone();
                for k in 0..k_max {
                    z = kernel.step(&z, &mut rng).map_err(|_| DiagnosticsError::Divergence { point: z0.clone() })?;
                    let x = u(&z) - pi_u;
                    sum[k] += x;
                    sumsq[k] += x * x;
                }
            }
            let n = mc_samples as f64;
            Ok(sum
                .iter()
                .zip(&sumsq)
                .map(|(s, q)| {
                    let mean = s / n;
                    let var = ((q - n * mean * mean) / (n - 1.0)).max(0.0);
                    (mean.abs() / vz, (var / n).sqrt() / vz)
                })
                .collect())
        })
        .collect::<Result<_, DiagnosticsError>>()?;
    Ok((0..k_max)
        .map(|k| {
            let (d, se) = per_start
                .iter()
                .map(|p| p[k])
                .fold((f64::NEG_INFINITY, 0.0), |acc, x| if x.0 > acc.0 { x } else { acc });
            DecayPoint { k: k + 1, d, se }
        })
        .collect())
}

/// Fits the geometric decay over the leading run of `d_k` that stays above
/// the Monte Carlo noise floor.
#[allow(clippy::too_many_arguments)]
pub fn geometric_rate_fit<K, U, V>(
    kernel: &K,
    pi_u: f64,
    u: &U,
    v: &V,
    z0_set: &[Vec<f64>],
    k_max: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<RateFit, DiagnosticsError>
where
    K: Kernel + ?Sized,
    U: Fn(&[f64]) -> f64 + Sync,
    V: Fn(&[f64]) -> f64 + Sync,
{
    let profile = decay_profile(kernel, pi_u, u, v, z0_set, k_max, mc_samples, seed)?;
    let usable = profile.iter().take_while(|p| p.above_noise()).count();
    if usable < 3 {
        return Err(DiagnosticsError::WindowTooLong { usable, k_max });
    }
    let ks: Vec<f64> = profile[..usable].iter().map(|p| p.k as f64).collect();
    let ds: Vec<f64> = profile[..usable].iter().map(|p| p.d).collect();
    let fit = fit_geometric(&ks, &ds)?;
    Ok(RateFit {
        fit,
        window: (1, usable),
        profile,
    })
}
