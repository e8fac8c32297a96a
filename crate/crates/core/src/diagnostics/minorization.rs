use rayon::prelude::*;

use super::{norm, DiagnosticsError};
use crate::rng::indexed_substream;
use crate::samplers::Kernel;

/// Below this many expected draws per reference bin an empty bin is
/// treated as undersampling rather than absent mass.
pub const MIN_SAMPLES_PER_BIN: usize = 10;

/// Reference measure: uniform on `[-box_half, box_half]^ℓ`, histogrammed
/// with `bins` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinorizationConfig {
    pub box_half: f64,
    pub bins: usize,
}

impl Default for MinorizationConfig {
    fn default() -> Self {
        Self { box_half: 1.0, bins: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinorizationEstimate {
    /// `min` over small-set grid points and reference bins of the
    /// transition-to-reference density ratio, clamped to `[0, 1]`.
    pub eps: f64,
    /// Unclamped minimum ratio per probed grid point.
    pub per_point: Vec<(Vec<f64>, f64)>,
}

pub fn minorization_probe<K: Kernel + ?Sized>(
    kernel: &K,
    small_set_radius: f64,
    grid: &[Vec<f64>],
    mc_samples: usize,
    cfg: &MinorizationConfig,
    seed: u64,
) -> Result<MinorizationEstimate, DiagnosticsError> {
    let dim = kernel.dim();
    if dim == 0 || dim > 2 {
        return Err(DiagnosticsError::InvalidConfig(format!("minorization histograms need a 1-D or 2-D kernel, got {dim}-D")));
    }
    if cfg.bins == 0 || !(cfg.box_half > 0.0) {
        return Err(DiagnosticsError::InvalidConfig("reference box needs positive size and bins".into()));
    }
    let inside: Vec<&Vec<f64>> = grid.iter().filter(|z| z.len() == dim && norm(z) <= small_set_radius).collect();
    if inside.is_empty() {
        return Err(DiagnosticsError::InvalidConfig("no grid point lies in the small set".into()));
    }
    let cells = cfg.bins.pow(dim as u32);
    let needed = MIN_SAMPLES_PER_BIN * cells;
    let per_point: Vec<(Vec<f64>, f64, usize)> = inside
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let mut rng = indexed_substream(seed, "minorization", i);
            let mut counts = vec![0u64; cells];
            for _ in 0..mc_samples {
                let y = kernel.step(z, &mut rng).map_err(|_| DiagnosticsError::Divergence { point: z.to_vec() })?;
                if let Some(c) = cell(&y, cfg) {
                    counts[c] += 1;
                }
            }
            let empty = counts.iter().filter(|&&c| c == 0).count();
            let min = *counts.iter().min().unwrap() as f64;
            // Density ratio against uniform: (count / (n · cell volume)) · box volume.
            Ok((z.to_vec(), min * cells as f64 / mc_samples as f64, empty))
        })
        .collect::<Result<_, DiagnosticsError>>()?;
    let empty: usize = per_point.iter().map(|p| p.2).sum();
    if empty > 0 && mc_samples < needed {
        return Err(DiagnosticsError::IncreaseSamples { empty, mc_samples, needed });
    }
    let eps = per_point.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).clamp(0.0, 1.0);
    Ok(MinorizationEstimate {
        eps,
        per_point: per_point.into_iter().map(|(z, r, _)| (z, r)).collect(),
    })
}

fn cell(y: &[f64], cfg: &MinorizationConfig) -> Option<usize> {
    let mut idx = 0;
    for &v in y {
        let u = (v + cfg.box_half) / (2.0 * cfg.box_half);
        if !(0.0..=1.0).contains(&u) {
            return None;
        }
        let k = ((u * cfg.bins as f64) as usize).min(cfg.bins - 1);
        idx = idx * cfg.bins + k;
    }
    Some(idx)
}
