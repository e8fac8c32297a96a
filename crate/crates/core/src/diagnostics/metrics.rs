use rayon::prelude::*;

use super::DiagnosticsError;
use crate::energy::EnergyModel;
use crate::quadrature::{simpson, simpson_2d};

/// Effective sample size from Geyer's initial positive sequence: pairs
/// `ρ_{2m} + ρ_{2m+1}` are summed until the first non-positive pair.
/// The integrated autocorrelation time is floored at 1, so `ESS ≤ N`.
pub fn ess(series: &[f64]) -> Result<f64, DiagnosticsError> {
    let n = series.len();
    if n < 10 {
        return Err(DiagnosticsError::InvalidConfig(format!("ESS needs at least 10 values, got {n}")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let acov = |lag: usize| centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let c0 = acov(0);
    if !(c0 > 0.0) {
        return Err(DiagnosticsError::ConstantSeries);
    }
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = (acov(2 * m) + acov(2 * m + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    Ok(n as f64 / tau.max(1.0))
}

/// Standard error of the mean from `batches` non-overlapping batch means.
pub fn batch_means_se(series: &[f64], batches: usize) -> Result<f64, DiagnosticsError> {
    if batches < 2 || series.len() < 2 * batches {
        return Err(DiagnosticsError::InvalidConfig("need at least two batches of two values".into()));
    }
    let len = series.len() / batches;
    let means: Vec<f64> = series.chunks_exact(len).take(batches).map(|c| c.iter().sum::<f64>() / len as f64).collect();
    Ok(super::mean_se(&means).1)
}

fn kernel_sum(a: &[f64], b: &[f64], dim: usize, inv2h2: f64, skip_diagonal: bool) -> f64 {
    a.par_chunks_exact(dim)
        .enumerate()
        .map(|(i, x)| {
            b.chunks_exact(dim)
                .enumerate()
                .filter(|(j, _)| !(skip_diagonal && *j == i))
                .map(|(_, y)| {
                    let d2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
                    (-d2 * inv2h2).exp()
                })
                .sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

fn check_mmd_inputs(a: &[f64], b: &[f64], dim: usize, bandwidth: f64, min: usize) -> Result<(usize, usize), DiagnosticsError> {
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(DiagnosticsError::InvalidConfig(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if dim == 0 || !a.len().is_multiple_of(dim) || !b.len().is_multiple_of(dim) {
        return Err(DiagnosticsError::InvalidConfig("sample sets do not match the dimension".into()));
    }
    let (m, n) = (a.len() / dim, b.len() / dim);
    if m < min || n < min {
        return Err(DiagnosticsError::InvalidConfig(format!("each sample set needs at least {min} points")));
    }
    Ok((m, n))
}

/// Unbiased Gaussian-kernel MMD² between two row-major point sets,
/// `k(x, y) = exp(−‖x − y‖² / (2 h²))`. May be slightly negative.
pub fn mmd(a: &[f64], b: &[f64], dim: usize, bandwidth: f64) -> Result<f64, DiagnosticsError> {
    let (m, n) = check_mmd_inputs(a, b, dim, bandwidth, 2)?;
    let s = 1.0 / (2.0 * bandwidth * bandwidth);
    let (mf, nf) = (m as f64, n as f64);
    let kaa = kernel_sum(a, a, dim, s, true) / (mf * (mf - 1.0));
    let kbb = kernel_sum(b, b, dim, s, true) / (nf * (nf - 1.0));
    let kab = kernel_sum(a, b, dim, s, false) / (mf * nf);
    Ok(kaa + kbb - 2.0 * kab)
}

/// Biased (V-statistic) MMD²; nonnegative and zero for identical sets.
pub fn mmd_biased(a: &[f64], b: &[f64], dim: usize, bandwidth: f64) -> Result<f64, DiagnosticsError> {
    let (m, n) = check_mmd_inputs(a, b, dim, bandwidth, 1)?;
    let s = 1.0 / (2.0 * bandwidth * bandwidth);
    let (mf, nf) = (m as f64, n as f64);
    let kaa = kernel_sum(a, a, dim, s, false) / (mf * mf);
    let kbb = kernel_sum(b, b, dim, s, false) / (nf * nf);
    let kab = kernel_sum(a, b, dim, s, false) / (mf * nf);
    Ok((kaa + kbb - 2.0 * kab).max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistKl {
    pub kl: f64,
    /// KL of the smoothed expected histogram `(n q + 1) / (n + B)`: the
    /// expected value for exact samples, up to the sampling term `(B − 1) / 2n`.
    pub floor: f64,
    pub outside_fraction: f64,
    /// More than 5% of the samples fell outside the box.
    pub box_too_small: bool,
}

const OUTSIDE_WARN: f64 = 0.05;
const SIMPSON_MIN: usize = 4;
const SIMPSON_MAX: usize = 128;
const SIMPSON_RTOL: f64 = 1e-4;

/// `KL(p̂ ‖ q)` where `p̂` is the histogram of the in-box samples with one
/// extra count per bin and `q` is the target mass per bin, normalized over
/// the box. Works for any 1-D or 2-D model; `log Z` cancels.
pub fn hist_kl<M: EnergyModel + ?Sized>(
    samples: &[f64],
    target: &M,
    bins: usize,
    bounds: &[(f64, f64)],
) -> Result<HistKl, DiagnosticsError> {
    let dim = target.dim();
    if dim == 0 || dim > 2 || bounds.len() != dim {
        return Err(DiagnosticsError::InvalidConfig("hist_kl needs a 1-D or 2-D target and matching bounds".into()));
    }
    if bins == 0 || bounds.iter().any(|(lo, hi)| !(hi > lo)) {
        return Err(DiagnosticsError::InvalidConfig("bins and box extent must be positive".into()));
    }
    if samples.is_empty() || !samples.len().is_multiple_of(dim) {
        return Err(DiagnosticsError::InvalidConfig("samples must be a nonempty set of points".into()));
    }
    let cells = bins.pow(dim as u32);
    let width: Vec<f64> = bounds.iter().map(|(lo, hi)| (hi - lo) / bins as f64).collect();
    let mut counts = vec![0u64; cells];
    let mut outside = 0usize;
    for p in samples.chunks_exact(dim) {
        let mut idx = 0;
        let mut ok = true;
        for (i, &v) in p.iter().enumerate() {
            let u = (v - bounds[i].0) / width[i];
            if !(u >= 0.0 && u <= bins as f64) {
                ok = false;
                break;
            }
            idx = idx * bins + (u as usize).min(bins - 1);
        }
        if ok {
            counts[idx] += 1;
        } else {
            outside += 1;
        }
    }
    let n_total = samples.len() / dim;
    let n_in = (n_total - outside) as f64;

    let lo = |axis: usize, k: usize| bounds[axis].0 + width[axis] * k as f64;
    let centers_max = (0..cells)
        .map(|c| {
            let x: Vec<f64> = cell_axes(c, bins, dim).iter().enumerate().map(|(a, &k)| lo(a, k) + 0.5 * width[a]).collect();
            target.value(&x)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let mass: Vec<f64> = (0..cells)
        .into_par_iter()
        .map(|c| {
            let ks = cell_axes(c, bins, dim);
            let rule = |n: usize| {
                if dim == 1 {
                    let a = lo(0, ks[0]);
                    simpson(&|x| (target.value(&[x]) - centers_max).exp(), a, a + width[0], n)
                } else {
                    let (a, b) = (lo(0, ks[0]), lo(1, ks[1]));
                    simpson_2d(&|x, y| (target.value(&[x, y]) - centers_max).exp(), (a, a + width[0]), (b, b + width[1]), n)
                }
            };
            let mut n = SIMPSON_MIN;
            let mut prev = rule(n);
            while n < SIMPSON_MAX {
                n *= 2;
                let next = rule(n);
                let done = (next - prev).abs() <= SIMPSON_RTOL * next.abs();
                prev = next;
                if done {
                    break;
                }
            }
            prev
        })
        .collect();
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(DiagnosticsError::InvalidConfig("target has no finite mass on the box".into()));
    }
    let denom = n_in + cells as f64;
    let q: Vec<f64> = mass.iter().map(|m| m / total).collect();
    let kl = smoothed_kl(counts.iter().map(|&c| c as f64), &q, denom);
    let floor = smoothed_kl(q.iter().map(|qi| n_in * qi), &q, denom);
    let outside_fraction = outside as f64 / n_total as f64;
    Ok(HistKl {
        kl,
        floor,
        outside_fraction,
        box_too_small: outside_fraction > OUTSIDE_WARN,
    })
}

fn smoothed_kl(counts: impl Iterator<Item = f64>, q: &[f64], denom: f64) -> f64 {
    counts
        .zip(q)
        .map(|(c, &qi)| {
            let p = (c + 1.0) / denom;
            if qi > 0.0 {
                p * (p / qi).ln()
            } else {
                f64::INFINITY
            }
        })
        .sum::<f64>()
        .max(0.0)
}

/// Per-axis bin indices of a row-major cell index.
fn cell_axes(c: usize, bins: usize, dim: usize) -> Vec<usize> {
    if dim == 1 {
        vec![c]
    } else {
        vec![c / bins, c % bins]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::AnalyticEnergy;
    use crate::rng::substream;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normals(n: usize, mean: f64, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, "normals");
        (0..n).map(|_| mean + rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn iid_ess_is_near_n() {
        let x = normals(10_000, 0.0, 1);
        let e = ess(&x).unwrap();
        assert!((e - 10_000.0).abs() < 1000.0, "ess {e}");
    }

    #[test]
    fn ar1_ess_matches_closed_form() {
        let n = 100_000;
        let phi = 0.5;
        let xi = normals(n, 0.0, 2);
        let mut x = vec![0.0; n];
        for t in 1..n {
            x[t] = phi * x[t - 1] + xi[t];
        }
        let e = ess(&x).unwrap();
        let expected = n as f64 * (1.0 - phi) / (1.0 + phi);
        assert!((e - expected).abs() < 0.1 * expected, "ess {e} vs {expected}");
    }

    #[test]
    fn alternating_series_is_bounded() {
        let x: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let e = ess(&x).unwrap();
        assert!(e > 0.0 && e <= 1000.0);
    }

    #[test]
    fn ess_errors() {
        assert!(matches!(ess(&[3.0; 50]), Err(DiagnosticsError::ConstantSeries)));
        assert!(ess(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn batch_means_of_iid_matches_sigma_over_sqrt_n() {
        let x = normals(100_000, 0.0, 3);
        let se = batch_means_se(&x, 50).unwrap();
        let expected = 1.0 / (100_000f64).sqrt();
        assert!((se / expected - 1.0).abs() < 0.35, "se {se}");
    }

    #[test]
    fn mmd_identical_sets() {
        let a = normals(200, 0.0, 4);
        assert_eq!(mmd_biased(&a, &a, 1, 1.0).unwrap(), 0.0);
        let u = mmd(&a, &a, 1, 1.0).unwrap();
        assert!(u <= 0.0 && u > -2.0 / 200.0 * 2.0, "u {u}");
    }

    #[test]
    fn mmd_separated_sets() {
        let a = normals(500, 0.0, 5);
        let b = normals(500, 10.0, 6);
        let v = mmd(&a, &b, 1, 1.0).unwrap();
        // Brute force: the cross term is negligible, so MMD² ≈ E k(a,a') + E k(b,b') ≈ 2/sqrt(3).
        let oracle = 2.0 / 3f64.sqrt();
        assert!(v > 0.5);
        assert!((v - oracle).abs() < 0.05, "mmd {v}");
    }

    #[test]
    fn mmd_is_symmetric_and_permutation_invariant() {
        let a = normals(300, 0.0, 7);
        let b = normals(200, 0.5, 8);
        let ab = mmd(&a, &b, 1, 0.7).unwrap();
        let ba = mmd(&b, &a, 1, 0.7).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        let mut shuffled = a.clone();
        shuffled.shuffle(&mut substream(9, "shuffle"));
        assert!((mmd(&shuffled, &b, 1, 0.7).unwrap() - ab).abs() < 1e-12);
        assert!(mmd(&a, &b, 1, 0.0).is_err());
        assert!(mmd(&a[..1], &b, 1, 1.0).is_err());
    }

    #[test]
    fn mmd_2d() {
        let a = normals(400, 0.0, 10);
        let b = normals(400, 0.0, 11);
        assert!(mmd(&a, &b, 2, 1.0).unwrap().abs() < 0.02);
    }

    #[test]
    fn hist_kl_self_sampling_reaches_floor() {
        let t = AnalyticEnergy::standard_gaussian(1);
        let x = normals(100_000, 0.0, 12);
        let bins = 50;
        let r = hist_kl(&x, &t, bins, &[(-4.0, 4.0)]).unwrap();
        // Plug-in KL of a multinomial sample has expectation ≈ (B − 1) / (2n).
        let chi2 = (bins as f64 - 1.0) / (2.0 * 100_000.0);
        println!("gaussian floor at n=1e5, 50 bins: {:.3e}", r.floor);
        assert!(r.kl < r.floor + 4.0 * chi2, "kl {} floor {}", r.kl, r.floor);
        assert!(r.kl >= 0.0);
        assert!(!r.box_too_small);
    }

    #[test]
    fn hist_kl_point_mass_is_large() {
        let t = AnalyticEnergy::standard_gaussian(1);
        let x = vec![0.0; 10_000];
        let r = hist_kl(&x, &t, 50, &[(-4.0, 4.0)]).unwrap();
        assert!(r.kl > 2.0, "kl {}", r.kl);
    }

    #[test]
    fn hist_kl_flags_small_box() {
        let t = AnalyticEnergy::standard_gaussian(1);
        let x = normals(2000, 0.0, 13);
        let r = hist_kl(&x, &t, 10, &[(-0.5, 0.5)]).unwrap();
        assert!(r.box_too_small);
        assert!(r.outside_fraction > 0.5);
    }

    #[test]
    fn hist_kl_2d_rings_self_sampling() {
        let t = AnalyticEnergy::rings(2, vec![0.5, 1.0, 1.5], 0.05).unwrap();
        let mut rng = substream(3, "rejection");
        let mut exact = Vec::new();
        while exact.len() < 2 * 100_000 {
            let p = [rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0];
            if rng.random::<f64>() < t.value(&p).exp() {
                exact.extend_from_slice(&p);
            }
        }
        let bins = 40;
        let good = hist_kl(&exact, &t, bins, &[(-2.0, 2.0), (-2.0, 2.0)]).unwrap();

        // Independent floor: midpoint-rule bin masses, 64x64 points per bin.
        let w = 4.0 / bins as f64;
        let mut q = vec![0.0; bins * bins];
        for (c, qc) in q.iter_mut().enumerate() {
            let (i, j) = (c / bins, c % bins);
            for a in 0..64 {
                for b in 0..64 {
                    let x = -2.0 + w * (i as f64 + (a as f64 + 0.5) / 64.0);
                    let y = -2.0 + w * (j as f64 + (b as f64 + 0.5) / 64.0);
                    *qc += t.value(&[x, y]).exp();
                }
            }
        }
        let total: f64 = q.iter().sum();
        let n = 100_000.0;
        let cells = (bins * bins) as f64;
        let floor: f64 = q
            .iter()
            .map(|m| {
                let qi = m / total;
                let p = (n * qi + 1.0) / (n + cells);
                p * (p / qi).ln()
            })
            .sum();
        println!("rings floor at n=1e5, 40x40 bins: {floor:.4}");
        assert!((good.floor - floor).abs() < 0.01 * floor, "{} vs {floor}", good.floor);
        assert!((good.kl - floor).abs() < 3.0 * (cells - 1.0) / (2.0 * n), "kl {} floor {floor}", good.kl);

        let noise = normals(200_000, 0.0, 14);
        let bad = hist_kl(&noise, &t, bins, &[(-2.0, 2.0), (-2.0, 2.0)]).unwrap();
        assert!(bad.kl > good.kl + 0.5);
    }
}
