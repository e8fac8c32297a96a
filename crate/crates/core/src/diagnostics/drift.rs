use rayon::prelude::*;

use super::{mean_se, norm, DiagnosticsError};
use crate::energy::{AnalyticEnergy, EnergyModel};
use crate::rng::indexed_substream;
use crate::samplers::Kernel;

/// `V(z) = c · exp(f(z))^{-β}`, with `c` measured against the unnormalized
/// density so that a known `log Z` is absorbed into it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSpec {
    pub beta: f64,
    pub c: f64,
    /// Radius of the small set `O = {|z| ≤ r}`.
    pub small_set_radius: f64,
}

impl DriftSpec {
    /// `c = exp(β max f)`, so that `V ≥ 1` with equality at the mode.
    pub fn for_target(target: &AnalyticEnergy, beta: f64, small_set_radius: f64) -> Result<Self, DiagnosticsError> {
        let spec = Self {
            beta,
            c: (beta * target.max_value()).exp(),
            small_set_radius,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DiagnosticsError> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(DiagnosticsError::InvalidConfig(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(DiagnosticsError::InvalidConfig(format!("c must be positive, got {}", self.c)));
        }
        if !(self.small_set_radius > 0.0) {
            return Err(DiagnosticsError::InvalidConfig("small set radius must be positive".into()));
        }
        Ok(())
    }

    pub fn in_small_set(&self, z: &[f64]) -> bool {
        norm(z) <= self.small_set_radius
    }
}

/// `log V(z)`.
pub fn log_drift<M: EnergyModel + ?Sized>(spec: &DriftSpec, target: &M, z: &[f64]) -> f64 {
    spec.c.ln() - spec.beta * target.value(z)
}

pub fn drift_function<M: EnergyModel + ?Sized>(spec: &DriftSpec, target: &M, z: &[f64]) -> Result<f64, DiagnosticsError> {
    spec.validate()?;
    target.check_point(z)?;
    Ok(log_drift(spec, target, z).exp())
}

/// `(min_θ V_θ(z), max_θ V_θ(z))` over a finite family of targets, each
/// with its own mode normalization.
pub fn drift_family(targets: &[AnalyticEnergy], beta: f64, z: &[f64]) -> Result<(f64, f64), DiagnosticsError> {
    if targets.is_empty() {
        return Err(DiagnosticsError::InvalidConfig("empty target family".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for t in targets {
        let v = drift_function(&DriftSpec::for_target(t, beta, 1.0)?, t, z)?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}

/// Monte Carlo estimate of `ΠV(z) / V(z)` at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRatio {
    pub z: Vec<f64>,
    pub inside: bool,
    pub v: f64,
    pub ratio: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftEstimate {
    /// `max ΠV/V` over grid points outside the small set; `+∞` when a
    /// ratio overflows, with an infinite standard error.
    pub mu: f64,
    /// Standard error of the maximizing point's ratio.
    pub mu_se: f64,
    /// `max(0, max_{z ∈ O} ΠV(z) − μ V(z))`; zero when the grid has no point in `O`.
    pub delta: f64,
    pub points: Vec<PointRatio>,
}

impl DriftEstimate {
    /// `μ̂ + k·SE < 1`.
    pub fn passes(&self, k_se: f64) -> bool {
        self.mu + k_se * self.mu_se < 1.0
    }
}

/// Averages `V(z') / V(z)` over `mc_samples` one-step transitions from each
/// grid point. Ratios are formed in the log domain, so a kernel that stays
/// put yields exactly 1.
pub fn drift_probe<K, M>(
    kernel: &K,
    spec: &DriftSpec,
    target: &M,
    grid: &[Vec<f64>],
    mc_samples: usize,
    seed: u64,
) -> Result<DriftEstimate, DiagnosticsError>
where
    K: Kernel + ?Sized,
    M: EnergyModel + ?Sized,
{
    spec.validate()?;
    if mc_samples == 0 {
        return Err(DiagnosticsError::InvalidConfig("mc_samples must be positive".into()));
    }
    for z in grid {
        target.check_point(z)?;
    }
    if !grid.iter().any(|z| !spec.in_small_set(z)) {
        return Err(DiagnosticsError::InvalidConfig("grid has no point outside the small set".into()));
    }
    let points: Vec<PointRatio> = grid
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let mut rng = indexed_substream(seed, "drift", i);
            let lv = log_drift(spec, target, z);
            let mut ratios = Vec::with_capacity(mc_samples);
            for _ in 0..mc_samples {
                let y = kernel.step(z, &mut rng).map_err(|_| DiagnosticsError::Divergence { point: z.clone() })?;
                let r = (log_drift(spec, target, &y) - lv).exp();
                if y.iter().any(|v| !v.is_finite()) || r.is_nan() {
                    return Err(DiagnosticsError::Divergence { point: z.clone() });
                }
                ratios.push(r);
            }
            let (ratio, se) = match mean_se(&ratios) {
                (m, _) if m.is_infinite() => (f64::INFINITY, f64::INFINITY),
                ms => ms,
            };
            Ok(PointRatio {
                z: z.clone(),
                inside: spec.in_small_set(z),
                v: lv.exp(),
                ratio,
                se,
            })
        })
        .collect::<Result<_, _>>()?;
    let (mu, mu_se) = points
        .iter()
        .filter(|p| !p.inside)
        .map(|p| (p.ratio, p.se))
        .fold((f64::NEG_INFINITY, 0.0), |acc, x| if x.0 > acc.0 { x } else { acc });
    let delta = points
        .iter()
        .filter(|p| p.inside)
        .map(|p| p.v * (p.ratio - mu))
        .fold(0.0, f64::max);
    Ok(DriftEstimate { mu, mu_se, delta, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::fixtures::{IdentityKernel, JumpKernel};
    use crate::samplers::{SamplerConfig, SamplerKernel, SamplerKind};

    fn gauss() -> AnalyticEnergy {
        AnalyticEnergy::standard_gaussian(1)
    }

    fn grid_1d(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|v| vec![*v]).collect()
    }

    #[test]
    fn gaussian_drift_values() {
        let t = gauss();
        let spec = DriftSpec::for_target(&t, 0.5, 1.0).unwrap();
        assert!((drift_function(&spec, &t, &[0.0]).unwrap() - 1.0).abs() < 1e-15);
        let v2 = drift_function(&spec, &t, &[2.0]).unwrap();
        assert!((v2 - std::f64::consts::E).abs() < 1e-12);
        assert!(drift_function(&spec, &t, &[3.0]).unwrap() > v2);
    }

    #[test]
    fn normalized_form_agrees() {
        // c_θ π^{-β} with the normalized density gives the same function.
        let t = AnalyticEnergy::gaussian(vec![0.3, -1.0], 0.7).unwrap();
        let spec = DriftSpec::for_target(&t, 0.3, 1.0).unwrap();
        let z = [1.1, 0.4];
        let c_norm = t.log_density(&t.mode()).unwrap() * 0.3;
        let v = (c_norm - 0.3 * t.log_density(&z).unwrap()).exp();
        assert!((drift_function(&spec, &t, &z).unwrap() - v).abs() < 1e-12 * v);
    }

    #[test]
    fn mixture_minimum_is_one_at_mode() {
        let t = AnalyticEnergy::mixture(vec![vec![-1.0, 0.0], vec![1.5, 0.5]], vec![0.3, 0.7], 0.6).unwrap();
        let spec = DriftSpec::for_target(&t, 0.5, 1.0).unwrap();
        let mode = t.mode();
        let mut min = drift_function(&spec, &t, &mode).unwrap();
        for i in -20..=20 {
            for j in -20..=20 {
                min = min.min(drift_function(&spec, &t, &[i as f64 * 0.2, j as f64 * 0.2]).unwrap());
            }
        }
        assert!((min - 1.0).abs() < 1e-9, "min {min}");
    }

    #[test]
    fn beta_outside_unit_interval_is_rejected() {
        let t = gauss();
        for beta in [0.0, 1.0, -0.2, 1.5] {
            assert!(DriftSpec::for_target(&t, beta, 1.0).is_err());
        }
    }

    #[test]
    fn family_bounds_order() {
        let fam = vec![
            AnalyticEnergy::gaussian(vec![0.0], 1.0).unwrap(),
            AnalyticEnergy::gaussian(vec![0.5], 1.0).unwrap(),
        ];
        let (lo, hi) = drift_family(&fam, 0.5, &[2.0]).unwrap();
        assert!(lo < hi);
        assert!((lo - (0.5 * 1.5 * 1.5 / 2.0f64).exp()).abs() < 1e-12);
        assert!((hi - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn identity_kernel_gives_exactly_one() {
        let t = gauss();
        let spec = DriftSpec::for_target(&t, 0.5, 1.0).unwrap();
        let grid = grid_1d(&[-4.0, -2.0, 0.0, 0.5, 3.0]);
        let est = drift_probe(&IdentityKernel { dim: 1 }, &spec, &t, &grid, 1000, 1).unwrap();
        assert_eq!(est.mu, 1.0);
        assert_eq!(est.mu_se, 0.0);
        assert!(!est.passes(2.0));
        assert!(est.points.iter().all(|p| p.ratio == 1.0));
        assert_eq!(est.delta, 0.0);
    }

    #[test]
    fn jump_to_mode_contracts() {
        let t = gauss();
        let spec = DriftSpec::for_target(&t, 0.5, 1.0).unwrap();
        let grid = grid_1d(&[-4.0, -2.0, 1.5, 3.0]);
        let est = drift_probe(&JumpKernel { point: vec![0.0] }, &spec, &t, &grid, 1000, 1).unwrap();
        let v_min = drift_function(&spec, &t, &[1.5]).unwrap();
        assert!((est.mu - 1.0 / v_min).abs() < 1e-12);
        assert!(est.passes(2.0));
    }

    #[test]
    fn grid_must_leave_the_small_set() {
        let t = gauss();
        let spec = DriftSpec::for_target(&t, 0.5, 1.0).unwrap();
        let r = drift_probe(&IdentityKernel { dim: 1 }, &spec, &t, &grid_1d(&[0.0, 0.5]), 1000, 1);
        assert!(matches!(r, Err(DiagnosticsError::InvalidConfig(_))));
    }

    #[test]
    fn divergence_names_the_point() {
        struct Blowup;
        impl Kernel for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn step(&self, z: &[f64], _: &mut crate::rng::ChainRng) -> Result<Vec<f64>, crate::samplers::SamplerError> {
                Ok(vec![if z[0] > 2.5 { f64::INFINITY } else { z[0] }])
            }
        }
        let t = gauss();
        let spec = DriftSpec::for_target(&t, 0.5, 1.0).unwrap();
        let r = drift_probe(&Blowup, &spec, &t, &grid_1d(&[2.0, 3.0]), 10, 1);
        match r {
            Err(DiagnosticsError::Divergence { point }) => assert_eq!(point, vec![3.0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overflowing_ratio_is_unbounded_not_divergent() {
        let t = gauss();
        let spec = DriftSpec::for_target(&t, 0.5, 1.0).unwrap();
        let jump = JumpKernel { point: vec![60.0] };
        let est = drift_probe(&jump, &spec, &t, &grid_1d(&[2.0, 3.0]), 10, 1).unwrap();
        assert_eq!(est.mu, f64::INFINITY);
        assert!(!est.passes(2.0));
    }

    #[test]
    fn ula_drift_ratio_matches_closed_form() {
        // One ULA step from z is N((1 − γ/2) z, γ); E[exp(β y²/2)] has a closed form.
        let t = gauss();
        let beta = 0.5;
        let gamma = 0.5;
        let spec = DriftSpec::for_target(&t, beta, 1.0).unwrap();
        let cfg = SamplerConfig {
            gamma,
            ..SamplerConfig::new(SamplerKind::Ula)
        };
        let kernel = SamplerKernel::new(&t, cfg).unwrap();
        let z = 3.0;
        let est = drift_probe(&kernel, &spec, &t, &grid_1d(&[z]), 200_000, 5).unwrap();
        let a = beta / 2.0;
        let m = (1.0 - gamma / 2.0) * z;
        let s = 1.0 - 2.0 * a * gamma;
        let expected = s.powf(-0.5) * (a * m * m / s).exp() / (a * z * z).exp();
        assert!((est.mu - expected).abs() < 4.0 * est.mu_se, "{} vs {expected} (se {})", est.mu, est.mu_se);
    }

    #[test]
    fn standard_error_scales_as_inverse_sqrt() {
        let t = gauss();
        let spec = DriftSpec::for_target(&t, 0.5, 1.0).unwrap();
        let cfg = SamplerConfig {
            gamma: 0.5,
            ..SamplerConfig::new(SamplerKind::Mala)
        };
        let kernel = SamplerKernel::new(&t, cfg).unwrap();
        let grid = grid_1d(&[2.5]);
        let small = drift_probe(&kernel, &spec, &t, &grid, 5_000, 11).unwrap();
        let large = drift_probe(&kernel, &spec, &t, &grid, 20_000, 12).unwrap();
        let ratio = small.mu_se / large.mu_se;
        assert!((ratio / 2.0 - 1.0).abs() < 0.3, "se ratio {ratio}");
    }
}
