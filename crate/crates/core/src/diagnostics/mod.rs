//! Numerical probes of convergence properties (drift, minorization,
//! geometric rate, proposal envelopes) and chain quality metrics.
//!
//! Probes take any [`Kernel`](crate::samplers::Kernel), so the same code
//! runs on the configured samplers and on the fixture kernels in
//! [`fixtures`].

mod drift;
mod envelope;
pub mod fixtures;
mod metrics;
mod minorization;
mod rate;

pub use drift::{drift_family, drift_function, drift_probe, log_drift, DriftEstimate, DriftSpec, PointRatio};
pub use envelope::{proposal_envelope_check, Envelope, EnvelopeCheck};
pub use metrics::{batch_means_se, ess, hist_kl, mmd, mmd_biased, HistKl};
pub use minorization::{minorization_probe, MinorizationConfig, MinorizationEstimate, MIN_SAMPLES_PER_BIN};
pub use rate::{decay_profile, fit_geometric, geometric_rate_fit, DecayPoint, GeometricFit, RateFit};

use thiserror::Error;

use crate::energy::EnergyError;
use crate::samplers::SamplerError;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("invalid probe config: {0}")]
    InvalidConfig(String),
    #[error("kernel diverged from grid point {point:?}")]
    Divergence { point: Vec<f64> },
    #[error("{empty} empty reference bins with {mc_samples} samples; increase mc_samples to at least {needed}")]
    IncreaseSamples { empty: usize, mc_samples: usize, needed: usize },
    #[error("only {usable} of {k_max} decay points lie above the noise floor; reduce k_max or raise mc_samples")]
    WindowTooLong { usable: usize, k_max: usize },
    #[error("series is constant; effective sample size undefined")]
    ConstantSeries,
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Merged outcome of the probes run on one target. Unrun probes are `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProbeReport {
    pub minorization_eps: Option<f64>,
    pub drift_mu: Option<f64>,
    pub drift_mu_se: Option<f64>,
    pub drift_delta: Option<f64>,
    pub rate_rho: Option<f64>,
    pub rate_e: Option<f64>,
    pub fit_r2: Option<f64>,
    pub grid_spec: String,
}

impl ProbeReport {
    pub fn with_drift(mut self, d: &DriftEstimate) -> Self {
        self.drift_mu = Some(d.mu);
        self.drift_mu_se = Some(d.mu_se);
        self.drift_delta = Some(d.delta);
        self
    }

    pub fn with_minorization(mut self, m: &MinorizationEstimate) -> Self {
        self.minorization_eps = Some(m.eps);
        self
    }

    pub fn with_rate(mut self, r: &RateFit) -> Self {
        self.rate_rho = Some(r.fit.rho);
        self.rate_e = Some(r.fit.e);
        self.fit_r2 = Some(r.fit.r2);
        self
    }

    /// `(field, value)` rows; unrun probes are written as empty values.
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.9e}")).unwrap_or_default();
        vec![
            ("minorization_eps", f(self.minorization_eps)),
            ("drift_mu", f(self.drift_mu)),
            ("drift_mu_se", f(self.drift_mu_se)),
            ("drift_delta", f(self.drift_delta)),
            ("rate_rho", f(self.rate_rho)),
            ("rate_e", f(self.rate_e)),
            ("fit_r2", f(self.fit_r2)),
            ("grid_spec", self.grid_spec.clone()),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("field,value\n");
        for (k, v) in self.rows() {
            out.push_str(k);
            out.push(',');
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}

/// Euclidean norm of a point.
pub(crate) fn norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Mean and standard error of the mean.
pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_csv_marks_unrun_probes() {
        let r = ProbeReport {
            drift_mu: Some(0.5),
            grid_spec: "|z| in [2,6]".into(),
            ..Default::default()
        };
        let csv = r.to_csv();
        assert!(csv.starts_with("field,value\n"));
        assert!(csv.contains("drift_mu,5.000000000e-1\n"));
        assert!(csv.contains("minorization_eps,\n"));
    }

    #[test]
    fn mean_se_of_constant_is_zero() {
        assert_eq!(mean_se(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
