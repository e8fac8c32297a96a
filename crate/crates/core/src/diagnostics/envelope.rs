use std::f64::consts::PI;

use super::DiagnosticsError;
use crate::energy::EnergyModel;
use crate::samplers::{fill_stepsize, SamplerConfig, SamplerKind};

/// Bounds `a · n_{σ1}(y − z) ≤ q(z, y) ≤ b · n_{σ2}(y − z)` with `n_σ` the
/// centered isotropic Gaussian density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub sigma1: f64,
    pub sigma2: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCheck {
    pub envelope: Envelope,
    pub passed: bool,
    /// Smallest log-density slack over pairs and both sides; negative
    /// means a violation.
    pub worst_margin: f64,
    pub worst_pair: usize,
}

const SLACK_TOL: f64 = 1e-9;

/// Checks the two-Gaussian envelope of the Langevin proposal on the given
/// `(z, y)` pairs. Without a `candidate`, the envelope is derived from the
/// realized stepsize range over the pairs, the largest drift `h = max |γ g / 2|`
/// and the largest displacement `D = max |y − z|`:
/// `a = (σ1/σ2)^ℓ exp(−ℓ(2Dh + h²)/(2σ1²))`, `b = (σ2/σ1)^ℓ exp(ℓDh/σ2²)`.
pub fn proposal_envelope_check<M: EnergyModel + ?Sized>(
    model: &M,
    cfg: &SamplerConfig,
    pairs: &[(Vec<f64>, Vec<f64>)],
    candidate: Option<Envelope>,
) -> Result<EnvelopeCheck, DiagnosticsError> {
    cfg.validate()?;
    if !matches!(cfg.kind, SamplerKind::Stanley | SamplerKind::Ula | SamplerKind::Mala) {
        return Err(DiagnosticsError::InvalidConfig(format!("{} has no Langevin proposal density", cfg.kind)));
    }
    if !(cfg.eps > 0.0) {
        return Err(DiagnosticsError::InvalidConfig("eps must be positive".into()));
    }
    if pairs.is_empty() {
        return Err(DiagnosticsError::InvalidConfig("no sample pairs".into()));
    }
    let dim = model.dim();
    // Per pair: stepsize and drift at z.
    let mut local = Vec::with_capacity(pairs.len());
    for (z, y) in pairs {
        model.check_point(z)?;
        model.check_point(y)?;
        let mut g = vec![0.0; dim];
        model.value_and_grad_x(z, &mut g);
        let mut gamma = vec![cfg.gamma; dim];
        if cfg.uses_clamped_stepsize() {
            fill_stepsize(&g, cfg.th, cfg.norm, &mut gamma).map_err(|e| DiagnosticsError::InvalidConfig(format!("{e:?}")))?;
        }
        if gamma.iter().any(|v| !(*v > 0.0)) {
            return Err(DiagnosticsError::InvalidConfig("stepsizes must be positive".into()));
        }
        let drift: Vec<f64> = gamma.iter().zip(&g).map(|(ga, gi)| ga * gi / 2.0).collect();
        local.push((gamma, drift));
    }
    let envelope = match candidate {
        Some(e) => e,
        None => {
            let mut g_min = f64::INFINITY;
            let mut g_max: f64 = 0.0;
            let mut h: f64 = 0.0;
            let mut d: f64 = 0.0;
            for ((z, y), (gamma, drift)) in pairs.iter().zip(&local) {
                for i in 0..dim {
                    g_min = g_min.min(gamma[i]);
                    g_max = g_max.max(gamma[i]);
                    h = h.max(drift[i].abs());
                    d = d.max((y[i] - z[i]).abs());
                }
            }
            let sigma1 = cfg.eps * g_min.sqrt();
            let sigma2 = cfg.eps * g_max.sqrt();
            let l = dim as f64;
            Envelope {
                sigma1,
                sigma2,
                a: (sigma1 / sigma2).powf(l) * (-l * (2.0 * d * h + h * h) / (2.0 * sigma1 * sigma1)).exp(),
                b: (sigma2 / sigma1).powf(l) * (l * d * h / (sigma2 * sigma2)).exp(),
            }
        }
    };
    let mut worst_margin = f64::INFINITY;
    let mut worst_pair = 0;
    for (idx, ((z, y), (gamma, drift))) in pairs.iter().zip(&local).enumerate() {
        let mut log_q = 0.0;
        let mut sq = 0.0;
        for i in 0..dim {
            let s2 = cfg.eps * cfg.eps * gamma[i];
            let r = y[i] - z[i] - drift[i];
            log_q -= r * r / (2.0 * s2) + 0.5 * (2.0 * PI * s2).ln();
            sq += (y[i] - z[i]).powi(2);
        }
        let log_n = |sigma: f64| -sq / (2.0 * sigma * sigma) - dim as f64 * 0.5 * (2.0 * PI * sigma * sigma).ln();
        let lower = log_q - envelope.a.ln() - log_n(envelope.sigma1);
        let upper = envelope.b.ln() + log_n(envelope.sigma2) - log_q;
        let m = lower.min(upper);
        if m < worst_margin {
            worst_margin = m;
            worst_pair = idx;
        }
    }
    Ok(EnvelopeCheck {
        envelope,
        passed: worst_margin >= -SLACK_TOL,
        worst_margin,
        worst_pair,
    })
}
