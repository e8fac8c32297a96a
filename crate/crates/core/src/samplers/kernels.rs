use rand::Rng;
use rand_distr::StandardNormal;

use super::{fill_stepsize, SamplerConfig, SamplerError, SamplerKind, StepsizeRefresh};
use crate::energy::EnergyModel;
use crate::rng::ChainRng;

/// A chain state or gradient became non-finite.
#[derive(Debug)]
pub(crate) struct Diverged;

/// One transition of one chain, in place. Returns whether the move counts as accepted
/// (unadjusted kernels always accept).
pub(crate) fn transition<M: EnergyModel + ?Sized>(
    model: &M,
    cfg: &SamplerConfig,
    z: &mut [f64],
    gamma: &mut [f64],
    refresh: bool,
    rng: &mut ChainRng,
) -> Result<bool, Diverged> {
    let dim = z.len();
    match cfg.kind {
        SamplerKind::Stanley | SamplerKind::Ula | SamplerKind::Gd => {
            let mut g = vec![0.0; dim];
            model.value_and_grad_x(z, &mut g);
            if cfg.uses_clamped_stepsize() {
                if refresh {
                    fill_stepsize(&g, cfg.th, cfg.norm, gamma).map_err(|_| Diverged)?;
                }
            } else {
                gamma.iter_mut().for_each(|v| *v = cfg.gamma);
            }
            let eps = if cfg.kind == SamplerKind::Gd { 0.0 } else { cfg.eps };
            langevin_move(z, &g, gamma, eps, rng);
            check_finite(z)?;
            Ok(true)
        }
        SamplerKind::Mala => mala(model, cfg, z, gamma, refresh, rng),
        SamplerKind::Rwmh => {
            let y: Vec<f64> = z
                .iter()
                .map(|zi| zi + cfg.rwmh_sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let log_alpha = model.value(&y) - model.value(z);
            Ok(metropolis(z, y, log_alpha, rng))
        }
        SamplerKind::Hmc => hmc(model, cfg, z, rng),
    }
}

/// `z ← z + γ ⊙ g / 2 + sqrt(γ) ⊙ eps ξ`. Noise is drawn only when `eps > 0`.
fn langevin_move(z: &mut [f64], g: &[f64], gamma: &[f64], eps: f64, rng: &mut ChainRng) {
    for ((zi, gi), ga) in z.iter_mut().zip(g).zip(gamma) {
        let noise = if eps > 0.0 {
            ga.sqrt() * (eps * rng.sample::<f64, _>(StandardNormal))
        } else {
            0.0
        };
        *zi = *zi + ga * gi / 2.0 + noise;
    }
}

fn check_finite(z: &[f64]) -> Result<(), Diverged> {
    if z.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Diverged)
    }
}

/// Accepts `y` with probability `min(1, exp(log_alpha))`. A non-finite
/// proposal is always rejected. One uniform is drawn either way.
fn metropolis(z: &mut [f64], y: Vec<f64>, log_alpha: f64, rng: &mut ChainRng) -> bool {
    let u: f64 = rng.random();
    let ok = y.iter().all(|v| v.is_finite()) && !log_alpha.is_nan() && (log_alpha >= 0.0 || u.ln() < log_alpha);
    if ok {
        z.copy_from_slice(&y);
    }
    ok
}

/// Log density (up to the shared constant) of the Langevin proposal
/// `N(from + γ ⊙ g / 2, eps² diag(γ))` at `to`. Coordinates with zero
/// variance are skipped; they cannot move.
fn log_proposal(to: &[f64], from: &[f64], g: &[f64], gamma: &[f64], eps: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..to.len() {
        let var = eps * eps * gamma[i];
        if var > 0.0 {
            let d = to[i] - from[i] - gamma[i] * g[i] / 2.0;
            acc -= d * d / (2.0 * var) + 0.5 * var.ln();
        }
    }
    acc
}

fn mala<M: EnergyModel + ?Sized>(
    model: &M,
    cfg: &SamplerConfig,
    z: &mut [f64],
    gamma: &mut [f64],
    refresh: bool,
    rng: &mut ChainRng,
) -> Result<bool, Diverged> {
    let dim = z.len();
    let mut gz = vec![0.0; dim];
    let fz = model.value_and_grad_x(z, &mut gz);
    if !fz.is_finite() || gz.iter().any(|v| !v.is_finite()) {
        return Err(Diverged);
    }
    // Position-dependent stepsizes (refreshed every step) need the reverse
    // move's stepsize evaluated at the proposal.
    let position_dependent = cfg.anisotropic && cfg.refresh == StepsizeRefresh::PerStep;
    if cfg.anisotropic {
        if refresh || position_dependent {
            fill_stepsize(&gz, cfg.th, cfg.norm, gamma).map_err(|_| Diverged)?;
        }
    } else {
        gamma.iter_mut().for_each(|v| *v = cfg.gamma);
    }
    let mut y = z.to_vec();
    langevin_move(&mut y, &gz, gamma, cfg.eps, rng);
    let mut gy = vec![0.0; dim];
    let fy = model.value_and_grad_x(&y, &mut gy);
    let gamma_back = if position_dependent && gy.iter().all(|v| v.is_finite()) {
        let mut gb = vec![0.0; dim];
        fill_stepsize(&gy, cfg.th, cfg.norm, &mut gb).map_err(|_| Diverged)?;
        gb
    } else {
        gamma.to_vec()
    };
    let log_alpha = if y.as_slice() == &*z {
        0.0
    } else {
        fy - fz + log_proposal(z, &y, &gy, &gamma_back, cfg.eps) - log_proposal(&y, z, &gz, gamma, cfg.eps)
    };
    Ok(metropolis(z, y, log_alpha, rng))
}

fn hmc<M: EnergyModel + ?Sized>(model: &M, cfg: &SamplerConfig, z: &mut [f64], rng: &mut ChainRng) -> Result<bool, Diverged> {
    let dim = z.len();
    let h = cfg.hmc_step;
    let mut p: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut q = z.to_vec();
    let mut g = vec![0.0; dim];
    let f0 = model.value_and_grad_x(&q, &mut g);
    if !f0.is_finite() {
        return Err(Diverged);
    }
    let h0 = -f0 + 0.5 * p.iter().map(|v| v * v).sum::<f64>();
    let (_, f1) = leapfrog(model, &mut q, &mut p, &mut g, h, cfg.hmc_leapfrog);
    let h1 = -f1 + 0.5 * p.iter().map(|v| v * v).sum::<f64>();
    Ok(metropolis(z, q, h0 - h1, rng))
}

/// `steps` leapfrog steps of size `h` for `H(q, p) = −f(q) + ‖p‖²/2`.
/// `g` must hold `∇f(q)` on entry and holds `∇f` at the final position on
/// exit. Returns the number of steps taken and `f` at the final position.
pub(crate) fn leapfrog<M: EnergyModel + ?Sized>(
    model: &M,
    q: &mut [f64],
    p: &mut [f64],
    g: &mut [f64],
    h: f64,
    steps: usize,
) -> (usize, f64) {
    let mut f = model.value(q);
    for _ in 0..steps {
        for (pi, gi) in p.iter_mut().zip(g.iter()) {
            *pi += 0.5 * h * gi;
        }
        for (qi, pi) in q.iter_mut().zip(p.iter()) {
            *qi += h * pi;
        }
        f = model.value_and_grad_x(q, g);
        for (pi, gi) in p.iter_mut().zip(g.iter()) {
            *pi += 0.5 * h * gi;
        }
        if !f.is_finite() {
            break;
        }
    }
    (steps, f)
}

/// A single-chain Markov kernel `z ↦ z' ~ Π(z, ·)`.
pub trait Kernel: Sync {
    fn dim(&self) -> usize;
    fn step(&self, z: &[f64], rng: &mut ChainRng) -> Result<Vec<f64>, SamplerError>;
}

/// One transition of a configured sampler, with the stepsize evaluated at
/// the starting state.
pub struct SamplerKernel<'a, M: ?Sized> {
    pub model: &'a M,
    pub cfg: SamplerConfig,
}

impl<'a, M: EnergyModel + ?Sized> SamplerKernel<'a, M> {
    pub fn new(model: &'a M, cfg: SamplerConfig) -> Result<Self, SamplerError> {
        cfg.validate()?;
        Ok(Self { model, cfg })
    }
}

impl<M: EnergyModel + ?Sized> Kernel for SamplerKernel<'_, M> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn step(&self, z: &[f64], rng: &mut ChainRng) -> Result<Vec<f64>, SamplerError> {
        let mut out = z.to_vec();
        let mut gamma = vec![1.0; z.len()];
        transition(self.model, &self.cfg, &mut out, &mut gamma, true, rng).map_err(|_| SamplerError::Divergence { chain: 0, step: 0 })?;
        Ok(out)
    }
}
