//! Markov transition kernels over an ensemble of parallel chains.
//!
//! The anisotropic Langevin kernel moves each chain by
//! `z ← z + γ ⊙ ∇f(z) / 2 + sqrt(γ) ⊙ (eps · ξ)` with the per-chain,
//! per-coordinate stepsize `γ = th / max(th, |∇f|)`. The remaining kinds are
//! the baselines it is compared against: constant-step Langevin, its
//! Metropolis-adjusted version, random-walk Metropolis, HMC, and noise-free
//! gradient ascent.

mod kernels;
mod stepsize;

pub use kernels::{Kernel, SamplerKernel};
pub use stepsize::{anisotropic_stepsize, fill_stepsize, NonFiniteGradient};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::energy::{EnergyError, EnergyModel};
use crate::rng::{indexed_substream, ChainRng};

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("chain {chain} diverged at step {step}")]
    Divergence { chain: usize, step: usize },
    #[error("ensemble dimension {actual} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Stanley,
    Ula,
    Mala,
    Rwmh,
    Hmc,
    Gd,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 6] = [Self::Stanley, Self::Ula, Self::Mala, Self::Rwmh, Self::Hmc, Self::Gd];

    pub fn name(self) -> &'static str {
        match self {
            Self::Stanley => "stanley",
            Self::Ula => "ula",
            Self::Mala => "mala",
            Self::Rwmh => "rwmh",
            Self::Hmc => "hmc",
            Self::Gd => "gd",
        }
    }

    /// Whether the kernel has a Metropolis accept/reject step.
    pub fn is_adjusted(self) -> bool {
        matches!(self, Self::Mala | Self::Rwmh | Self::Hmc)
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown sampler `{s}` (expected stanley|ula|mala|rwmh|hmc|gd)"))
    }
}

/// When the clamped stepsize is recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepsizeRefresh {
    /// Once at the start of each `run_chain` call, frozen for all its transitions.
    PerOuter,
    /// Before every transition.
    PerStep,
}

impl FromStr for StepsizeRefresh {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "outer" => Ok(Self::PerOuter),
            "step" => Ok(Self::PerStep),
            _ => Err(format!("unknown refresh `{s}` (expected outer|step)")),
        }
    }
}

impl fmt::Display for StepsizeRefresh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PerOuter => "outer",
            Self::PerStep => "step",
        })
    }
}

/// How `|∇f|` enters the stepsize clamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepsizeNorm {
    /// Per-coordinate absolute value (diagonal stepsize).
    Elementwise,
    /// Euclidean norm of the whole gradient (one scalar per chain).
    Euclidean,
}

impl FromStr for StepsizeNorm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "elementwise" => Ok(Self::Elementwise),
            "euclidean" => Ok(Self::Euclidean),
            _ => Err(format!("unknown stepsize norm `{s}` (expected elementwise|euclidean)")),
        }
    }
}

impl fmt::Display for StepsizeNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Elementwise => "elementwise",
            Self::Euclidean => "euclidean",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Clamp threshold of the anisotropic stepsize.
    pub th: f64,
    /// Scale of the Gaussian noise, `B = eps · ξ`.
    pub eps: f64,
    /// Transitions per outer iteration.
    pub k: usize,
    pub refresh: StepsizeRefresh,
    pub norm: StepsizeNorm,
    /// Constant stepsize for ULA, GD and non-anisotropic MALA.
    pub gamma: f64,
    /// MALA and GD use the clamped stepsize instead of `gamma`.
    pub anisotropic: bool,
    pub hmc_leapfrog: usize,
    pub hmc_step: f64,
    pub rwmh_sigma: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            kind: SamplerKind::Stanley,
            th: 0.01,
            eps: 1.0,
            k: 100,
            refresh: StepsizeRefresh::PerOuter,
            norm: StepsizeNorm::Elementwise,
            gamma: 0.14,
            anisotropic: false,
            hmc_leapfrog: 20,
            hmc_step: 0.1,
            rwmh_sigma: 0.5,
        }
    }
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |msg: String| Err(SamplerError::InvalidConfig(msg));
        if !(self.th > 0.0 && self.th.is_finite()) {
            return bad(format!("th must be positive, got {}", self.th));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be nonnegative, got {}", self.eps));
        }
        if self.k == 0 {
            return bad("K must be at least 1".into());
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be nonnegative, got {}", self.gamma));
        }
        if self.kind == SamplerKind::Mala && self.eps == 0.0 {
            return bad("mala needs eps > 0 for a proper proposal density".into());
        }
        if self.hmc_leapfrog == 0 {
            return bad("hmc_leapfrog must be at least 1".into());
        }
        if !(self.hmc_step >= 0.0 && self.hmc_step.is_finite()) {
            return bad(format!("hmc_step must be nonnegative, got {}", self.hmc_step));
        }
        if !(self.rwmh_sigma >= 0.0 && self.rwmh_sigma.is_finite()) {
            return bad(format!("rwmh_sigma must be nonnegative, got {}", self.rwmh_sigma));
        }
        Ok(())
    }

    /// Whether this kernel reads the clamped stepsize.
    pub fn uses_clamped_stepsize(&self) -> bool {
        match self.kind {
            SamplerKind::Stanley => true,
            SamplerKind::Mala | SamplerKind::Gd => self.anisotropic,
            _ => false,
        }
    }
}

/// `M` chains in `ℓ` dimensions, each with its own stepsizes and random stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainEnsemble {
    dim: usize,
    states: Vec<f64>,
    stepsizes: Vec<f64>,
    rngs: Vec<ChainRng>,
    accept_counts: Vec<u64>,
    transitions: u64,
}

impl ChainEnsemble {
    /// Chains from row-major `states` (`M × dim`), with chain `m` drawing
    /// from substream `m` of `seed`.
    pub fn new(dim: usize, states: Vec<f64>, seed: u64) -> Self {
        assert!(dim > 0 && states.len().is_multiple_of(dim), "states must be a whole number of rows");
        let m = states.len() / dim;
        let rngs = (0..m).map(|i| indexed_substream(seed, "chains", i)).collect();
        Self::with_rngs(dim, states, rngs)
    }

    pub fn with_rngs(dim: usize, states: Vec<f64>, rngs: Vec<ChainRng>) -> Self {
        assert!(dim > 0 && states.len() == rngs.len() * dim, "one rng per chain");
        let m = rngs.len();
        Self {
            dim,
            stepsizes: vec![1.0; states.len()],
            states,
            rngs,
            accept_counts: vec![0; m],
            transitions: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_chains(&self) -> usize {
        self.rngs.len()
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn state(&self, m: usize) -> &[f64] {
        &self.states[m * self.dim..(m + 1) * self.dim]
    }

    pub fn stepsizes(&self) -> &[f64] {
        &self.stepsizes
    }

    pub fn accept_counts(&self) -> &[u64] {
        &self.accept_counts
    }

    /// Transitions applied to each chain so far.
    pub fn transitions(&self) -> u64 {
        self.transitions
    }

    /// Replaces the states, keeping the random streams running.
    pub fn set_states(&mut self, states: Vec<f64>) {
        assert_eq!(states.len(), self.states.len());
        self.states = states;
    }

    /// Splits into states and rng streams.
    pub fn into_parts(self) -> (Vec<f64>, Vec<ChainRng>) {
        (self.states, self.rngs)
    }

    pub fn rngs_mut(&mut self) -> &mut [ChainRng] {
        &mut self.rngs
    }

    /// Fraction of transitions accepted, pooled over chains. Unadjusted kernels count every move.
    pub fn acceptance_rate(&self) -> f64 {
        if self.transitions == 0 || self.rngs.is_empty() {
            return f64::NAN;
        }
        self.accept_counts.iter().sum::<u64>() as f64 / (self.transitions as f64 * self.rngs.len() as f64)
    }

    pub fn reset_counters(&mut self) {
        self.accept_counts.iter_mut().for_each(|c| *c = 0);
        self.transitions = 0;
    }

    /// Recomputes every chain's clamped stepsize from the gradient at its current state.
    pub fn refresh_stepsizes<M: EnergyModel + ?Sized>(&mut self, model: &M, cfg: &SamplerConfig) -> Result<(), SamplerError> {
        let dim = self.dim;
        let step = self.transitions as usize;
        let results: Vec<Result<(), usize>> = self
            .states
            .par_chunks(dim)
            .zip(self.stepsizes.par_chunks_mut(dim))
            .enumerate()
            .map(|(m, (z, gamma))| {
                let mut g = vec![0.0; dim];
                model.value_and_grad_x(z, &mut g);
                fill_stepsize(&g, cfg.th, cfg.norm, gamma).map_err(|_| m)
            })
            .collect();
        first_divergence(results, step)
    }
}

fn first_divergence(results: Vec<Result<(), usize>>, step: usize) -> Result<(), SamplerError> {
    match results.into_iter().find_map(Result::err) {
        Some(chain) => Err(SamplerError::Divergence { chain, step }),
        None => Ok(()),
    }
}

/// Applies `steps` transitions of the configured kernel to every chain.
///
/// Kernels that read the clamped stepsize recompute it before the first
/// transition, and before every transition under
/// [`StepsizeRefresh::PerStep`]. Divergence reports the first failing chain
/// (by index) and the global transition count at which it failed; the
/// ensemble is left at the pre-failure step for the other chains.
pub fn run_chain<M: EnergyModel + ?Sized>(
    model: &M,
    ens: &mut ChainEnsemble,
    cfg: &SamplerConfig,
    steps: usize,
) -> Result<(), SamplerError> {
    run_chain_observed(model, ens, cfg, steps, |_, _| {})
}

/// As [`run_chain`], calling `observe(step, ensemble)` after each transition.
pub fn run_chain_observed<M, F>(
    model: &M,
    ens: &mut ChainEnsemble,
    cfg: &SamplerConfig,
    steps: usize,
    mut observe: F,
) -> Result<(), SamplerError>
where
    M: EnergyModel + ?Sized,
    F: FnMut(usize, &ChainEnsemble),
{
    cfg.validate()?;
    if ens.dim != model.dim() {
        return Err(SamplerError::DimensionMismatch {
            expected: model.dim(),
            actual: ens.dim,
        });
    }
    let clamped = cfg.uses_clamped_stepsize();
    let dim = ens.dim;
    for s in 0..steps {
        let refresh = clamped && (s == 0 || cfg.refresh == StepsizeRefresh::PerStep);
        let global_step = ens.transitions as usize;
        let results: Vec<Result<(), usize>> = ens
            .states
            .par_chunks_mut(dim)
            .zip(ens.stepsizes.par_chunks_mut(dim))
            .zip(ens.rngs.par_iter_mut())
            .zip(ens.accept_counts.par_iter_mut())
            .enumerate()
            .map(|(m, (((z, gamma), rng), accepted))| {
                match kernels::transition(model, cfg, z, gamma, refresh, rng) {
                    Ok(true) => {
                        *accepted += 1;
                        Ok(())
                    }
                    Ok(false) => Ok(()),
                    Err(_) => Err(m),
                }
            })
            .collect();
        first_divergence(results, global_step)?;
        ens.transitions += 1;
        observe(s + 1, ens);
    }
    Ok(())
}
