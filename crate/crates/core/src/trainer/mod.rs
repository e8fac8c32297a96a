//! Maximum-likelihood training of energy models with short-run negative
//! chains: stepsize, `K` chain transitions, minibatch, gradient, update.

pub mod recipes;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::data::Dataset;
use crate::energy::{EnergyError, EnergyModel};
use crate::params::{ParamError, ParamVector};
use crate::rng::{fnv1a_extend, substream, ChainRng, FNV_OFFSET};
use crate::samplers::{run_chain, ChainEnsemble, SamplerConfig, SamplerError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("empty {0} batch")]
    EmptyBatch(&'static str),
    #[error("training diverged at iteration {iter}: {reason}; last good checkpoint: {}", last_checkpoint.map_or("none".to_string(), |c| format!("iteration {c}")))]
    Divergence {
        iter: usize,
        reason: String,
        last_checkpoint: Option<usize>,
    },
    #[error("checkpoint hook failed at iteration {iter}: {msg}")]
    Hook { iter: usize, msg: String },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Sampler(SamplerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    Adam,
}

impl FromStr for Optimizer {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            other => Err(format!("unknown optimizer `{other}` (expected sgd|adam)")),
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sgd => "sgd",
            Self::Adam => "adam",
        })
    }
}

/// Where each outer iteration's chains start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitPolicy {
    /// Fresh `N(0, σ₀² I)` states.
    Noise,
    /// The previous iteration's final states.
    Persistent,
    /// Rows drawn uniformly (with replacement) from the data.
    Data,
}

impl FromStr for InitPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "noise" => Ok(Self::Noise),
            "persistent" => Ok(Self::Persistent),
            "data" => Ok(Self::Data),
            other => Err(format!("unknown init policy `{other}` (expected noise|persistent|data)")),
        }
    }
}

impl fmt::Display for InitPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Noise => "noise",
            Self::Persistent => "persistent",
            Self::Data => "data",
        })
    }
}

/// Learning rate `η_t` for iteration `t` (1-based).
#[derive(Debug, Clone, PartialEq)]
pub enum LearningRate {
    Constant(f64),
    /// Entry `t − 1`; the last entry holds once the list is exhausted.
    List(Vec<f64>),
}

impl LearningRate {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            Self::Constant(eta) => *eta,
            Self::List(v) => v[(t.max(1) - 1).min(v.len() - 1)],
        }
    }

    fn validate(&self) -> Result<(), TrainError> {
        let ok = |e: f64| e > 0.0 && e.is_finite();
        match self {
            Self::Constant(e) if ok(*e) => Ok(()),
            Self::List(v) if !v.is_empty() && v.iter().all(|e| ok(*e)) => Ok(()),
            _ => Err(TrainError::InvalidConfig("learning rates must be positive".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Outer iterations.
    pub t: usize,
    /// Negative chains.
    pub m: usize,
    /// Positive minibatch size.
    pub n: usize,
    pub eta: LearningRate,
    pub optimizer: Optimizer,
    pub adam: AdamParams,
    pub init_policy: InitPolicy,
    /// `σ₀` of noise initialization.
    pub init_std: f64,
    pub seed: u64,
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            t: 10_000,
            m: 64,
            n: 64,
            eta: LearningRate::Constant(1e-4),
            optimizer: Optimizer::Sgd,
            adam: AdamParams::default(),
            init_policy: InitPolicy::Persistent,
            init_std: 0.15,
            seed: 0,
            checkpoint_every: 2000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.m == 0 || self.n == 0 {
            return Err(TrainError::InvalidConfig("M and n must be at least 1".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(TrainError::InvalidConfig("checkpoint_every must be at least 1".into()));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return Err(TrainError::InvalidConfig("init_std must be nonnegative".into()));
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return Err(TrainError::InvalidConfig("adam needs beta1, beta2 in [0, 1) and eps > 0".into()));
        }
        self.eta.validate()
    }
}

/// First and second moment estimates; `step` counts applied updates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ParamVector,
    pub v: ParamVector,
    pub step: u64,
}

impl AdamState {
    pub fn new(like: &ParamVector) -> Self {
        Self {
            m: like.zeros_like(),
            v: like.zeros_like(),
            step: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub theta: ParamVector,
    pub ensemble: ChainEnsemble,
    /// Completed outer iterations.
    pub iter: usize,
    pub adam: AdamState,
}

/// Per-iteration summary passed to checkpoint hooks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterMetrics {
    pub iter: usize,
    /// `‖∇L‖`; zero before the first update.
    pub grad_norm: f64,
    /// Acceptance over this iteration's transitions; zero before the first.
    pub accept_rate: f64,
    /// Wall time per outer iteration; at checkpoints, averaged since the previous one.
    pub wall_ms: f64,
    /// Running FNV-1a digest of every positive minibatch drawn so far.
    pub minibatch_digest: u64,
}

pub struct Checkpoint<'a> {
    pub state: &'a TrainState,
    pub metrics: IterMetrics,
}

/// `(1/n) Σ ∇_θ f(x_i) − (1/M) Σ ∇_θ f(z_m)` over row-major point sets.
pub fn grad_estimator<M: EnergyModel + ?Sized>(model: &M, positives: &[f64], negatives: &[f64]) -> Result<ParamVector, TrainError> {
    let dim = model.dim();
    if positives.is_empty() {
        return Err(TrainError::EmptyBatch("positive"));
    }
    if negatives.is_empty() {
        return Err(TrainError::EmptyBatch("negative"));
    }
    for (name, set) in [("positive", positives), ("negative", negatives)] {
        if set.len() % dim != 0 {
            return Err(TrainError::InvalidConfig(format!("{name} rows do not match dimension {dim}")));
        }
    }
    let mut out = model.params().zeros_like();
    let len = out.len();
    let pos = batch_mean_grad(model, positives, len);
    let neg = batch_mean_grad(model, negatives, len);
    for ((o, p), n) in out.values_mut().iter_mut().zip(&pos).zip(&neg) {
        *o = p - n;
    }
    if let Some(i) = out.values().iter().position(|v| !v.is_finite()) {
        return Err(TrainError::Divergence {
            iter: 0,
            reason: format!("non-finite gradient component {i}"),
            last_checkpoint: None,
        });
    }
    Ok(out)
}

/// Rows per partial sum. Fixed chunking keeps the summation order, and so
/// the result bits, independent of the thread count.
const GRAD_CHUNK: usize = 16;

fn batch_mean_grad<M: EnergyModel + ?Sized>(model: &M, rows: &[f64], len: usize) -> Vec<f64> {
    let dim = model.dim();
    let count = rows.len() / dim;
    let scale = 1.0 / count as f64;
    let partials: Vec<Vec<f64>> = rows
        .par_chunks(GRAD_CHUNK * dim)
        .map(|chunk| {
            let mut acc = vec![0.0; len];
            for x in chunk.chunks_exact(dim) {
                model.accumulate_grad_theta(x, scale, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; len];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// `θ + η · grad`.
pub fn sgd_update(theta: &ParamVector, grad: &ParamVector, eta: f64) -> Result<ParamVector, TrainError> {
    check_layout(theta, grad)?;
    let values = theta.values().iter().zip(grad.values()).map(|(t, g)| t + eta * g).collect();
    Ok(theta.with_values(values)?)
}

/// One bias-corrected Adam ascent step.
pub fn adam_update(theta: &ParamVector, adam: &mut AdamState, grad: &ParamVector, eta: f64, p: &AdamParams) -> Result<ParamVector, TrainError> {
    check_layout(theta, grad)?;
    check_layout(theta, &adam.m)?;
    adam.step += 1;
    let t = adam.step as i32;
    let c1 = 1.0 - p.beta1.powi(t);
    let c2 = 1.0 - p.beta2.powi(t);
    let mut values = theta.values().to_vec();
    let (m, v) = (adam.m.values_mut(), adam.v.values_mut());
    for i in 0..values.len() {
        let g = grad.values()[i];
        m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * g;
        v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * g * g;
        values[i] += eta * (m[i] / c1) / ((v[i] / c2).sqrt() + p.eps);
    }
    Ok(theta.with_values(values)?)
}

fn check_layout(a: &ParamVector, b: &ParamVector) -> Result<(), TrainError> {
    if a.layout() != b.layout() {
        return Err(TrainError::Param(ParamError::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        }));
    }
    Ok(())
}

/// Starting states for the next round of chains: returns `M × dim` values.
pub fn init_negatives(
    policy: InitPolicy,
    prior: Option<&ChainEnsemble>,
    data: Option<&Dataset>,
    m: usize,
    dim: usize,
    init_std: f64,
    rng: &mut ChainRng,
) -> Result<Vec<f64>, TrainError> {
    match policy {
        InitPolicy::Noise => Ok((0..m * dim)
            .map(|_| {
                let xi: f64 = rng.sample(StandardNormal);
                if init_std == 0.0 {
                    0.0
                } else {
                    init_std * xi
                }
            })
            .collect()),
        InitPolicy::Persistent => match prior {
            Some(ens) if ens.n_chains() == m && ens.dim() == dim => Ok(ens.states().to_vec()),
            Some(_) => Err(TrainError::InvalidConfig("prior ensemble does not match M × dim".into())),
            None => Err(TrainError::InvalidConfig("persistent init needs a prior ensemble".into())),
        },
        InitPolicy::Data => {
            let data = data.filter(|d| !d.is_empty()).ok_or(TrainError::EmptyBatch("data init"))?;
            if data.dim() != dim {
                return Err(TrainError::InvalidConfig("data rows do not match the model dimension".into()));
            }
            let mut out = Vec::with_capacity(m * dim);
            for _ in 0..m {
                out.extend_from_slice(data.row(rng.random_range(0..data.len())));
            }
            Ok(out)
        }
    }
}

/// Runs outer iterations one at a time.
pub struct Trainer<'a, M: EnergyModel> {
    pub model: &'a mut M,
    data: &'a Dataset,
    pub tcfg: TrainConfig,
    pub scfg: SamplerConfig,
    state: TrainState,
    init_rng: ChainRng,
    batch_rng: ChainRng,
    minibatch_digest: u64,
    last_checkpoint: Option<usize>,
}

impl<'a, M: EnergyModel> Trainer<'a, M> {
    pub fn new(model: &'a mut M, data: &'a Dataset, tcfg: TrainConfig, scfg: SamplerConfig) -> Result<Self, TrainError> {
        tcfg.validate()?;
        scfg.validate().map_err(TrainError::Sampler)?;
        if data.is_empty() {
            return Err(TrainError::EmptyBatch("data"));
        }
        let dim = model.dim();
        if data.dim() != dim {
            return Err(TrainError::InvalidConfig(format!("data rows have width {}, model expects {dim}", data.dim())));
        }
        let mut init_rng = substream(tcfg.seed, "init");
        let initial_policy = match tcfg.init_policy {
            InitPolicy::Persistent => InitPolicy::Noise,
            p => p,
        };
        let states = init_negatives(initial_policy, None, Some(data), tcfg.m, dim, tcfg.init_std, &mut init_rng)?;
        let theta = model.params().clone();
        let state = TrainState {
            adam: AdamState::new(&theta),
            theta,
            ensemble: ChainEnsemble::new(dim, states, tcfg.seed),
            iter: 0,
        };
        Ok(Self {
            model,
            data,
            batch_rng: substream(tcfg.seed, "minibatch"),
            init_rng,
            tcfg,
            scfg,
            state,
            minibatch_digest: FNV_OFFSET,
            last_checkpoint: None,
        })
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    fn diverged(&self, reason: String) -> TrainError {
        TrainError::Divergence {
            iter: self.state.iter + 1,
            reason,
            last_checkpoint: self.last_checkpoint,
        }
    }

    /// One outer iteration.
    pub fn step(&mut self) -> Result<IterMetrics, TrainError> {
        let started = Instant::now();
        let t = self.state.iter + 1;
        let dim = self.model.dim();
        if self.state.iter > 0 && self.tcfg.init_policy != InitPolicy::Persistent {
            let states = init_negatives(
                self.tcfg.init_policy,
                Some(&self.state.ensemble),
                Some(self.data),
                self.tcfg.m,
                dim,
                self.tcfg.init_std,
                &mut self.init_rng,
            )?;
            self.state.ensemble.set_states(states);
        }
        self.state.ensemble.reset_counters();
        run_chain(&*self.model, &mut self.state.ensemble, &self.scfg, self.scfg.k).map_err(|e| match e {
            SamplerError::Divergence { chain, step } => self.diverged(format!("chain {chain} at transition {step}")),
            other => TrainError::Sampler(other),
        })?;
        let mut positives = Vec::with_capacity(self.tcfg.n * dim);
        for _ in 0..self.tcfg.n {
            positives.extend_from_slice(self.data.row(self.batch_rng.random_range(0..self.data.len())));
        }
        for v in &positives {
            self.minibatch_digest = fnv1a_extend(self.minibatch_digest, &v.to_le_bytes());
        }
        let grad = grad_estimator(&*self.model, &positives, self.state.ensemble.states()).map_err(|e| match e {
            TrainError::Divergence { reason, .. } => self.diverged(reason),
            other => other,
        })?;
        let eta = self.tcfg.eta.at(t);
        let theta = match self.tcfg.optimizer {
            Optimizer::Sgd => sgd_update(&self.state.theta, &grad, eta)?,
            Optimizer::Adam => adam_update(&self.state.theta, &mut self.state.adam, &grad, eta, &self.tcfg.adam)?,
        };
        if !theta.is_finite() {
            return Err(self.diverged("non-finite parameters".into()));
        }
        self.model.set_params(theta.clone())?;
        self.state.theta = theta;
        self.state.iter = t;
        Ok(IterMetrics {
            iter: t,
            grad_norm: grad.norm(),
            accept_rate: self.state.ensemble.acceptance_rate(),
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            minibatch_digest: self.minibatch_digest,
        })
    }

    pub fn mark_checkpoint(&mut self) {
        self.last_checkpoint = Some(self.state.iter);
    }
}

/// Runs `tcfg.t` outer iterations. `hook` sees the state before the first
/// iteration and after every `checkpoint_every`-th one.
pub fn train_ebm<M, H>(model: &mut M, data: &Dataset, tcfg: TrainConfig, scfg: SamplerConfig, mut hook: H) -> Result<TrainState, TrainError>
where
    M: EnergyModel,
    H: FnMut(&Checkpoint<'_>) -> Result<(), String>,
{
    let total = tcfg.t;
    let every = tcfg.checkpoint_every;
    let mut trainer = Trainer::new(model, data, tcfg, scfg)?;
    let call = |trainer: &mut Trainer<'_, M>, hook: &mut H, metrics: IterMetrics| -> Result<(), TrainError> {
        hook(&Checkpoint {
            state: trainer.state(),
            metrics,
        })
        .map_err(|msg| TrainError::Hook { iter: metrics.iter, msg })?;
        trainer.mark_checkpoint();
        Ok(())
    };
    let initial = IterMetrics {
        iter: 0,
        grad_norm: 0.0,
        accept_rate: 0.0,
        wall_ms: 0.0,
        minibatch_digest: FNV_OFFSET,
    };
    call(&mut trainer, &mut hook, initial)?;
    let mut elapsed = 0.0;
    for t in 1..=total {
        let mut metrics = trainer.step()?;
        elapsed += metrics.wall_ms;
        if t % every == 0 {
            metrics.wall_ms = elapsed / every as f64;
            elapsed = 0.0;
            call(&mut trainer, &mut hook, metrics)?;
        }
    }
    Ok(trainer.into_state())
}

/// `n_chains` fresh chains started from `N(0, init_std² I)` and advanced
/// `steps` transitions under `scfg`; returns the final states row-major.
pub fn short_run_samples<M: EnergyModel + ?Sized>(
    model: &M,
    scfg: &SamplerConfig,
    n_chains: usize,
    init_std: f64,
    steps: usize,
    seed: u64,
) -> Result<Vec<f64>, TrainError> {
    if n_chains == 0 {
        return Err(TrainError::InvalidConfig("need at least one chain".into()));
    }
    let dim = model.dim();
    let mut rng = substream(seed, "short-run-init");
    let states = init_negatives(InitPolicy::Noise, None, None, n_chains, dim, init_std, &mut rng)?;
    let mut ens = ChainEnsemble::new(dim, states, seed ^ 0x05ee_d5a3_b1e5_u64);
    run_chain(model, &mut ens, scfg, steps).map_err(TrainError::Sampler)?;
    Ok(ens.into_parts().0)
}
