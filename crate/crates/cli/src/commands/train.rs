use std::path::{Path, PathBuf};

use rand::Rng;

use aniso_ebm::data::{render_sample_grid, Bounds, Dataset};
use aniso_ebm::diagnostics::{hist_kl, mmd};
use aniso_ebm::energy::serialize::encode;
use aniso_ebm::energy::{AnalyticEnergy, EnergyModel};
use aniso_ebm::rng::substream;
use aniso_ebm::samplers::SamplerConfig;
use aniso_ebm::trainer::{short_run_samples, train_ebm, Checkpoint, TrainError};

use super::{build_model, eval_target, family, grid_bounds, load_data, model_from_theta, read_checkpoint, say, Family};
use crate::artifacts::{cell, ensure_dir, points_csv, write_atomic, write_manifest};
use crate::config::{EvalConfig, RunConfig};
use crate::error::CliError;

pub const METRICS_HEADER: &str = "iter,grad_norm,accept_rate,hist_kl,mmd,neg_loss_proxy,wall_ms,minibatch_digest";

/// One metrics row, written at every checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointRow {
    pub iter: usize,
    pub grad_norm: f64,
    pub accept_rate: f64,
    pub hist_kl: Option<f64>,
    pub mmd: f64,
    /// `mean f(samples) − mean f(data)`, a negated log-likelihood proxy.
    pub neg_loss_proxy: f64,
    pub wall_ms: f64,
    pub minibatch_digest: u64,
}

impl CheckpointRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{:.6e},{:.6},{},{:.6e},{:.6e},{:.3},{:016x}",
            self.iter,
            self.grad_norm,
            self.accept_rate,
            cell(self.hist_kl),
            self.mmd,
            self.neg_loss_proxy,
            self.wall_ms,
            self.minibatch_digest
        )
    }
}

/// Everything a checkpoint evaluation needs besides the state itself.
struct Evaluator<'a> {
    dir: &'a Path,
    family: Family,
    sampler: SamplerConfig,
    eval: EvalConfig,
    init_std: f64,
    seed: u64,
    dim: usize,
    target: Option<(AnalyticEnergy, Vec<(f64, f64)>)>,
    grid: Option<Bounds>,
    reference: Vec<f64>,
}

impl Evaluator<'_> {
    fn evaluate(&self, ck: &Checkpoint<'_>) -> Result<CheckpointRow, CliError> {
        let iter = ck.metrics.iter;
        let tag = format!("{iter:06}");
        let theta = &ck.state.theta;
        let bytes = encode(theta).map_err(|e| CliError::config(format!("checkpoint encode: {e}")))?;
        write_atomic(&self.dir.join(format!("theta_{tag}.bin")), &bytes)?;
        let model = model_from_theta(self.family, theta.clone())?;
        let samples = short_run_samples(&*model, &self.sampler, self.eval.chains, self.init_std, self.eval.steps, self.seed.wrapping_add(iter as u64))
            .map_err(|e| match e {
                TrainError::Sampler(aniso_ebm::samplers::SamplerError::Divergence { chain, step }) => {
                    CliError::divergence(format!("evaluation chain {chain} diverged at transition {step} (checkpoint {iter})"))
                }
                other => CliError::from(other),
            })?;
        let hist = match &self.target {
            Some((target, bounds)) => Some(
                hist_kl(&samples, target, self.eval.bins, bounds)
                    .map_err(|e| CliError::config(format!("eval: {e}")))?
                    .kl,
            ),
            None => None,
        };
        let n = self.reference.len().min(samples.len()) / self.dim * self.dim;
        let mmd_value = mmd(&samples[..n], &self.reference, self.dim, self.eval.mmd_bandwidth).map_err(|e| CliError::config(format!("eval: {e}")))?;
        let mean_f = |pts: &[f64]| pts.chunks_exact(self.dim).map(|p| model.value(p)).sum::<f64>() / (pts.len() / self.dim) as f64;
        let neg_loss_proxy = mean_f(&samples) - mean_f(&self.reference);
        write_atomic(&self.dir.join(format!("samples_{tag}.csv")), points_csv(&samples, self.dim).as_bytes())?;
        if let Some(bounds) = self.grid {
            let (_, pgm) = render_sample_grid(&samples, bounds, self.eval.grid_resolution).map_err(|e| CliError::config(format!("grid: {e}")))?;
            write_atomic(&self.dir.join(format!("grid_{tag}.pgm")), &pgm)?;
        }
        Ok(CheckpointRow {
            iter,
            grad_norm: ck.metrics.grad_norm,
            accept_rate: ck.metrics.accept_rate,
            hist_kl: hist,
            mmd: mmd_value,
            neg_loss_proxy,
            wall_ms: ck.metrics.wall_ms,
            minibatch_digest: ck.metrics.minibatch_digest,
        })
    }
}

/// `mmd_points` data rows drawn with replacement from the `eval` substream.
fn reference_rows(data: &Dataset, points: usize, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, "eval");
    (0..points).flat_map(|_| data.row(rng.random_range(0..data.len())).to_vec()).collect()
}

/// Trains into `dir`, appending a row per checkpoint to `rows`. Rows
/// written before a failure are kept on disk and in `rows`.
pub fn train_into(cfg: &RunConfig, dir: &Path, quiet: bool, label: &str, rows: &mut Vec<CheckpointRow>) -> Result<(), CliError> {
    let data = load_data(cfg)?;
    ensure_dir(dir)?;
    let mut inputs: Vec<(&str, &Path)> = Vec::new();
    if let Some(p) = &cfg.data {
        inputs.push(("data", p.as_path()));
    }
    if let Some(p) = &cfg.resume {
        inputs.push(("resume", p.as_path()));
    }
    write_manifest(dir, "train", cfg, &inputs)?;
    let dim = data.dim();
    let mut model = build_model(cfg, dim)?;
    if let Some(path) = &cfg.resume {
        let theta = read_checkpoint(path, "train.resume")?;
        model
            .set_params(theta)
            .map_err(|e| CliError::config(format!("train.resume: `{}` does not fit the model: {e}", path.display())))?;
    }
    let evaluator = Evaluator {
        dir,
        family: family(cfg),
        sampler: cfg.sampler.clone(),
        eval: cfg.eval.clone(),
        init_std: cfg.train.init_std,
        seed: cfg.seed,
        dim,
        target: eval_target(cfg, dim),
        grid: (dim == 2).then(|| grid_bounds(cfg, &data)),
        reference: reference_rows(&data, cfg.eval.mmd_points, cfg.seed),
    };
    let metrics_path: PathBuf = dir.join("metrics.csv");
    let mut failure: Option<CliError> = None;
    let result = train_ebm(&mut model, &data, cfg.train.clone(), cfg.sampler.clone(), |ck| {
        let row = evaluator.evaluate(ck).map_err(|e| {
            let msg = e.msg.clone();
            failure = Some(e);
            msg
        })?;
        say(
            quiet,
            format!(
                "[{label}] iter {:>6}  grad_norm {:.3e}  accept {:.3}  hist_kl {}  mmd {:.3e}",
                row.iter,
                row.grad_norm,
                row.accept_rate,
                row.hist_kl.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
                row.mmd
            ),
        );
        rows.push(row);
        let mut text = String::from(METRICS_HEADER);
        text.push('\n');
        for r in rows.iter() {
            text.push_str(&r.csv());
            text.push('\n');
        }
        write_atomic(&metrics_path, text.as_bytes()).map_err(|e| {
            let msg = e.msg.clone();
            failure = Some(e);
            msg
        })
    });
    match result {
        Ok(_) => Ok(()),
        Err(TrainError::Hook { .. }) if failure.is_some() => Err(failure.expect("hook failure recorded")),
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_train(cfg: &RunConfig, quiet: bool) -> Result<(), CliError> {
    let mut rows = Vec::new();
    train_into(cfg, &cfg.out, quiet, cfg.sampler.kind.name(), &mut rows)?;
    say(quiet, format!("wrote {} checkpoints to {}", rows.len(), cfg.out.display()));
    Ok(())
}
