use std::fmt::Write as _;
use std::path::Path;

use aniso_ebm::rng::substream;
use aniso_ebm::samplers::{run_chain_observed, ChainEnsemble, SamplerError};
use aniso_ebm::trainer::{init_negatives, InitPolicy};

use super::{family, model_from_theta, read_checkpoint, say};
use crate::artifacts::{ensure_dir, write_atomic, write_manifest};
use crate::config::RunConfig;
use crate::error::CliError;

pub const TRAJECTORY_HEADER: &str = "step,chain,coord,value";

fn push_states(out: &mut String, step: usize, states: &[f64], dim: usize) {
    for (m, z) in states.chunks_exact(dim).enumerate() {
        for (j, v) in z.iter().enumerate() {
            let _ = writeln!(out, "{step},{m},{j},{v:.9e}");
        }
    }
}

/// Loads `sample.checkpoint`, runs `sample.steps` transitions from fresh
/// noise and writes every state to `trajectory.csv`, step 0 being the start.
pub fn cmd_sample(cfg: &RunConfig, quiet: bool) -> Result<(), CliError> {
    let path = cfg
        .sample
        .checkpoint
        .as_deref()
        .ok_or_else(|| CliError::config("sample.checkpoint: no checkpoint given (use --checkpoint)"))?;
    let theta = read_checkpoint(path, "sample.checkpoint")?;
    let model = model_from_theta(family(cfg), theta)?;
    let dim = model.dim();
    ensure_dir(&cfg.out)?;
    write_manifest(&cfg.out, "sample", cfg, &[("checkpoint", path)])?;
    let mut rng = substream(cfg.seed, "sample-init");
    let states = init_negatives(InitPolicy::Noise, None, None, cfg.sample.chains, dim, cfg.sample.init_std, &mut rng)?;
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    push_states(&mut out, 0, &states, dim);
    let mut ens = ChainEnsemble::new(dim, states, cfg.seed);
    if cfg.sample.steps > 0 {
        run_chain_observed(&*model, &mut ens, &cfg.sampler, cfg.sample.steps, |step, e| push_states(&mut out, step, e.states(), dim)).map_err(
            |e| match e {
                SamplerError::Divergence { chain, step } => CliError::divergence(format!("chain {chain} diverged at transition {step}")),
                other => CliError::config(other.to_string()),
            },
        )?;
    }
    let target = cfg.out.join("trajectory.csv");
    write_atomic(&target, out.as_bytes())?;
    report(quiet, &target, cfg.sample.chains, cfg.sample.steps, ens.acceptance_rate());
    Ok(())
}

fn report(quiet: bool, path: &Path, chains: usize, steps: usize, accept: f64) {
    say(quiet, format!("wrote {chains} chains x {} states to {} (acceptance {accept:.3})", steps + 1, path.display()));
}
