//! `aniso`: train energy-based models with anisotropic Langevin chains,
//! sample from checkpoints, compare samplers and probe convergence.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod artifacts;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_override, parse_text, RunConfig, Setting};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "aniso", version, about = "Anisotropic Langevin sampling for energy-based models")]
struct Cli {
    /// Config file of `[section]` headers and `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed (`run.seed`).
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Output directory (`run.out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    /// Override any config key, e.g. `--set sampler.th=0.02`. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Run chains from a checkpoint and write trajectories.
    Sample(SampleArgs),
    /// Probe drift, minorization and convergence rate on an analytic target.
    Diagnose(DiagnoseArgs),
    /// Train one variant per sampler and tabulate the metrics.
    Compare(CompareArgs),
}

/// Pushes `(key, flag value)` pairs that were given.
fn push(out: &mut Vec<Setting>, pairs: &[(&str, &Option<String>)]) {
    for (key, value) in pairs {
        if let Some(v) = value {
            out.push(Setting {
                key: (*key).to_string(),
                value: v.clone(),
                origin: "command line".into(),
            });
        }
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    /// rings|gmm
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    n: Option<String>,
}

#[derive(Args, Debug, Default)]
struct SamplerArgs {
    /// stanley|ula|mala|rwmh|hmc|gd
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    th: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    /// outer|step
    #[arg(long)]
    refresh: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
}

impl SamplerArgs {
    fn settings(&self, out: &mut Vec<Setting>) {
        push(
            out,
            &[
                ("sampler.kind", &self.sampler),
                ("sampler.th", &self.th),
                ("sampler.eps", &self.eps),
                ("sampler.refresh", &self.refresh),
                ("sampler.gamma", &self.gamma),
            ],
        );
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// toy-rings|gauss-mean|custom
    #[arg(long)]
    recipe: Option<String>,
    /// Dataset file (`.csv` or `.bin`).
    #[arg(long)]
    data: Option<String>,
    /// sgd|adam
    #[arg(long)]
    optimizer: Option<String>,
    /// Outer iterations.
    #[arg(long = "T")]
    t: Option<String>,
    /// Negative chains.
    #[arg(long = "M")]
    m: Option<String>,
    /// Positive minibatch size.
    #[arg(long)]
    n: Option<String>,
    /// Learning rate, or a comma-separated schedule.
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    checkpoint_every: Option<String>,
    /// Parameter checkpoint to start from.
    #[arg(long)]
    resume: Option<String>,
    /// noise|persistent|data
    #[arg(long)]
    init_policy: Option<String>,
    /// Transitions per outer iteration.
    #[arg(long = "K")]
    k: Option<String>,
    #[command(flatten)]
    sampler: SamplerArgs,
}

impl TrainArgs {
    fn settings(&self, out: &mut Vec<Setting>) {
        push(
            out,
            &[
                ("run.recipe", &self.recipe),
                ("run.data", &self.data),
                ("train.optimizer", &self.optimizer),
                ("train.t", &self.t),
                ("train.m", &self.m),
                ("train.n", &self.n),
                ("train.eta", &self.eta),
                ("train.checkpoint_every", &self.checkpoint_every),
                ("train.resume", &self.resume),
                ("train.init_policy", &self.init_policy),
                ("sampler.k", &self.k),
            ],
        );
        self.sampler.settings(out);
    }
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Recipe whose model family the checkpoint belongs to.
    #[arg(long)]
    recipe: Option<String>,
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    chains: Option<String>,
    /// Transitions to record; 0 writes only the initial states.
    #[arg(long = "K")]
    k: Option<String>,
    #[arg(long)]
    init_std: Option<String>,
    #[command(flatten)]
    sampler: SamplerArgs,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    /// gauss|gmm|rings
    #[arg(long)]
    target: Option<String>,
    /// identity|stanley|ula|mala|rwmh|hmc|gd
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// Outer radius of the drift grid.
    #[arg(long)]
    grid_radius: Option<String>,
    #[arg(long)]
    mc_samples: Option<String>,
    #[arg(long)]
    k_max: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    th: Option<String>,
    #[arg(long)]
    eps: Option<String>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Comma-separated samplers.
    #[arg(long)]
    variants: Option<String>,
    #[command(flatten)]
    train: TrainArgs,
}

impl Cli {
    fn settings(&self) -> Result<Vec<Setting>, CliError> {
        let mut out = Vec::new();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("--config: cannot read `{}`: {e}", path.display())))?;
            out.extend(parse_text(&text, &path.display().to_string())?);
        }
        let out_dir = self.out.as_ref().map(|p| p.display().to_string());
        push(&mut out, &[("run.seed", &self.seed), ("run.out", &out_dir)]);
        match &self.command {
            Command::Gen(a) => push(&mut out, &[("data.kind", &a.kind), ("data.n", &a.n)]),
            Command::Train(a) => a.settings(&mut out),
            Command::Sample(a) => {
                push(
                    &mut out,
                    &[
                        ("run.recipe", &a.recipe),
                        ("sample.checkpoint", &a.checkpoint),
                        ("sample.chains", &a.chains),
                        ("sample.steps", &a.k),
                        ("sample.init_std", &a.init_std),
                    ],
                );
                a.sampler.settings(&mut out);
            }
            Command::Diagnose(a) => push(
                &mut out,
                &[
                    ("diagnose.target", &a.target),
                    ("diagnose.kernel", &a.sampler),
                    ("diagnose.beta", &a.beta),
                    ("diagnose.grid_hi", &a.grid_radius),
                    ("diagnose.mc_samples", &a.mc_samples),
                    ("diagnose.k_max", &a.k_max),
                    ("diagnose.gamma", &a.gamma),
                    ("sampler.th", &a.th),
                    ("sampler.eps", &a.eps),
                ],
            ),
            Command::Compare(a) => {
                a.train.settings(&mut out);
                push(&mut out, &[("compare.variants", &a.variants)]);
            }
        }
        for s in &self.set {
            out.push(parse_override(s)?);
        }
        Ok(out)
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&cli.settings()?)?;
    let quiet = cli.quiet;
    match &cli.command {
        Command::Gen(_) => commands::cmd_gen(&cfg, quiet),
        Command::Train(_) => commands::cmd_train(&cfg, quiet),
        Command::Sample(_) => commands::cmd_sample(&cfg, quiet),
        Command::Diagnose(_) => commands::cmd_diagnose(&cfg, quiet),
        Command::Compare(_) => commands::cmd_compare(&cfg, quiet),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            eprintln!("{}", CliError::config(e.kind().to_string()).status_line());
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.status_line());
            ExitCode::from(e.code())
        }
    }
}
