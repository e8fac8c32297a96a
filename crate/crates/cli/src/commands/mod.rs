//! Subcommand implementations and the setup they share.

mod compare;
mod diagnose;
mod gen;
mod sample;
mod train;

pub use compare::cmd_compare;
pub use diagnose::cmd_diagnose;
pub use gen::cmd_gen;
pub use sample::cmd_sample;
pub use train::cmd_train;

use std::path::Path;

use aniso_ebm::data::{gmm_sampler, read_dataset, rings_generator, Bounds, Dataset, DEFAULT_RING_RADII, DEFAULT_RING_WIDTH};
use aniso_ebm::energy::serialize::read_params;
use aniso_ebm::energy::{AnalyticEnergy, EnergyModel, NeuralEnergy};
use aniso_ebm::params::ParamVector;
use aniso_ebm::trainer::recipes::{rings_target, DataSpec, ModelSpec, RecipeName, RINGS_EVAL_BOUNDS};

use crate::config::{DataKind, RecipeChoice, RunConfig};
use crate::error::CliError;

/// Component means of the `gmm` dataset and diagnose target.
pub const GMM_MEANS: [[f64; 2]; 4] = [[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]];
pub const GMM_SIGMA: f64 = 0.25;

/// Mean and scale of the `gauss-mean` data.
const GAUSS_MEAN_TRUTH: f64 = 5.0;
const GAUSS_MEAN_SIGMA: f64 = 1.0;

pub fn gmm_means() -> Vec<Vec<f64>> {
    GMM_MEANS.iter().map(|m| m.to_vec()).collect()
}

pub fn gmm_weights() -> Vec<f64> {
    vec![1.0 / GMM_MEANS.len() as f64; GMM_MEANS.len()]
}

pub fn gmm_target() -> AnalyticEnergy {
    AnalyticEnergy::mixture(gmm_means(), gmm_weights(), GMM_SIGMA).expect("valid mixture")
}

pub fn generate(kind: DataKind, n: usize, seed: u64) -> Result<Dataset, CliError> {
    let ds = match kind {
        DataKind::Rings => rings_generator(n, &DEFAULT_RING_RADII, DEFAULT_RING_WIDTH, seed),
        DataKind::Gmm => gmm_sampler(n, &gmm_means(), GMM_SIGMA, &gmm_weights(), seed),
    };
    ds.map_err(|e| CliError::config(format!("data generation failed: {e}")))
}

/// The dataset of a run: the `run.data` file if set, else the recipe generator.
pub fn load_data(cfg: &RunConfig) -> Result<Dataset, CliError> {
    if let Some(path) = &cfg.data {
        if !path.exists() {
            return Err(CliError::config(format!("run.data: no such file `{}`", path.display())));
        }
        return read_dataset(path).map_err(|e| CliError::config(format!("run.data: cannot read `{}`: {e}", path.display())));
    }
    let mut spec = cfg.recipe.base().data;
    match &mut spec {
        DataSpec::Rings { n, .. } | DataSpec::Gaussian { n, .. } => *n = cfg.data_n,
    }
    spec.generate(cfg.seed).map_err(|e| CliError::config(format!("data generation failed: {e}")))
}

/// Parametric family trained by a recipe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Neural { leak: f64 },
    GaussMean,
}

pub fn family(cfg: &RunConfig) -> Family {
    match cfg.recipe {
        RecipeChoice::Named(RecipeName::GaussMean) => Family::GaussMean,
        _ => Family::Neural { leak: cfg.leak },
    }
}

/// Fresh model for `dim`-dimensional data.
pub fn build_model(cfg: &RunConfig, dim: usize) -> Result<Box<dyn EnergyModel>, CliError> {
    let spec = match family(cfg) {
        Family::Neural { leak } => ModelSpec::Neural {
            input: dim,
            hidden: cfg.hidden.clone(),
            leak,
        },
        Family::GaussMean => ModelSpec::GaussMean {
            init: vec![0.0; dim],
            sigma: GAUSS_MEAN_SIGMA,
        },
    };
    spec.build(cfg.seed).map_err(|e| CliError::config(format!("model: {e}")))
}

/// Rebuilds a model of `family` from saved parameters.
pub fn model_from_theta(family: Family, theta: ParamVector) -> Result<Box<dyn EnergyModel>, CliError> {
    let model: Box<dyn EnergyModel> = match family {
        Family::Neural { leak } => Box::new(NeuralEnergy::from_params(theta, leak).map_err(|e| CliError::config(format!("checkpoint: {e}")))?),
        Family::GaussMean => Box::new(
            AnalyticEnergy::gaussian(theta.into_values(), GAUSS_MEAN_SIGMA).map_err(|e| CliError::config(format!("checkpoint: {e}")))?,
        ),
    };
    Ok(model)
}

/// Reads a parameter checkpoint; non-finite weights are a divergence.
pub fn read_checkpoint(path: &Path, key: &str) -> Result<ParamVector, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::config(format!("{key}: cannot open `{}`: {e}", path.display())))?;
    let theta = read_params(std::io::BufReader::new(file)).map_err(|e| CliError::config(format!("{key}: `{}`: {e}", path.display())))?;
    if !theta.is_finite() {
        return Err(CliError::divergence(format!("{key}: checkpoint `{}` holds non-finite weights", path.display())));
    }
    Ok(theta)
}

/// Closed-form target and histogram box used to score samples, when known.
pub fn eval_target(cfg: &RunConfig, dim: usize) -> Option<(AnalyticEnergy, Vec<(f64, f64)>)> {
    match cfg.recipe {
        RecipeChoice::Named(RecipeName::ToyRings) if dim == 2 => Some((rings_target(), RINGS_EVAL_BOUNDS.to_vec())),
        RecipeChoice::Named(RecipeName::GaussMean) if dim == 1 && cfg.data.is_none() => {
            let target = AnalyticEnergy::gaussian(vec![GAUSS_MEAN_TRUTH], GAUSS_MEAN_SIGMA).expect("valid gaussian");
            Some((target, vec![(GAUSS_MEAN_TRUTH - 4.0, GAUSS_MEAN_TRUTH + 4.0)]))
        }
        _ => None,
    }
}

/// Image box for sample grids: the rings box, or the data extent padded by 10%.
pub fn grid_bounds(cfg: &RunConfig, data: &Dataset) -> Bounds {
    if matches!(cfg.recipe, RecipeChoice::Named(RecipeName::ToyRings)) {
        return Bounds::square(RINGS_EVAL_BOUNDS[0].1);
    }
    let half = data.rows().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Bounds::square(if half > 0.0 { 1.1 * half } else { 1.0 })
}

/// Prints unless `--quiet`.
pub fn say(quiet: bool, line: impl AsRef<str>) {
    if !quiet {
        println!("{}", line.as_ref());
    }
}
