//! Named bundles of data, model and hyperparameters.

use std::str::FromStr;

use super::{InitPolicy, LearningRate, Optimizer, TrainConfig};
use crate::data::{gmm_sampler, rings_generator, DataError, Dataset, DEFAULT_RING_RADII, DEFAULT_RING_WIDTH};
use crate::energy::{AnalyticEnergy, EnergyError, EnergyModel, NeuralEnergy, DEFAULT_LEAK};
use crate::rng::substream;
use crate::samplers::{SamplerConfig, SamplerKind};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    Rings { n: usize, radii: Vec<f64>, width: f64 },
    Gaussian { n: usize, mean: Vec<f64>, sigma: f64 },
}

impl DataSpec {
    pub fn generate(&self, seed: u64) -> Result<Dataset, DataError> {
        match self {
            Self::Rings { n, radii, width } => rings_generator(*n, radii, *width, seed),
            Self::Gaussian { n, mean, sigma } => gmm_sampler(*n, std::slice::from_ref(mean), *sigma, &[1.0], seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// Fully-connected network with leaky-ReLU hidden layers.
    Neural { input: usize, hidden: Vec<usize>, leak: f64 },
    /// `f_θ(x) = −‖x − θ‖² / (2σ²)` started at `init`.
    GaussMean { init: Vec<f64>, sigma: f64 },
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Neural { input, .. } => *input,
            Self::GaussMean { init, .. } => init.len(),
        }
    }

    /// Fresh model; network weights are drawn from the `model` substream of `seed`.
    pub fn build(&self, seed: u64) -> Result<Box<dyn EnergyModel>, EnergyError> {
        Ok(match self {
            Self::Neural { input, hidden, leak } => {
                let mut rng = substream(seed, "model");
                Box::new(NeuralEnergy::random(*input, hidden, *leak, &mut rng)?)
            }
            Self::GaussMean { init, sigma } => Box::new(AnalyticEnergy::gaussian(init.clone(), *sigma)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecipeName {
    ToyRings,
    GaussMean,
}

impl FromStr for RecipeName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "toy-rings" => Ok(Self::ToyRings),
            "gauss-mean" => Ok(Self::GaussMean),
            other => Err(format!("unknown recipe `{other}` (expected toy-rings|gauss-mean)")),
        }
    }
}

impl RecipeName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ToyRings => "toy-rings",
            Self::GaussMean => "gauss-mean",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    pub name: RecipeName,
    pub data: DataSpec,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub sampler: SamplerConfig,
}

impl Recipe {
    pub fn get(name: RecipeName) -> Self {
        match name {
            RecipeName::ToyRings => toy_rings(),
            RecipeName::GaussMean => gauss_mean(),
        }
    }
}

/// Number of points in the toy rings dataset.
pub const TOY_RINGS_POINTS: usize = 10_000;

/// Noise scale of the toy rings sampler.
pub const TOY_RINGS_EPS: f64 = 1.0;

/// Three rings in the plane, learned by a two-hidden-layer network with
/// persistent anisotropic Langevin chains: `K = 100`, `th = 0.01`,
/// `σ₀ = 0.15`, `η = 1e-4`, `T = 10000`.
pub fn toy_rings() -> Recipe {
    Recipe {
        name: RecipeName::ToyRings,
        data: DataSpec::Rings {
            n: TOY_RINGS_POINTS,
            radii: DEFAULT_RING_RADII.to_vec(),
            width: DEFAULT_RING_WIDTH,
        },
        model: ModelSpec::Neural {
            input: 2,
            hidden: vec![32, 32],
            leak: DEFAULT_LEAK,
        },
        train: TrainConfig {
            t: 10_000,
            m: 64,
            n: 64,
            eta: LearningRate::Constant(1e-4),
            optimizer: Optimizer::Adam,
            init_policy: InitPolicy::Persistent,
            init_std: 0.15,
            checkpoint_every: 2000,
            ..TrainConfig::default()
        },
        sampler: SamplerConfig {
            k: 100,
            th: 0.01,
            eps: TOY_RINGS_EPS,
            gamma: 0.14,
            ..SamplerConfig::new(SamplerKind::Stanley)
        },
    }
}

/// One-dimensional Gaussian mean estimation from `N(5, 1)` data with exact
/// MALA negatives.
pub fn gauss_mean() -> Recipe {
    Recipe {
        name: RecipeName::GaussMean,
        data: DataSpec::Gaussian {
            n: 10_000,
            mean: vec![5.0],
            sigma: 1.0,
        },
        model: ModelSpec::GaussMean {
            init: vec![0.0],
            sigma: 1.0,
        },
        train: TrainConfig {
            t: 2000,
            m: 64,
            n: 64,
            eta: LearningRate::Constant(0.01),
            optimizer: Optimizer::Sgd,
            init_policy: InitPolicy::Persistent,
            init_std: 1.0,
            checkpoint_every: 500,
            ..TrainConfig::default()
        },
        sampler: SamplerConfig {
            k: 20,
            gamma: 0.5,
            eps: 1.0,
            ..SamplerConfig::new(SamplerKind::Mala)
        },
    }
}

/// Evaluation box of the toy rings recipe.
pub const RINGS_EVAL_BOUNDS: [(f64, f64); 2] = [(-2.0, 2.0), (-2.0, 2.0)];
/// Histogram bins per axis for the rings hist-KL.
pub const RINGS_EVAL_BINS: usize = 40;
/// Fresh chains drawn to score a rings checkpoint.
pub const RINGS_EVAL_CHAINS: usize = 2000;

/// The closed-form rings density the toy data is drawn around.
pub fn rings_target() -> AnalyticEnergy {
    AnalyticEnergy::rings(2, DEFAULT_RING_RADII.to_vec(), DEFAULT_RING_WIDTH).expect("valid default rings")
}
