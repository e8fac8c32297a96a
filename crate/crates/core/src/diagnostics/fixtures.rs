//! Reference kernels with known transition laws.

use rand::Rng;

use crate::energy::AnalyticEnergy;
use crate::rng::ChainRng;
use crate::samplers::{Kernel, SamplerError};

/// `Π(z, ·) = δ_z`.
pub struct IdentityKernel {
    pub dim: usize,
}

impl Kernel for IdentityKernel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn step(&self, z: &[f64], _rng: &mut ChainRng) -> Result<Vec<f64>, SamplerError> {
        Ok(z.to_vec())
    }
}

/// `Π(z, ·) = δ_p` for a fixed point `p`, typically the mode.
pub struct JumpKernel {
    pub point: Vec<f64>,
}

impl Kernel for JumpKernel {
    fn dim(&self) -> usize {
        self.point.len()
    }

    fn step(&self, _z: &[f64], _rng: &mut ChainRng) -> Result<Vec<f64>, SamplerError> {
        Ok(self.point.clone())
    }
}

/// Independent uniform draws on the box `lo[i] ≤ z_i ≤ hi[i]`.
pub struct UniformBoxKernel {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl UniformBoxKernel {
    pub fn cube(dim: usize, half: f64) -> Self {
        Self {
            lo: vec![-half; dim],
            hi: vec![half; dim],
        }
    }
}

impl Kernel for UniformBoxKernel {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn step(&self, _z: &[f64], rng: &mut ChainRng) -> Result<Vec<f64>, SamplerError> {
        Ok(self.lo.iter().zip(&self.hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect())
    }
}

/// Independent exact draws from a Gaussian or mixture target.
pub struct IidTargetKernel<'a> {
    pub target: &'a AnalyticEnergy,
}

impl Kernel for IidTargetKernel<'_> {
    fn dim(&self) -> usize {
        use crate::energy::EnergyModel;
        self.target.dim()
    }

    fn step(&self, _z: &[f64], rng: &mut ChainRng) -> Result<Vec<f64>, SamplerError> {
        self.target.sample(rng).map_err(SamplerError::from)
    }
}
