//! Energy models: unnormalized log-densities `f_θ(x)` with gradients in both
//! the sample `x` and the parameters `θ`.
//!
//! The model density is `p_θ(x) = exp(f_θ(x)) / Z(θ)`. Only
//! [`AnalyticEnergy`] knows `log Z`; neural models leave it implicit, which
//! is all the sampling and training code needs.

mod analytic;
mod neural;
pub mod serialize;

pub use analytic::{AnalyticEnergy, Shape};
pub(crate) use analytic::{check_simplex, pick_weighted};
pub use neural::{NeuralEnergy, DEFAULT_LEAK};

use thiserror::Error;

use crate::params::{ParamError, ParamVector};

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite input coordinate at index {index}")]
    NonFiniteInput { index: usize },
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// A differentiable unnormalized log-density.
///
/// Implementors provide the unchecked kernels (`value`, `value_and_grad_x`,
/// `accumulate_grad_theta`); the checked `eval`/`grad_x`/`grad_theta`
/// wrappers validate the input point first. All methods are pure in
/// `(θ, x)`, so one model may be shared by many chains at once.
pub trait EnergyModel: Send + Sync {
    /// Sample-space dimension.
    fn dim(&self) -> usize;

    fn params(&self) -> &ParamVector;

    fn set_params(&mut self, theta: ParamVector) -> Result<(), EnergyError>;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes `∇_x f_θ(x)` into `grad` and returns `f_θ(x)`.
    fn value_and_grad_x(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// `out += scale · ∇_θ f_θ(x)`.
    fn accumulate_grad_theta(&self, x: &[f64], scale: f64, out: &mut [f64]);

    fn check_point(&self, x: &[f64]) -> Result<(), EnergyError> {
        if x.len() != self.dim() {
            return Err(EnergyError::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        match x.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(EnergyError::NonFiniteInput { index }),
            None => Ok(()),
        }
    }

    fn eval(&self, x: &[f64]) -> Result<f64, EnergyError> {
        self.check_point(x)?;
        Ok(self.value(x))
    }

    fn grad_x(&self, x: &[f64]) -> Result<Vec<f64>, EnergyError> {
        self.check_point(x)?;
        let mut g = vec![0.0; self.dim()];
        self.value_and_grad_x(x, &mut g);
        Ok(g)
    }

    fn grad_theta(&self, x: &[f64]) -> Result<ParamVector, EnergyError> {
        self.check_point(x)?;
        let mut out = self.params().zeros_like();
        self.accumulate_grad_theta(x, 1.0, out.values_mut());
        Ok(out)
    }
}

impl<T: EnergyModel + ?Sized> EnergyModel for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn params(&self) -> &ParamVector {
        (**self).params()
    }
    fn set_params(&mut self, theta: ParamVector) -> Result<(), EnergyError> {
        (**self).set_params(theta)
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn value_and_grad_x(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        (**self).value_and_grad_x(x, grad)
    }
    fn accumulate_grad_theta(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        (**self).accumulate_grad_theta(x, scale, out)
    }
}
