//! Anisotropic-stepsize Langevin sampling for training energy-based models.
//!
//! The crate is organized bottom-up:
//!
//! - [`energy`]: the [`EnergyModel`](energy::EnergyModel) contract, closed-form
//!   targets and a small fully-connected energy network.
//! - [`samplers`]: chain ensembles and the transition kernels.
//! - [`trainer`]: maximum-likelihood training with short-run negative chains.
//! - [`diagnostics`]: drift/minorization/rate probes and sample-quality metrics.
//! - [`data`]: synthetic datasets, dataset files and image export.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod params;
pub mod quadrature;
pub mod rng;
pub mod samplers;
pub mod trainer;
pub mod data;
pub mod diagnostics;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
