//! Synthetic datasets, dataset files and sample-grid images.

mod generators;
mod io;
mod pgm;

pub use generators::{gmm_sampler, rings_generator, DEFAULT_RING_RADII, DEFAULT_RING_WIDTH};
pub use io::{atomic_write, decode_binary, encode_binary, read_dataset, read_dataset_csv, write_dataset, write_dataset_csv, DATASET_MAGIC};
pub use pgm::{render_sample_grid, write_sample_grid, Bounds};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("parse error at byte {offset}: {msg}")]
    Parse { offset: usize, msg: String },
    #[error("non-finite value at row {row}, column {column} (byte {offset})")]
    NonFinite { row: usize, column: usize, offset: usize },
    #[error("truncated payload at byte {offset}: expected {expected} bytes")]
    Truncated { offset: usize, expected: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetMeta {
    pub name: String,
    /// Generator parameters as free text.
    pub params: String,
    pub seed: Option<u64>,
}

/// `n × dim` observations stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    rows: Vec<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(dim: usize, rows: Vec<f64>) -> Result<Self, DataError> {
        if dim == 0 {
            return Err(DataError::InvalidConfig("dataset dimension must be positive".into()));
        }
        if !rows.len().is_multiple_of(dim) {
            return Err(DataError::InvalidConfig(format!("{} values do not fill rows of width {dim}", rows.len())));
        }
        if let Some(i) = rows.iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite {
                row: i / dim,
                column: i % dim,
                offset: 0,
            });
        }
        Ok(Self {
            dim,
            rows,
            meta: DatasetMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: DatasetMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.rows.chunks_exact(self.dim)
    }
}
