//! Brownian batches, Euler–Maruyama paths and Monte Carlo estimators.

use crate::error::Result;
use crate::spectral::{Grid, SpectralField};

mod brownian;
mod estimate;
mod paths;
mod sweep;

pub use brownian::{BrownianBatch, IncrementStream};
pub use estimate::{pairwise_sum, Estimate};
pub use paths::{
    characteristics_value, girsanov_estimate, girsanov_value, integrate_sde, GirsanovEstimate,
    PathState, LOG_WEIGHT_LIMIT,
};
pub use sweep::characteristics_sweep;

/// Monte Carlo settings shared by the solvers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub dt: f64,
    /// Fields read along paths are sampled from their trigonometric
    /// interpolant on a grid this many times finer, which shrinks the
    /// multilinear interpolation bias by its square. The path-major
    /// estimators refine the terminal value only; [`characteristics_sweep`]
    /// refines every field, one slice at a time.
    pub refine: usize,
}

impl McConfig {
    pub fn new(seed: u64, n_paths: usize, dt: f64) -> Self {
        Self {
            seed,
            n_paths,
            dt,
            refine: 1,
        }
    }

    pub fn with_refine(mut self, factor: usize) -> Self {
        self.refine = factor.max(1);
        self
    }

    /// `field` resampled on the refined grid (a clone when the factor is 1).
    pub fn refined(&self, field: &SpectralField) -> Result<SpectralField> {
        refine_field(field, self.refine)
    }
}

pub(crate) fn refine_field(field: &SpectralField, factor: usize) -> Result<SpectralField> {
    if factor <= 1 {
        return Ok(field.clone());
    }
    let grid = field.grid();
    let shape: Vec<usize> = grid.shape().iter().map(|n| n * factor).collect();
    field.resample(&Grid::new(&shape, grid.length())?)
}
