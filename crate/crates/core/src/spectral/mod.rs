//! Spectral calculus on uniform periodic grids.

pub mod fft;
pub mod field;
pub mod grid;
pub mod norms;
pub mod ops;

pub use field::{
    interpolate_periodic, random_band_field, FieldFlags, InterpStencil, SpectralField,
};
pub use grid::{Grid, Mode};
pub use norms::{multi_indices, neg_sobolev_norm, sobolev_norm};
pub use ops::{
    advect, assemble_j, biot_savart, derivative, divergence, gradient, gradient_contraction,
    heat_semigroup, helmholtz_forward, helmholtz_inverse, k_tilde_alpha, laplacian, leray_project,
    newtonian_potential, pressure_source, product, relative_divergence, require_divergence_free,
    MomentumModel,
};
