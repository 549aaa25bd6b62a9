//! Probabilistic and pseudo-spectral solvers for the Navier–Stokes-α equation.
//!
//! * [`spectral`]: periodic fields, FFT-based operators (Biot–Savart, Helmholtz
//!   filter, Newtonian potential, Leray projection, the `J_v` nonlinearity).
//! * [`stochastic`]: reproducible Brownian batches, Euler–Maruyama paths, and
//!   the Girsanov and characteristics Monte Carlo estimators.
//! * [`bsde2d`]: Picard iteration for the 2-D periodic vorticity BSDE.
//! * [`fixedpoint`]: the Feynman–Kac fixed-point map for `d >= 3`.
//! * [`oracle`]: deterministic pseudo-spectral reference solvers.
//! * [`io`]: AFLD binary field dumps and CSV export.

pub mod bsde2d;
pub mod error;
pub mod fixedpoint;
pub mod integrators;
pub mod io;
pub mod oracle;
pub mod params;
pub mod quadrature;
pub mod spectral;
pub mod stochastic;
pub mod timeseries;

pub use error::{Error, Result};
pub use params::AlphaModelParams;
pub use spectral::{Grid, SpectralField};
pub use timeseries::TimeSeries;
