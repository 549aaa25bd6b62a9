use crate::error::{Error, Result};
use crate::spectral::Grid;

/// Physical parameters of a Navier–Stokes-α run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaModelParams {
    /// Viscosity `ν > 0`.
    pub nu: f64,
    /// Filter length `α >= 0`.
    pub alpha: f64,
    /// Time horizon `T > 0`.
    pub horizon: f64,
    /// Spatial dimension (2 or 3).
    pub dim: usize,
    /// Side length of the periodic box.
    pub box_length: f64,
}

impl AlphaModelParams {
    pub fn new(nu: f64, alpha: f64, horizon: f64, dim: usize, box_length: f64) -> Result<Self> {
        let p = Self {
            nu,
            alpha,
            horizon,
            dim,
            box_length,
        };
        p.validate()?;
        Ok(p)
    }

    /// Unit torus `T²`.
    pub fn torus(nu: f64, alpha: f64, horizon: f64) -> Result<Self> {
        Self::new(nu, alpha, horizon, 2, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return bad("nu", format!("viscosity must be positive, got {}", self.nu));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(
                "alpha",
                format!("filter length must be >= 0, got {}", self.alpha),
            );
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad("horizon", format!("must be positive, got {}", self.horizon));
        }
        if !(self.dim == 2 || self.dim == 3) {
            return bad("dim", format!("must be 2 or 3, got {}", self.dim));
        }
        if !(self.box_length > 0.0 && self.box_length.is_finite()) {
            return bad(
                "box_length",
                format!("must be positive, got {}", self.box_length),
            );
        }
        Ok(())
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Grid with `n` points per axis on this box.
    pub fn grid(&self, n: usize) -> Result<Grid> {
        Grid::new(&vec![n; self.dim], self.box_length)
    }
}
