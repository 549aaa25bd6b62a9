use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("axis {axis} out of range for a {dim}-dimensional field")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("field has non-zero mean (relative zero-mode magnitude {relative:.3e})")]
    NonZeroMean { relative: f64 },

    #[error("field is not divergence-free (relative defect {relative:.3e})")]
    NotDivergenceFree { relative: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Brownian batch needs at least one step")]
    ZeroSteps,

    #[error(
        "time grid [{grid_start}, {grid_end}] does not cover the requested interval [{t0}, {t1}]"
    )]
    TimeGridMismatch {
        grid_start: f64,
        grid_end: f64,
        t0: f64,
        t1: f64,
    },

    #[error("Girsanov log-weight {log_weight:.3} exceeds the overflow guard (path {path})")]
    WeightOverflow { path: usize, log_weight: f64 },

    #[error("CFL violation: {0}")]
    CflViolation(String),

    #[error("boundary-shell energy fraction {fraction:.3e} exceeds {limit:.1e}; enlarge the box")]
    Truncation { fraction: f64, limit: f64 },

    #[error("no convergence after {iterations} iterations (last ratio {ratio:.3e})")]
    NoConvergence { iterations: usize, ratio: f64 },

    #[error("horizon T0 = {t0:.3e} fell below 8 dt = {limit:.3e}")]
    HorizonUnderflow { t0: f64, limit: f64 },

    #[error("field file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
