//! Deterministic pseudo-spectral reference solvers.
//!
//! * [`oracle_vorticity_2d`]: `∂_t q + u·∇q = νΔq`, `u = K̃^α q`, on the
//!   periodic square.
//! * [`oracle_mild_nd`]: the momentum form `∂_t m + v·∇m = νΔm + J_v`,
//!   `v = (I - α²Δ)^{-1} m`, on a periodic box.
//!
//! Both use Lawson RK4 with the nonlinear term recomputed at every stage and
//! substep so that the advective CFL number stays at or below 0.5.

use crate::error::{Error, Result};
use crate::integrators::lawson_rk4_step;
use crate::params::AlphaModelParams;
use crate::spectral::ops::assemble_j_unchecked;
use crate::spectral::{
    advect, helmholtz_inverse, k_tilde_alpha, FieldFlags, MomentumModel, SpectralField,
};
use crate::timeseries::TimeSeries;

/// Largest advective CFL number the oracles accept.
pub const MAX_CFL: f64 = 0.5;

// Substeps per output step beyond which a run is considered unstable.
const MAX_SUBSTEPS: usize = 100_000;

/// Nonlinearity of the momentum-form oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MildVariant {
    #[default]
    NavierStokesAlpha,
    LerayAlpha,
    /// `J = 0` and no advection: the heat equation.
    HeatOnly,
}

impl From<MomentumModel> for MildVariant {
    fn from(m: MomentumModel) -> Self {
        match m {
            MomentumModel::NavierStokesAlpha => Self::NavierStokesAlpha,
            MomentumModel::LerayAlpha => Self::LerayAlpha,
        }
    }
}

/// Trajectory and per-step bookkeeping of an oracle run.
#[derive(Clone, Debug)]
pub struct OracleRun {
    pub trajectory: TimeSeries,
    /// Output step; internal substeps divide it evenly.
    pub dt: f64,
    pub dealiased: bool,
    /// Substeps used for each output step.
    pub substeps: Vec<usize>,
    /// Largest CFL number reached within each output step.
    pub cfl: Vec<f64>,
    /// Largest relative zero-mode magnitude of each slice.
    pub mean: Vec<f64>,
    /// `L²` norm of each slice.
    pub l2: Vec<f64>,
}

impl OracleRun {
    pub fn last(&self) -> &SpectralField {
        self.trajectory.last()
    }

    /// Per-slice table `step,time,l2,mean,cfl,substeps`.
    pub fn norms_csv(&self) -> String {
        let mut out = String::from("step,time,l2,relative_mean,cfl,substeps\n");
        for i in 0..self.trajectory.len() {
            let (cfl, sub) = if i == 0 {
                (0.0, 0)
            } else {
                (self.cfl[i - 1], self.substeps[i - 1])
            };
            out.push_str(&format!(
                "{i},{:.17e},{:.17e},{:.17e},{:.17e},{sub}\n",
                self.trajectory.time(i),
                self.l2[i],
                self.mean[i],
                cfl
            ));
        }
        out
    }
}

fn check_steps(dt: f64, n_steps: usize) -> Result<()> {
    if n_steps == 0 {
        return Err(Error::ZeroSteps);
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be positive, got {dt}"),
        });
    }
    Ok(())
}

/// Advance `state` by `n_steps` output steps, substepping for CFL.
fn drive(
    state: SpectralField,
    nu: f64,
    dt: f64,
    n_steps: usize,
    speed: impl Fn(&SpectralField) -> Result<f64>,
    rhs: impl Fn(&SpectralField) -> Result<SpectralField> + Copy,
    flags: FieldFlags,
    after_step: impl Fn(&SpectralField) -> Result<()>,
) -> Result<OracleRun> {
    let h = state.grid().min_spacing();
    let mut slices = Vec::with_capacity(n_steps + 1);
    let mut substeps = Vec::with_capacity(n_steps);
    let mut cfl = Vec::with_capacity(n_steps);
    let mut q = state;
    slices.push(q.clone());
    for _ in 0..n_steps {
        let mut remaining = dt;
        let mut count = 0;
        let mut worst = 0.0f64;
        while remaining > 1e-14 * dt {
            let u = speed(&q)?;
            if !u.is_finite() {
                return Err(Error::CflViolation(format!("non-finite velocity {u}")));
            }
            let h_cfl = if u > 0.0 {
                MAX_CFL * h / u
            } else {
                f64::INFINITY
            };
            // even split of what is left, so outputs land on the grid
            let pieces = (remaining / h_cfl).ceil().max(1.0);
            let sub = remaining / pieces;
            worst = worst.max(u * sub / h);
            q = lawson_rk4_step(&q, nu, sub, rhs)?.with_flags(flags);
            remaining -= sub;
            count += 1;
            if count > MAX_SUBSTEPS {
                return Err(Error::CflViolation(format!(
                    "more than {MAX_SUBSTEPS} substeps for one output step"
                )));
            }
        }
        after_step(&q)?;
        substeps.push(count);
        cfl.push(worst);
        slices.push(q.clone());
    }
    let mean = slices.iter().map(SpectralField::relative_mean).collect();
    let l2 = slices.iter().map(SpectralField::l2_norm).collect();
    Ok(OracleRun {
        trajectory: TimeSeries::new(0.0, dt, slices)?,
        dt,
        dealiased: true,
        substeps,
        cfl,
        mean,
        l2,
    })
}

/// Vorticity form on the periodic square, starting from `psi = q(0)`.
pub fn oracle_vorticity_2d(
    psi: &SpectralField,
    params: &AlphaModelParams,
    dt: f64,
    n_steps: usize,
) -> Result<OracleRun> {
    check_steps(dt, n_steps)?;
    if psi.dim() != 2 || psi.n_components() != 1 {
        return Err(Error::ShapeMismatch(
            "vorticity oracle needs a 2-D scalar field".into(),
        ));
    }
    psi.require_mean_zero(crate::spectral::ops::MEAN_TOL)?;
    let alpha = params.alpha;
    let psi = psi.remove_mean();
    let rhs = move |q: &SpectralField| -> Result<SpectralField> {
        let q = q.dealias().remove_mean();
        Ok(advect(&k_tilde_alpha(&q, alpha)?, &q)?.scale(-1.0))
    };
    let speed = move |q: &SpectralField| Ok(k_tilde_alpha(&q.remove_mean(), alpha)?.max_abs());
    drive(
        psi,
        params.nu,
        dt,
        n_steps,
        speed,
        rhs,
        FieldFlags::MEAN_ZERO,
        |_| Ok(()),
    )
}

/// Momentum form on a periodic box, starting from `m0`.
///
/// With `truncation_monitor` set, every output slice is checked against the
/// boundary-shell monitor ([`crate::fixedpoint::check_truncation`]); turn it
/// off only for genuinely periodic data.
pub fn oracle_mild_nd(
    m0: &SpectralField,
    params: &AlphaModelParams,
    dt: f64,
    n_steps: usize,
    variant: MildVariant,
    truncation_monitor: bool,
) -> Result<OracleRun> {
    check_steps(dt, n_steps)?;
    if !m0.is_vector() {
        return Err(Error::ShapeMismatch(
            "momentum oracle needs a vector field".into(),
        ));
    }
    crate::spectral::require_divergence_free(m0, crate::spectral::ops::DIV_TOL)?;
    let alpha = params.alpha;
    let m0 = m0.dealias();
    let model = match variant {
        MildVariant::LerayAlpha => MomentumModel::LerayAlpha,
        _ => MomentumModel::NavierStokesAlpha,
    };
    let rhs = move |m: &SpectralField| -> Result<SpectralField> {
        if variant == MildVariant::HeatOnly {
            return Ok(m.scale(0.0));
        }
        let v = helmholtz_inverse(m, alpha);
        let j = assemble_j_unchecked(m, alpha, model)?;
        j.sub(&advect(&v, m)?)
    };
    let speed = move |m: &SpectralField| {
        Ok(if variant == MildVariant::HeatOnly {
            0.0
        } else {
            helmholtz_inverse(m, alpha).max_abs()
        })
    };
    drive(
        m0,
        params.nu,
        dt,
        n_steps,
        speed,
        rhs,
        FieldFlags::empty(),
        |m| {
            if truncation_monitor {
                crate::fixedpoint::check_truncation(m)
            } else {
                Ok(())
            }
        },
    )
}
