//! Picard iteration for the 2-D periodic vorticity BSDE.
//!
//! The random pair `(Y, Z)` is carried by a deterministic skeleton `θ`:
//! `Y(t, x) = θ(T - t, x + √(2ν) B_t)`, `Z = √(2ν) ∇θ(T - t, ·)` along the
//! same shift, where `θ` solves the forward problem
//! `∂_τ θ + u·∇θ = νΔθ`, `θ(0) = ψ`, `u = K̃^α θ`. Each Picard step freezes
//! `u` at the previous iterate and solves the linear problem, either
//! spectrally or by Monte Carlo through the Girsanov or characteristics
//! representation. All spatial norms are invariant under the torus shift,
//! so the diagnostics are deterministic.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::integrators::if_heun_step;
use crate::params::AlphaModelParams;
use crate::quadrature::simpson;
use crate::spectral::ops::MEAN_TOL;
use crate::spectral::{
    advect, gradient, heat_semigroup, k_tilde_alpha, FieldFlags, Grid, SpectralField,
};
use crate::stochastic::{characteristics_value, girsanov_value, BrownianBatch, Estimate, McConfig};
use crate::timeseries::TimeSeries;

/// One Picard iterate on the forward time grid `τ_i = i·T/n_steps`.
#[derive(Clone, Debug)]
pub struct VorticityIterate {
    pub theta: TimeSeries,
    pub u: TimeSeries,
    pub grad_theta: TimeSeries,
}

impl VorticityIterate {
    pub fn new(theta: TimeSeries, alpha: f64) -> Result<Self> {
        let u = theta.map(|q| k_tilde_alpha(q, alpha))?;
        let grad_theta = theta.map(gradient)?;
        Ok(Self {
            theta,
            u,
            grad_theta,
        })
    }

    /// Heat flow of `psi`, the skeleton of `E{ξ(x) | F_t}`.
    pub fn heat(psi: &SpectralField, params: &AlphaModelParams, n_steps: usize) -> Result<Self> {
        let dt = step_size(params, n_steps)?;
        let slices = (0..=n_steps)
            .map(|i| {
                heat_semigroup(psi, params.nu, i as f64 * dt).with_flags(FieldFlags::MEAN_ZERO)
            })
            .collect();
        Self::new(TimeSeries::new(0.0, dt, slices)?, params.alpha)
    }

    pub fn horizon(&self) -> f64 {
        self.theta.end()
    }

    pub fn n_steps(&self) -> usize {
        self.theta.len() - 1
    }

    /// `Y(t_k, x) = θ(T - t_k, x + √(2ν) B_{t_k})` along one path of `batch`,
    /// for every step `t_k = k·dt` of the batch.
    pub fn y_along_path(
        &self,
        batch: &BrownianBatch,
        path: usize,
        nu: f64,
        x: &[f64],
    ) -> Result<Vec<f64>> {
        let sigma = (2.0 * nu).sqrt();
        let horizon = batch.horizon();
        let mut pos = [x[0], x[1]];
        let mut noise = batch.stream(path, 0);
        let mut out = Vec::with_capacity(batch.n_steps + 1);
        for k in 0..=batch.n_steps {
            let slice = self.theta.index_at(horizon - k as f64 * batch.dt)?;
            out.push(self.theta.slice(slice).interpolate(0, &pos));
            if k < batch.n_steps {
                let db = noise.next_increment();
                pos[0] += sigma * db[0];
                pos[1] += sigma * db[1];
            }
        }
        Ok(out)
    }
}

/// Per-iteration diagnostics of [`picard_solve_2d`].
#[derive(Clone, Debug, PartialEq)]
pub struct PicardDiagnostics {
    pub iteration: usize,
    /// `sup_τ ‖θ_n(τ)‖₂`.
    pub sup_l2: f64,
    /// `sup_τ ‖θ_n(τ)‖_∞` on the grid.
    pub sup_inf: f64,
    /// Whether `sup_inf <= ‖ψ‖_∞ (1 + 1e-6)`.
    pub max_principle: bool,
    /// `sup_τ |∫θ_n(τ)| / ‖θ_n(τ)‖₂`.
    pub mean_defect: f64,
    pub bmo: f64,
    pub bmo_bound: f64,
    pub beta: f64,
    /// `sup_τ e^{-βτ} ‖θ_n(τ) - θ_{n-1}(τ)‖₂`, the BSDE-time weight
    /// `e^{βt}` normalised by `e^{βT}`.
    pub weighted_delta: Option<f64>,
    /// `sup_τ ‖θ_n(τ) - θ_{n-1}(τ)‖₂`.
    pub delta: Option<f64>,
    /// `weighted_delta_n / weighted_delta_{n-1}`, from the second step on.
    pub ratio: Option<f64>,
}

/// Result of [`picard_solve_2d`].
#[derive(Clone, Debug)]
pub struct PicardState {
    pub iterate: VorticityIterate,
    pub diagnostics: Vec<PicardDiagnostics>,
    pub converged: bool,
    /// `‖ψ‖_∞`.
    pub c1: f64,
    pub c_alpha: f64,
    pub beta: f64,
    /// The contraction certificate assumes `ν <= 2`.
    pub outside_beta_regime: bool,
}

/// Which Monte Carlo representation evaluates the linear step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum McEstimator {
    /// Driftless paths with the exponential weight.
    #[default]
    Girsanov,
    /// Drifted characteristics `dX = √(2ν) dW - u ds`.
    Characteristics,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McSettings {
    pub config: McConfig,
    pub estimator: McEstimator,
}

fn step_size(params: &AlphaModelParams, n_steps: usize) -> Result<f64> {
    if n_steps == 0 {
        return Err(Error::ZeroSteps);
    }
    Ok(params.horizon / n_steps as f64)
}

fn check_psi(psi: &SpectralField, params: &AlphaModelParams) -> Result<()> {
    if psi.dim() != 2 || psi.n_components() != 1 || params.dim != 2 {
        return Err(Error::ShapeMismatch(
            "the vorticity BSDE needs a 2-D scalar field".into(),
        ));
    }
    if (psi.grid().length() - params.box_length).abs() > 1e-12 * params.box_length {
        return Err(Error::ShapeMismatch(
            "grid length differs from the box length".into(),
        ));
    }
    psi.require_mean_zero(MEAN_TOL)
}

/// Operator norm of `K̃^α` from `‖·‖_{-2,2}` to `L²` on the lattice of
/// `grid`: `sup_{k≠0} |symbol(k)| (1 + |k/L|²)`.
pub fn k_tilde_operator_norm(grid: &Grid, alpha: f64) -> f64 {
    let l = grid.length();
    let s = 2.0 * PI / l;
    grid.modes()
        .filter(|m| !m.is_zero())
        .map(|m| {
            let k2 = m.k2();
            let symbol = s * m.kd2().sqrt() / (s * s * k2) / (1.0 + alpha * alpha * s * s * k2);
            symbol * (1.0 + k2 / (l * l))
        })
        .fold(0.0, f64::max)
}

/// Smallest `β` with `2ν - C²C₁²/β >= ν/2` and
/// `C²C₁²(ν + T C²C₁²)/(βν²) <= ν/16`.
pub fn choose_beta(c1: f64, c_alpha: f64, nu: f64, horizon: f64) -> f64 {
    let a = c_alpha * c_alpha * c1 * c1;
    (2.0 * a / (3.0 * nu)).max(16.0 * a * (nu + horizon * a) / nu.powi(3))
}

/// Upper bound `(C₁/ν)² (ν + T C²C₁²)` for [`bmo_norm`].
pub fn bmo_bound(c1: f64, c_alpha: f64, nu: f64, horizon: f64) -> f64 {
    (c1 / nu).powi(2) * (nu + horizon * c_alpha * c_alpha * c1 * c1)
}

/// `∫₀ᵀ ‖∇θ(r)‖₂² dr` by Simpson quadrature over the time grid.
pub fn bmo_norm(iterate: &VorticityIterate) -> f64 {
    let sq: Vec<f64> = iterate
        .grad_theta
        .slices()
        .iter()
        .map(|g| g.l2_norm().powi(2))
        .collect();
    simpson(&sq, iterate.theta.dt())
}

/// Solve `∂_τ θ + u·∇θ = νΔθ`, `θ(0) = ψ`, for a frozen velocity `u` given
/// on the time grid, spectrally (`mc = None`) or by Monte Carlo at every
/// grid point.
pub fn linear_bsde_solve(
    u: &TimeSeries,
    psi: &SpectralField,
    params: &AlphaModelParams,
    mc: Option<&McSettings>,
) -> Result<TimeSeries> {
    check_psi(psi, params)?;
    match mc {
        None => linear_spectral(u, psi, params),
        Some(mc) => linear_monte_carlo(u, psi, params, mc),
    }
}

fn linear_spectral(
    u: &TimeSeries,
    psi: &SpectralField,
    params: &AlphaModelParams,
) -> Result<TimeSeries> {
    let dt = u.dt();
    let h = psi.grid().min_spacing();
    let mut slices = Vec::with_capacity(u.len());
    let mut theta = psi.clone().with_flags(FieldFlags::MEAN_ZERO);
    slices.push(theta.clone());
    for i in 0..u.len() - 1 {
        let (u0, u1) = (u.slice(i), u.slice(i + 1));
        let speed = u0.max_abs().max(u1.max_abs());
        let sub = ((speed * dt / h) / 0.5).ceil().max(1.0) as usize;
        let h_sub = dt / sub as f64;
        for j in 0..sub {
            // linear interpolation of the frozen velocity inside a slice
            let at = |w: f64| u0.linear_combination(1.0 - w, u1, w);
            let (w0, w1) = (j as f64 / sub as f64, (j + 1) as f64 / sub as f64);
            let (ua, ub) = (at(w0)?, at(w1)?);
            theta = if_heun_step(&theta, params.nu, h_sub, |f, stage| {
                let v = if stage == 0 { &ua } else { &ub };
                Ok(advect(v, &f.dealias())?.scale(-1.0))
            })?
            .with_flags(FieldFlags::MEAN_ZERO);
        }
        slices.push(theta.clone());
    }
    TimeSeries::new(0.0, dt, slices)
}

fn mc_batch(params: &AlphaModelParams, series_dt: f64, mc: &McConfig) -> Result<BrownianBatch> {
    let grid_multiple = |a: f64, b: f64| ((a / b) - (a / b).round()).abs() < 1e-9;
    if !grid_multiple(params.horizon, mc.dt) || !grid_multiple(series_dt, mc.dt) {
        return Err(Error::InvalidParameter {
            name: "mc.dt",
            reason: format!(
                "must divide the horizon {} and the slice step {series_dt}, got {}",
                params.horizon, mc.dt
            ),
        });
    }
    let n_steps = (params.horizon / mc.dt).round() as usize;
    BrownianBatch::generate(mc.seed, mc.n_paths, n_steps, mc.dt, 2)
}

/// Monte Carlo values of the linear solution at `points` for each forward
/// time in `times` (which must lie on the `mc.dt` grid). Indexed
/// `[time][point]`.
pub fn mc_theta_values(
    u: &TimeSeries,
    psi: &SpectralField,
    params: &AlphaModelParams,
    mc: &McSettings,
    points: &[[f64; 2]],
    times: &[f64],
) -> Result<Vec<Vec<Estimate>>> {
    check_psi(psi, params)?;
    let batch = mc_batch(params, u.dt(), &mc.config)?;
    let terminal = mc.config.refined(psi)?;
    let sigma = (2.0 * params.nu).sqrt();
    let h = match mc.estimator {
        McEstimator::Girsanov => Some(u.map(|f| Ok(f.scale(1.0 / sigma)))?),
        McEstimator::Characteristics => None,
    };
    times
        .iter()
        .map(|&tau| {
            let t = params.horizon - tau;
            points
                .iter()
                .map(|x| match &h {
                    Some(h) => girsanov_value(&batch, Some(h), &terminal, params.nu, x, t),
                    None => {
                        characteristics_value(&batch, Some(u), &terminal, None, params.nu, x, t)
                            .map(|e| e[0])
                    }
                })
                .collect()
        })
        .collect()
}

fn linear_monte_carlo(
    u: &TimeSeries,
    psi: &SpectralField,
    params: &AlphaModelParams,
    mc: &McSettings,
) -> Result<TimeSeries> {
    let grid = psi.grid();
    let points: Vec<[f64; 2]> = (0..grid.len())
        .map(|i| {
            let c = grid.coords(i);
            [c[0], c[1]]
        })
        .collect();
    let times: Vec<f64> = (1..u.len()).map(|i| u.time(i)).collect();
    let values = mc_theta_values(u, psi, params, mc, &points, &times)?;
    let mut slices = vec![psi.clone().with_flags(FieldFlags::MEAN_ZERO)];
    for row in values {
        let f = SpectralField::from_values(grid.clone(), 1, row.iter().map(|e| e.mean).collect())?;
        // sampling noise breaks the zero mean that K̃^α requires
        slices.push(f.remove_mean());
    }
    TimeSeries::new(u.start(), u.dt(), slices)
}

/// One application of the Picard map: `θ_{n+1}` solves the linear problem
/// with `u_n = K̃^α θ_n` frozen.
pub fn picard_step_2d(
    prev: &VorticityIterate,
    psi: &SpectralField,
    params: &AlphaModelParams,
    mc: Option<&McSettings>,
) -> Result<VorticityIterate> {
    let theta = linear_bsde_solve(&prev.u, psi, params, mc)?;
    VorticityIterate::new(theta, params.alpha)
}

fn diagnose(
    iteration: usize,
    it: &VorticityIterate,
    prev: Option<(&VorticityIterate, Option<f64>)>,
    c1: f64,
    c_alpha: f64,
    beta: f64,
    params: &AlphaModelParams,
) -> Result<PicardDiagnostics> {
    let slices = it.theta.slices();
    let sup_l2 = slices
        .iter()
        .map(SpectralField::l2_norm)
        .fold(0.0, f64::max);
    let sup_inf = slices
        .iter()
        .map(SpectralField::max_abs)
        .fold(0.0, f64::max);
    let volume = it.theta.first().grid().volume();
    let mean_defect = slices
        .iter()
        .map(|s| {
            let l2 = s.l2_norm();
            if l2 == 0.0 {
                0.0
            } else {
                (s.mean(0) * volume).abs() / l2
            }
        })
        .fold(0.0, f64::max);
    let (mut weighted_delta, mut delta, mut ratio) = (None, None, None);
    if let Some((p, prev_weighted)) = prev {
        let mut w = 0.0f64;
        let mut d = 0.0f64;
        for (i, (a, b)) in slices.iter().zip(p.theta.slices()).enumerate() {
            let diff = a.sub(b)?.l2_norm();
            d = d.max(diff);
            w = w.max((-beta * it.theta.time(i)).exp() * diff);
        }
        weighted_delta = Some(w);
        delta = Some(d);
        ratio = prev_weighted.map(|pw| w / pw);
    }
    Ok(PicardDiagnostics {
        iteration,
        sup_l2,
        sup_inf,
        max_principle: sup_inf <= c1 * (1.0 + 1e-6),
        mean_defect,
        bmo: bmo_norm(it),
        bmo_bound: bmo_bound(c1, c_alpha, params.nu, params.horizon),
        beta,
        weighted_delta,
        delta,
        ratio,
    })
}

/// Picard iteration from the heat flow of `psi` until the sup-in-time `L²`
/// change drops below `tol` or `max_iter` steps have been taken.
pub fn picard_solve_2d(
    psi: &SpectralField,
    params: &AlphaModelParams,
    n_steps: usize,
    tol: f64,
    max_iter: usize,
    mc: Option<&McSettings>,
) -> Result<PicardState> {
    check_psi(psi, params)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("must be positive, got {tol}"),
        });
    }
    let c1 = psi.max_abs();
    let c_alpha = k_tilde_operator_norm(psi.grid(), params.alpha);
    let beta = choose_beta(c1, c_alpha, params.nu, params.horizon);
    let mut iterate = VorticityIterate::heat(psi, params, n_steps)?;
    let mut diagnostics = vec![diagnose(0, &iterate, None, c1, c_alpha, beta, params)?];
    let mut converged = false;
    for n in 1..=max_iter {
        let next = picard_step_2d(&iterate, psi, params, mc)?;
        let prev_weighted = diagnostics.last().and_then(|d| d.weighted_delta);
        let d = diagnose(
            n,
            &next,
            Some((&iterate, prev_weighted)),
            c1,
            c_alpha,
            beta,
            params,
        )?;
        let done = d.delta.is_some_and(|x| x < tol);
        diagnostics.push(d);
        iterate = next;
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        let ratio = diagnostics
            .last()
            .and_then(|d| d.ratio)
            .unwrap_or(f64::INFINITY);
        if ratio >= 1.0 {
            return Err(Error::NoConvergence {
                iterations: max_iter,
                ratio,
            });
        }
    }
    Ok(PicardState {
        iterate,
        diagnostics,
        converged,
        c1,
        c_alpha,
        beta,
        outside_beta_regime: params.nu > 2.0,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.17e}"))
}

/// Diagnostics table with one row per iteration.
pub fn diagnostics_csv(diagnostics: &[PicardDiagnostics]) -> String {
    let mut out =
        String::from("iteration,sup_L2,sup_inf,bmo,bmo_bound,beta,weighted_delta,delta,ratio\n");
    for d in diagnostics {
        out.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{}\n",
            d.iteration,
            d.sup_l2,
            d.sup_inf,
            d.bmo,
            d.bmo_bound,
            d.beta,
            opt(d.weighted_delta),
            opt(d.delta),
            opt(d.ratio)
        ));
    }
    out
}
