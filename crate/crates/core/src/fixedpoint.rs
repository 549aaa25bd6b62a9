//! Feynman–Kac fixed-point solver for the momentum form in `d = 3`.
//!
//! Given an iterate `m` on `[0, T₀]`, the map `P_ν` solves the linear problem
//! `∂_τ Φ + v·∇Φ = νΔΦ + J_v`, `Φ(0) = m₀`, with `v = (I - α²Δ)^{-1} m` and
//! `J_v` frozen, and returns the Leray projection of `Φ`. The whole space is
//! approximated by a periodic box; data must stay away from its boundary.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrators::if_ab2_step;
use crate::params::AlphaModelParams;
use crate::spectral::ops::DIV_TOL;
use crate::spectral::{
    advect, assemble_j, derivative, divergence, heat_semigroup, helmholtz_inverse, laplacian,
    leray_project, newtonian_potential, pressure_source, require_divergence_free, sobolev_norm,
    FieldFlags, Grid, MomentumModel, SpectralField,
};
use crate::stochastic::{characteristics_sweep, BrownianBatch, Estimate, McConfig};
use crate::timeseries::TimeSeries;

/// Largest admissible fraction of the energy in the boundary shell.
pub const TRUNCATION_LIMIT: f64 = 1e-6;

/// Fraction of `∫|f|²` carried by points with `max_j |x_j - L/2| >= 7L/16`.
pub fn boundary_energy_fraction(f: &SpectralField) -> f64 {
    let grid = f.grid();
    let (l, dim, n) = (grid.length(), grid.dim(), grid.len());
    let vals = f.values();
    let (mut shell, mut total) = (0.0, 0.0);
    for i in 0..n {
        let x = grid.coords(i);
        let e: f64 = (0..f.n_components()).map(|c| vals[c * n + i].powi(2)).sum();
        total += e;
        if (0..dim).any(|a| (x[a] - 0.5 * l).abs() >= 7.0 * l / 16.0) {
            shell += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        shell / total
    }
}

pub fn check_truncation(f: &SpectralField) -> Result<()> {
    let fraction = boundary_energy_fraction(f);
    if fraction > TRUNCATION_LIMIT {
        return Err(Error::Truncation {
            fraction,
            limit: TRUNCATION_LIMIT,
        });
    }
    Ok(())
}

/// Divergence-free bump `curl(0, 0, φ)` with `φ` a Gaussian of width
/// `sigma` centred in the box, band-limited by the 2/3 rule and scaled to
/// `‖m₀‖_{W^{k,p}} = 1`.
pub fn centered_bump(grid: &Grid, sigma: f64, k: usize, p: f64) -> Result<SpectralField> {
    if grid.dim() != 3 {
        return Err(Error::ShapeMismatch("the bump is three-dimensional".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("must be positive, got {sigma}"),
        });
    }
    let c = 0.5 * grid.length();
    let phi = SpectralField::scalar_from_fn(grid.clone(), |x| {
        let r2: f64 = x.iter().map(|xi| (xi - c).powi(2)).sum();
        (-r2 / (2.0 * sigma * sigma)).exp()
    })?
    .dealias();
    let zero = SpectralField::zeros(grid.clone(), 1)?;
    let m = SpectralField::from_components(&[
        derivative(&phi, 1, 1)?,
        derivative(&phi, 0, 1)?.scale(-1.0),
        zero,
    ])?;
    let norm = sobolev_norm(&m, k, p)?;
    Ok(m.scale(1.0 / norm)
        .with_flags(FieldFlags::MEAN_ZERO | FieldFlags::DIVERGENCE_FREE))
}

/// Time-indexed momentum with its derived coefficients.
#[derive(Clone, Debug)]
pub struct MomentumIterate {
    pub m: TimeSeries,
    pub v: TimeSeries,
    pub j: TimeSeries,
    /// `‖m(t)‖_{W^{k,p}}` per slice.
    pub norms: Vec<f64>,
    pub model: MomentumModel,
}

impl MomentumIterate {
    pub fn new(m: TimeSeries, alpha: f64, model: MomentumModel, k: usize, p: f64) -> Result<Self> {
        let v = m.par_map(|f| Ok(helmholtz_inverse(f, alpha)))?;
        let j = m.par_map(|f| assemble_j(f, alpha, model))?;
        let norms = m
            .slices()
            .par_iter()
            .map(|f| sobolev_norm(f, k, p))
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<_>>()?;
        Ok(Self {
            m,
            v,
            j,
            norms,
            model,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.m.end()
    }

    pub fn n_steps(&self) -> usize {
        self.m.len() - 1
    }

    pub fn sup_norm(&self) -> f64 {
        self.norms.iter().copied().fold(0.0, f64::max)
    }
}

/// Starting iterate of [`fixed_point_solve`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InitialIterate {
    /// `m₁(t) = m₀`.
    #[default]
    Constant,
    /// `m₁(t) = e^{tνΔ} m₀`.
    HeatFlow,
}

impl InitialIterate {
    pub fn build(self, m0: &SpectralField, nu: f64, dt: f64, n_steps: usize) -> Result<TimeSeries> {
        let slices = (0..=n_steps)
            .map(|i| match self {
                Self::Constant => m0.clone(),
                Self::HeatFlow => heat_semigroup(m0, nu, i as f64 * dt),
            })
            .collect();
        TimeSeries::new(0.0, dt, slices)
    }
}

/// How `Φ` is evaluated inside [`p_nu_map`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhiEvaluator {
    /// Exponential Adams–Bashforth 2 on the slice grid.
    Deterministic,
    /// Characteristics Monte Carlo at every grid point (small grids only).
    MonteCarlo(McConfig),
}

/// Deterministic `Φ` on the time grid of `prev`: the integrating-factor
/// AB2 scheme reads `v` and `J` only at slice times, which keeps the discrete
/// divergence equation exact.
pub fn phi_deterministic(
    prev: &MomentumIterate,
    m0: &SpectralField,
    params: &AlphaModelParams,
) -> Result<TimeSeries> {
    let dt = prev.m.dt();
    let h = m0.grid().min_spacing();
    let mut phi = m0.clone();
    let mut slices = Vec::with_capacity(prev.m.len());
    slices.push(phi.clone());
    let mut n_prev: Option<SpectralField> = None;
    for i in 0..prev.n_steps() {
        let v = prev.v.slice(i);
        let cfl = v.max_abs() * dt / h;
        if cfl > crate::oracle::MAX_CFL {
            return Err(Error::CflViolation(format!(
                "CFL number {cfl:.3} at slice {i}"
            )));
        }
        let n_now = prev.j.slice(i).sub(&advect(v, &phi)?)?;
        phi = if_ab2_step(&phi, params.nu, dt, &n_now, n_prev.as_ref())?;
        n_prev = Some(n_now);
        slices.push(phi.clone());
    }
    TimeSeries::new(0.0, dt, slices)
}

fn fk_batch(prev: &MomentumIterate, mc: &McConfig) -> Result<BrownianBatch> {
    let horizon = prev.horizon();
    let ratio = prev.m.dt() / mc.dt;
    if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
        return Err(Error::InvalidParameter {
            name: "mc.dt",
            reason: format!("must divide the slice step {}, got {}", prev.m.dt(), mc.dt),
        });
    }
    let n_steps = (horizon / mc.dt).round() as usize;
    BrownianBatch::generate(mc.seed, mc.n_paths, n_steps, mc.dt, prev.m.first().dim())
}

/// Monte Carlo `Φ(τ, x)` along characteristics with drift `v_prev`, source
/// `J_prev` and terminal value `m₀`, every field refined by `mc.refine`.
/// Indexed `[time][point][component]`.
pub fn feynman_kac_stencil(
    prev: &MomentumIterate,
    m0: &SpectralField,
    params: &AlphaModelParams,
    mc: &McConfig,
    points: &[[f64; 3]],
    times: &[f64],
) -> Result<Vec<Vec<Vec<Estimate>>>> {
    let batch = fk_batch(prev, mc)?;
    let horizon = prev.horizon();
    let starts: Vec<([f64; 3], f64)> = times
        .iter()
        .flat_map(|&tau| points.iter().map(move |x| (*x, horizon - tau)))
        .collect();
    let flat = characteristics_sweep(
        &batch,
        Some(&prev.v),
        m0,
        Some(&prev.j),
        params.nu,
        &starts,
        mc.refine,
    )?;
    Ok(flat
        .chunks(points.len().max(1))
        .map(<[_]>::to_vec)
        .collect())
}

/// Monte Carlo `Φ` at every grid point and slice time.
pub fn feynman_kac_phi(
    prev: &MomentumIterate,
    m0: &SpectralField,
    params: &AlphaModelParams,
    mc: &McConfig,
) -> Result<TimeSeries> {
    let grid = m0.grid();
    let n = grid.len();
    let points: Vec<[f64; 3]> = (0..n).map(|i| grid.coords(i)).collect();
    let times: Vec<f64> = (1..prev.m.len()).map(|i| prev.m.time(i)).collect();
    let est = feynman_kac_stencil(prev, m0, params, mc, &points, &times)?;
    let d = m0.n_components();
    let mut slices = vec![m0.clone()];
    for row in est {
        let mut values = vec![0.0; d * n];
        for (i, comps) in row.iter().enumerate() {
            for c in 0..d {
                values[c * n + i] = comps[c].mean;
            }
        }
        slices.push(SpectralField::from_values(grid.clone(), d, values)?);
    }
    TimeSeries::new(0.0, prev.m.dt(), slices)
}

/// `sup_t ‖∇·Φ(t)‖_p` and `sup_t ‖H(t)‖_p`, `H = Σ ∂_i v^j ∂_j(Φ^i - m^i)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DivergenceDefect {
    pub divergence: f64,
    pub h: f64,
}

pub fn divergence_defect(
    phi: &TimeSeries,
    prev: &MomentumIterate,
    p: f64,
) -> Result<DivergenceDefect> {
    if phi.len() != prev.m.len() {
        return Err(Error::ShapeMismatch(
            "Φ and the iterate have different time grids".into(),
        ));
    }
    let per_slice = (0..phi.len())
        .into_par_iter()
        .map(|i| {
            let div = divergence(phi.slice(i))?.lp_norm(p);
            let diff = phi.slice(i).sub(prev.m.slice(i))?;
            let h = crate::spectral::gradient_contraction(prev.v.slice(i), &diff)?.lp_norm(p);
            Ok((div, h))
        })
        .collect::<Vec<Result<(f64, f64)>>>();
    let mut out = DivergenceDefect {
        divergence: 0.0,
        h: 0.0,
    };
    for r in per_slice {
        let (d, h) = r?;
        out.divergence = out.divergence.max(d);
        out.h = out.h.max(h);
    }
    Ok(out)
}

/// Output of one application of `P_ν`.
#[derive(Clone, Debug)]
pub struct PnuOutput {
    pub iterate: MomentumIterate,
    pub phi: TimeSeries,
    pub defect: DivergenceDefect,
}

/// `P_ν(m_prev) = P Φ`, slice by slice, recording the divergence defect of
/// `Φ` before projection.
pub fn p_nu_map(
    prev: &MomentumIterate,
    m0: &SpectralField,
    params: &AlphaModelParams,
    evaluator: PhiEvaluator,
    k: usize,
    p: f64,
    truncation_monitor: bool,
) -> Result<PnuOutput> {
    let phi = match evaluator {
        PhiEvaluator::Deterministic => phi_deterministic(prev, m0, params)?,
        PhiEvaluator::MonteCarlo(mc) => feynman_kac_phi(prev, m0, params, &mc)?,
    };
    let defect = divergence_defect(&phi, prev, p)?;
    let mut projected = phi.par_map(leray_project)?.into_slices();
    // the projection leaves m₀ unchanged; keep it bit-exact
    projected[0] = m0.clone();
    let m = TimeSeries::new(0.0, phi.dt(), projected)?;
    if truncation_monitor {
        for s in m.slices() {
            check_truncation(s)?;
        }
    }
    Ok(PnuOutput {
        iterate: MomentumIterate::new(m, params.alpha, prev.model, k, p)?,
        phi,
        defect,
    })
}

/// Settings of [`fixed_point_solve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointConfig {
    /// Sobolev order (> 1).
    pub k: usize,
    /// Sobolev exponent (> d).
    pub p: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Fixed time step; the initial horizon is `params.horizon`.
    pub dt: f64,
    pub model: MomentumModel,
    pub start: InitialIterate,
    pub evaluator: PhiEvaluator,
    /// Abort when energy reaches the boundary shell of the box.
    pub truncation_monitor: bool,
}

impl FixedPointConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            k: 2,
            p: 4.0,
            tol: 1e-10,
            max_iter: 60,
            dt,
            model: MomentumModel::NavierStokesAlpha,
            start: InitialIterate::Constant,
            evaluator: PhiEvaluator::Deterministic,
            truncation_monitor: true,
        }
    }
}

/// Per-iteration record of [`fixed_point_solve`].
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPointDiagnostics {
    pub iteration: usize,
    pub t0: f64,
    /// `sup_t ‖m_n(t)‖_{W^{k,p}}`.
    pub sup_wkp: f64,
    /// `sup_t ‖m_n(t) - m_{n-1}(t)‖_{W^{k-1,p}}`.
    pub delta: f64,
    pub ratio: Option<f64>,
    /// `sup_t ‖∇·Φ_n(t)‖_p`.
    pub div_defect: f64,
    /// `sup_t ‖H_{v,Φ}(t)‖_p`.
    pub h_defect: f64,
    /// Whether `sup_wkp <= K̃₀`.
    pub within_k_tilde0: bool,
}

#[derive(Clone, Debug)]
pub struct FixedPointState {
    pub iterate: MomentumIterate,
    pub diagnostics: Vec<FixedPointDiagnostics>,
    pub t0: f64,
    pub k_tilde0: f64,
    /// Number of horizon halvings.
    pub restarts: usize,
    /// Relative residual of the mild equation at acceptance.
    pub mild_residual: f64,
}

impl FixedPointState {
    pub fn final_ratio(&self) -> Option<f64> {
        self.diagnostics.last().and_then(|d| d.ratio)
    }
}

fn check_m0(m0: &SpectralField, params: &AlphaModelParams, truncation_monitor: bool) -> Result<()> {
    if !m0.is_vector() || m0.dim() != params.dim {
        return Err(Error::ShapeMismatch(format!(
            "m0 must be a {}-dimensional vector field",
            params.dim
        )));
    }
    if (m0.grid().length() - params.box_length).abs() > 1e-12 * params.box_length {
        return Err(Error::ShapeMismatch(
            "grid length differs from the box length".into(),
        ));
    }
    require_divergence_free(m0, DIV_TOL)?;
    if truncation_monitor {
        check_truncation(m0)?;
    }
    Ok(())
}

/// Iterate `m_{n+1} = P_ν(m_n)` from the configured starting iterate.
/// Whenever the contraction ratio is at least 1/2 from the third iteration
/// on, the horizon is halved and the iteration restarts.
pub fn fixed_point_solve(
    m0: &SpectralField,
    params: &AlphaModelParams,
    cfg: &FixedPointConfig,
) -> Result<FixedPointState> {
    check_m0(m0, params, cfg.truncation_monitor)?;
    if cfg.k < 2 || !(cfg.p > params.dim as f64) {
        return Err(Error::InvalidParameter {
            name: "k, p",
            reason: format!("need k > 1 and p > d, got k = {}, p = {}", cfg.k, cfg.p),
        });
    }
    if !(cfg.tol > 0.0 && cfg.dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol, dt",
            reason: "must be positive".into(),
        });
    }
    let m0 = m0
        .dealias()
        .with_flags(FieldFlags::MEAN_ZERO | FieldFlags::DIVERGENCE_FREE);
    let mut n_steps = (params.horizon / cfg.dt).round() as usize;
    let mut restarts = 0;
    'horizon: loop {
        let t0 = n_steps as f64 * cfg.dt;
        if n_steps < 8 {
            return Err(Error::HorizonUnderflow {
                t0,
                limit: 8.0 * cfg.dt,
            });
        }
        let p_t = params.with_horizon(t0);
        let start = cfg.start.build(&m0, params.nu, cfg.dt, n_steps)?;
        let mut iterate = MomentumIterate::new(start, params.alpha, cfg.model, cfg.k, cfg.p)?;
        let mut diagnostics: Vec<FixedPointDiagnostics> = Vec::new();
        let mut k_tilde0 = f64::INFINITY;
        for n in 1..=cfg.max_iter {
            let out = p_nu_map(
                &iterate,
                &m0,
                &p_t,
                cfg.evaluator,
                cfg.k,
                cfg.p,
                cfg.truncation_monitor,
            )?;
            let delta = out.iterate.m.sup_pairwise(&iterate.m, |a, b| {
                sobolev_norm(&a.sub(b)?, cfg.k - 1, cfg.p)
            })?;
            let ratio = diagnostics.last().map(|d| delta / d.delta);
            let sup_wkp = out.iterate.sup_norm();
            if n == 1 {
                k_tilde0 = 2.0 * sup_wkp;
            }
            diagnostics.push(FixedPointDiagnostics {
                iteration: n,
                t0,
                sup_wkp,
                delta,
                ratio,
                div_defect: out.defect.divergence,
                h_defect: out.defect.h,
                within_k_tilde0: sup_wkp <= k_tilde0,
            });
            iterate = out.iterate;
            if delta < cfg.tol {
                let mild_residual = mild_residual(&iterate, &m0, &p_t)?;
                return Ok(FixedPointState {
                    iterate,
                    diagnostics,
                    t0,
                    k_tilde0,
                    restarts,
                    mild_residual,
                });
            }
            if n >= 3 && ratio.is_some_and(|r| r >= 0.5) {
                n_steps /= 2;
                restarts += 1;
                continue 'horizon;
            }
        }
        let ratio = diagnostics.last().and_then(|d| d.ratio).unwrap_or(f64::NAN);
        return Err(Error::NoConvergence {
            iterations: cfg.max_iter,
            ratio,
        });
    }
}

/// Relative defect of the mild form
/// `m(t) = e^{tνΔ}m₀ - ∫₀ᵗ e^{(t-s)νΔ}(v·∇m - J_v)(s) ds`
/// with the time integral by the trapezoid rule:
/// `sup_t ‖m(t) - rhs(t)‖₂ / sup_t ‖m(t)‖₂`.
pub fn mild_residual(
    iterate: &MomentumIterate,
    m0: &SpectralField,
    params: &AlphaModelParams,
) -> Result<f64> {
    let dt = iterate.m.dt();
    let forcing = (0..iterate.m.len())
        .into_par_iter()
        .map(|i| {
            iterate
                .j
                .slice(i)
                .sub(&advect(iterate.v.slice(i), iterate.m.slice(i))?)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut integral = m0.scale(0.0);
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for i in 0..iterate.m.len() {
        if i > 0 {
            // trapezoid on [t_{i-1}, t_i], propagated with the semigroup
            let left = heat_semigroup(
                &integral.linear_combination(1.0, &forcing[i - 1], 0.5 * dt)?,
                params.nu,
                dt,
            );
            integral = left.linear_combination(1.0, &forcing[i], 0.5 * dt)?;
        }
        let rhs = heat_semigroup(m0, params.nu, iterate.m.time(i)).add(&integral)?;
        worst = worst.max(iterate.m.slice(i).sub(&rhs)?.l2_norm());
        scale = scale.max(iterate.m.slice(i).l2_norm());
    }
    Ok(if scale == 0.0 { worst } else { worst / scale })
}

/// Pressure `p = N(-G_u)` for the momentum `m` (`u = (I - α²Δ)^{-1} m`).
pub fn recover_pressure(
    m: &SpectralField,
    params: &AlphaModelParams,
    model: MomentumModel,
) -> Result<SpectralField> {
    require_divergence_free(m, DIV_TOL)?;
    let g = pressure_source(m, params.alpha, model)?;
    newtonian_potential(&g.scale(-1.0))
}

/// Relative residual `‖Δp + G_u‖₂ / ‖G_u‖₂` of a recovered pressure.
pub fn pressure_residual(
    p: &SpectralField,
    m: &SpectralField,
    params: &AlphaModelParams,
    model: MomentumModel,
) -> Result<f64> {
    let g = pressure_source(m, params.alpha, model)?;
    let r = laplacian(p).add(&g)?.l2_norm();
    let scale = g.l2_norm();
    Ok(if scale == 0.0 { r } else { r / scale })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.17e}"))
}

/// Diagnostics table with one row per iteration.
pub fn diagnostics_csv(diagnostics: &[FixedPointDiagnostics]) -> String {
    let mut out =
        String::from("iteration,T0,sup_Wkp,delta,ratio,div_defect,h_defect,within_k_tilde0\n");
    for d in diagnostics {
        out.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e},{},{:.17e},{:.17e},{}\n",
            d.iteration,
            d.t0,
            d.sup_wkp,
            d.delta,
            opt(d.ratio),
            d.div_defect,
            d.h_defect,
            d.within_k_tilde0
        ));
    }
    out
}
