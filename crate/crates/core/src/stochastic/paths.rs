//! Euler–Maruyama paths and the Monte Carlo estimators.
//!
//! Time conventions: a batch with `n_steps` steps of size `dt` runs on SDE
//! time `s ∈ [0, T]`, `T = n_steps·dt`. Time-indexed fields are indexed by
//! forward PDE time, so a coefficient needed at SDE time `s` is read at
//! `T - s`, at the left endpoint of each step in `s` and linearly between
//! slices.

use crate::error::{Error, Result};
use crate::spectral::{InterpStencil, SpectralField};
use crate::timeseries::TimeSeries;

use super::brownian::BrownianBatch;
use super::estimate::{par_paths, Estimate};

/// Girsanov weights beyond `e^{±50}` abort the estimate.
pub const LOG_WEIGHT_LIMIT: f64 = 50.0;

/// Positions after integrating every path of a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct PathState {
    pub positions: Vec<[f64; 3]>,
    pub log_weight: Vec<f64>,
    pub time_index: usize,
}

/// Value and Girsanov weight estimates of one driftless-path evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GirsanovEstimate {
    pub value: Estimate,
    pub weight: Estimate,
}

pub(super) fn step_index(batch: &BrownianBatch, t: f64) -> Result<usize> {
    let s = t / batch.dt;
    let k = s.round();
    if (s - k).abs() > 1e-6 || k < 0.0 || k as usize > batch.n_steps {
        return Err(Error::TimeGridMismatch {
            grid_start: 0.0,
            grid_end: batch.horizon(),
            t0: t,
            t1: t,
        });
    }
    Ok(k as usize)
}

/// Position of one SDE step on a field's time grid: slices `lo` and `lo + 1`
/// mixed with weight `w` on the upper one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(super) struct SlicePoint {
    pub(super) lo: usize,
    pub(super) w: f64,
}

/// Time-grid position for every SDE step in `[i0, i1)`, checking coverage.
/// Fields are linear in time between slices, so refining the SDE step
/// converges to the continuous-time coefficients.
pub(super) fn slice_plan(
    batch: &BrownianBatch,
    field: &TimeSeries,
    i0: usize,
    i1: usize,
) -> Result<Vec<SlicePoint>> {
    let horizon = batch.horizon();
    let (lo, hi) = (
        horizon - i1 as f64 * batch.dt,
        horizon - i0 as f64 * batch.dt,
    );
    if i1 > i0 && !(field.covers(lo) && field.covers(hi)) {
        return Err(Error::TimeGridMismatch {
            grid_start: field.start(),
            grid_end: field.end(),
            t0: lo,
            t1: hi,
        });
    }
    let last = field.len() - 1;
    (i0..i1)
        .map(|k| {
            let tau = horizon - k as f64 * batch.dt;
            let lo = field.index_at(tau)?;
            let w = ((tau - field.time(lo)) / field.dt()).clamp(0.0, 1.0);
            // on-grid times read a single slice bit-exactly
            Ok(if lo == last || w < 1e-9 {
                SlicePoint { lo, w: 0.0 }
            } else if w > 1.0 - 1e-9 {
                SlicePoint { lo: lo + 1, w: 0.0 }
            } else {
                SlicePoint { lo, w }
            })
        })
        .collect()
}

pub(super) fn check_field(
    batch: &BrownianBatch,
    field: &SpectralField,
    vector: bool,
) -> Result<()> {
    if field.dim() != batch.dim {
        return Err(Error::ShapeMismatch(format!(
            "{}-dimensional field with a {}-dimensional batch",
            field.dim(),
            batch.dim
        )));
    }
    if vector && field.n_components() != field.dim() {
        return Err(Error::ShapeMismatch("expected a vector field".into()));
    }
    Ok(())
}

pub(super) fn check_series(batch: &BrownianBatch, series: &TimeSeries) -> Result<()> {
    check_field(batch, series.first(), true)?;
    // force lazy synthesis before sharing across threads
    for s in series.slices() {
        s.values();
    }
    Ok(())
}

#[inline]
pub(super) fn wrap(x: &mut [f64; 3], dim: usize, length: f64) {
    for v in x.iter_mut().take(dim) {
        *v = v.rem_euclid(length);
        // rem_euclid may round up to `length`
        if *v >= length {
            *v -= length;
        }
    }
}

/// Components of `series` at a plan point, through one spatial stencil.
#[inline]
fn sample_at(series: &TimeSeries, sp: SlicePoint, st: &InterpStencil, out: &mut [f64; 3]) {
    let f = series.slice(sp.lo);
    for (c, o) in out.iter_mut().enumerate().take(f.n_components()) {
        *o = st.apply(f.component_values(c));
    }
    if sp.w > 0.0 {
        let g = series.slice(sp.lo + 1);
        for (c, o) in out.iter_mut().enumerate().take(g.n_components()) {
            *o = (1.0 - sp.w) * *o + sp.w * st.apply(g.component_values(c));
        }
    }
}

/// Euler–Maruyama for `dX = √(2ν) dW - v(T - s, X) ds` on `[t0, t1]`, one
/// path per start point. `drift = None` means `v ≡ 0`; the periodic box
/// length is taken from `drift` (or `box_length` when there is none).
pub fn integrate_sde(
    batch: &BrownianBatch,
    drift: Option<&TimeSeries>,
    nu: f64,
    box_length: f64,
    start: &[[f64; 3]],
    t0: f64,
    t1: f64,
) -> Result<PathState> {
    if !(nu >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "nu",
            reason: format!("must be non-negative, got {nu}"),
        });
    }
    if start.len() > batch.n_paths {
        return Err(Error::ShapeMismatch(format!(
            "{} start points for {} paths",
            start.len(),
            batch.n_paths
        )));
    }
    let (i0, i1) = (step_index(batch, t0)?, step_index(batch, t1)?);
    if i1 < i0 {
        return Err(Error::TimeGridMismatch {
            grid_start: 0.0,
            grid_end: batch.horizon(),
            t0,
            t1,
        });
    }
    let plan = match drift {
        Some(d) => {
            check_series(batch, d)?;
            slice_plan(batch, d, i0, i1)?
        }
        None => Vec::new(),
    };
    let length = drift.map_or(box_length, |d| d.first().grid().length());
    let sigma = (2.0 * nu).sqrt();
    let dim = batch.dim;
    let positions = par_paths(start.len(), |p| {
        let mut x = start[p];
        wrap(&mut x, dim, length);
        let mut noise = batch.stream(p, i0);
        let mut v = [0.0; 3];
        for k in 0..i1 - i0 {
            if let Some(d) = drift {
                sample_at(
                    d,
                    plan[k],
                    &InterpStencil::new(d.first().grid(), &x),
                    &mut v,
                );
            }
            let dw = noise.next_increment();
            for a in 0..dim {
                x[a] += sigma * dw[a] - v[a] * batch.dt;
            }
            wrap(&mut x, dim, length);
        }
        Ok(x)
    })?;
    Ok(PathState {
        log_weight: vec![0.0; positions.len()],
        positions,
        time_index: i1,
    })
}

/// Girsanov estimate of the linear BSDE value at `(t, x)`:
/// `E[ξ(x + √(2ν)B_T) · exp(-∫⟨h, dB⟩ - ½∫|h|² ds)]` over driftless paths
/// started at time `t`, with `h(s, ·)` read from the slice at `T - s`.
pub fn girsanov_estimate(
    batch: &BrownianBatch,
    h: Option<&TimeSeries>,
    terminal: &SpectralField,
    nu: f64,
    x: &[f64],
    t: f64,
) -> Result<GirsanovEstimate> {
    check_field(batch, terminal, false)?;
    if terminal.n_components() != 1 {
        return Err(Error::ShapeMismatch("terminal value must be scalar".into()));
    }
    let i0 = step_index(batch, t)?;
    let i1 = batch.n_steps;
    let plan = match h {
        Some(h) => {
            check_series(batch, h)?;
            slice_plan(batch, h, i0, i1)?
        }
        None => Vec::new(),
    };
    let grid = terminal.grid();
    let xi = terminal.values();
    let length = grid.length();
    let sigma = (2.0 * nu).sqrt();
    let dim = batch.dim;
    let mut x0 = [0.0; 3];
    x0[..dim].copy_from_slice(&x[..dim]);
    let samples = par_paths(batch.n_paths, |p| {
        let mut y = x0;
        wrap(&mut y, dim, length);
        let mut noise = batch.stream(p, i0);
        let mut log_w = 0.0;
        let mut hv = [0.0; 3];
        for k in 0..i1 - i0 {
            let db = noise.next_increment();
            if let Some(hs) = h {
                sample_at(
                    hs,
                    plan[k],
                    &InterpStencil::new(hs.first().grid(), &y),
                    &mut hv,
                );
                let (mut dot, mut sq) = (0.0, 0.0);
                for a in 0..dim {
                    dot += hv[a] * db[a];
                    sq += hv[a] * hv[a];
                }
                log_w -= dot + 0.5 * sq * batch.dt;
                if log_w.abs() > LOG_WEIGHT_LIMIT {
                    return Err(Error::WeightOverflow {
                        path: p,
                        log_weight: log_w,
                    });
                }
            }
            for a in 0..dim {
                y[a] += sigma * db[a];
            }
            wrap(&mut y, dim, length);
        }
        let w = log_w.exp();
        Ok((w * InterpStencil::new(grid, &y).apply(xi), w))
    })?;
    let (values, weights): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
    Ok(GirsanovEstimate {
        value: Estimate::from_samples(&values),
        weight: Estimate::from_samples(&weights),
    })
}

/// Value part of [`girsanov_estimate`].
pub fn girsanov_value(
    batch: &BrownianBatch,
    h: Option<&TimeSeries>,
    terminal: &SpectralField,
    nu: f64,
    x: &[f64],
    t: f64,
) -> Result<Estimate> {
    girsanov_estimate(batch, h, terminal, nu, x, t).map(|g| g.value)
}

/// Feynman–Kac estimate along characteristics started at `(t, x)`:
/// `E[terminal(X_T) + Σ_k source(T - s_k, X_{s_k}) dt]`, one estimate per
/// component of `terminal`. `source`, when present, must have as many
/// components as `terminal`.
pub fn characteristics_value(
    batch: &BrownianBatch,
    drift: Option<&TimeSeries>,
    terminal: &SpectralField,
    source: Option<&TimeSeries>,
    nu: f64,
    x: &[f64],
    t: f64,
) -> Result<Vec<Estimate>> {
    check_field(batch, terminal, false)?;
    let n_comp = terminal.n_components();
    let i0 = step_index(batch, t)?;
    let i1 = batch.n_steps;
    let drift_plan = match drift {
        Some(d) => {
            check_series(batch, d)?;
            slice_plan(batch, d, i0, i1)?
        }
        None => Vec::new(),
    };
    let source_plan = match source {
        Some(s) => {
            check_field(batch, s.first(), false)?;
            if s.first().n_components() != n_comp {
                return Err(Error::ShapeMismatch(
                    "source and terminal have different component counts".into(),
                ));
            }
            for f in s.slices() {
                f.values();
            }
            slice_plan(batch, s, i0, i1)?
        }
        None => Vec::new(),
    };
    let grid = terminal.grid();
    terminal.values();
    let length = grid.length();
    let sigma = (2.0 * nu).sqrt();
    let dim = batch.dim;
    let mut x0 = [0.0; 3];
    x0[..dim].copy_from_slice(&x[..dim]);
    let samples = par_paths(batch.n_paths, |p| {
        let mut y = x0;
        wrap(&mut y, dim, length);
        let mut noise = batch.stream(p, i0);
        let mut acc = [0.0; 3];
        let mut v = [0.0; 3];
        let mut src = [0.0; 3];
        for k in 0..i1 - i0 {
            if let Some(s) = source {
                sample_at(
                    s,
                    source_plan[k],
                    &InterpStencil::new(s.first().grid(), &y),
                    &mut src,
                );
                for (a, v) in acc.iter_mut().zip(&src).take(n_comp) {
                    *a += v * batch.dt;
                }
            }
            if let Some(d) = drift {
                sample_at(
                    d,
                    drift_plan[k],
                    &InterpStencil::new(d.first().grid(), &y),
                    &mut v,
                );
            }
            let dw = noise.next_increment();
            for a in 0..dim {
                y[a] += sigma * dw[a] - v[a] * batch.dt;
            }
            wrap(&mut y, dim, length);
        }
        let st = InterpStencil::new(grid, &y);
        for (c, a) in acc.iter_mut().enumerate().take(n_comp) {
            *a += st.apply(terminal.component_values(c));
        }
        Ok(acc)
    })?;
    Ok((0..n_comp)
        .map(|c| Estimate::from_samples(&samples.iter().map(|s| s[c]).collect::<Vec<_>>()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    fn constant_drift(c: [f64; 2], n_steps: usize, dt: f64) -> TimeSeries {
        let grid = Grid::square(8, 1.0).unwrap();
        let f = SpectralField::from_fn(grid, 2, |_, k| c[k]).unwrap();
        TimeSeries::constant(f, 0.0, dt, n_steps).unwrap()
    }

    #[test]
    fn zero_noise_zero_drift_keeps_positions() {
        let b = BrownianBatch::generate(3, 2, 10, 0.1, 2).unwrap();
        let start = [[0.25, 0.5, 0.0], [0.75, 0.125, 0.0]];
        let s = integrate_sde(&b, None, 0.0, 1.0, &start, 0.0, 1.0).unwrap();
        assert_eq!(s.positions, start.to_vec());
        assert_eq!(s.time_index, 10);
    }

    #[test]
    fn constant_drift_without_noise_is_exact() {
        let (n, dt) = (8, 0.125 / 8.0);
        let b = BrownianBatch::generate(3, 1, n, dt, 2).unwrap();
        let drift = constant_drift([1.0, -2.0], n, dt);
        let s = integrate_sde(&b, Some(&drift), 0.0, 1.0, &[[0.5, 0.5, 0.0]], 0.0, 0.125).unwrap();
        assert!((s.positions[0][0] - 0.375).abs() < 1e-14);
        assert!((s.positions[0][1] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn constant_source_integrates_exactly() {
        let (n, dt) = (20, 0.05);
        let b = BrownianBatch::generate(5, 64, n, dt, 2).unwrap();
        let grid = Grid::square(8, 1.0).unwrap();
        let zero = SpectralField::zeros(grid.clone(), 1).unwrap();
        let c = SpectralField::from_fn(grid, 1, |_, _| 3.0).unwrap();
        let source = TimeSeries::constant(c, 0.0, dt, n).unwrap();
        let drift = constant_drift([0.3, 0.1], n, dt);
        let est = characteristics_value(
            &b,
            Some(&drift),
            &zero,
            Some(&source),
            0.2,
            &[0.1, 0.2],
            0.4,
        )
        .unwrap();
        assert!((est[0].mean - 3.0 * 0.6).abs() < 1e-12);
    }

    #[test]
    fn start_time_off_the_step_grid_is_rejected() {
        let b = BrownianBatch::generate(1, 1, 10, 0.1, 2).unwrap();
        let r = integrate_sde(&b, None, 0.1, 1.0, &[[0.0; 3]], 0.05, 1.0);
        assert!(matches!(r, Err(Error::TimeGridMismatch { .. })));
    }

    #[test]
    fn drift_series_too_short_is_rejected() {
        let b = BrownianBatch::generate(1, 1, 10, 0.1, 2).unwrap();
        let drift = constant_drift([0.0, 0.0], 4, 0.1);
        let r = integrate_sde(&b, Some(&drift), 0.1, 1.0, &[[0.0; 3]], 0.0, 1.0);
        assert!(matches!(r, Err(Error::TimeGridMismatch { .. })));
    }

    #[test]
    fn huge_girsanov_drift_overflows() {
        let (n, dt) = (100, 0.01);
        let b = BrownianBatch::generate(1, 4, n, dt, 2).unwrap();
        let h = constant_drift([100.0, 0.0], n, dt);
        let grid = Grid::square(8, 1.0).unwrap();
        let xi = SpectralField::zeros(grid, 1).unwrap();
        let r = girsanov_value(&b, Some(&h), &xi, 0.1, &[0.0, 0.0], 0.0);
        assert!(matches!(r, Err(Error::WeightOverflow { path: 0, .. })));
    }
}
