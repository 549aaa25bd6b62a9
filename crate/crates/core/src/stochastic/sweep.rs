//! Step-major Feynman–Kac evaluation.
//!
//! All paths of a group of evaluations advance one step at a time, so only
//! the one or two coefficient slices of the current step need to exist on
//! the refined grid.

use std::borrow::Cow;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::{InterpStencil, SpectralField};
use crate::timeseries::TimeSeries;

use super::brownian::{BrownianBatch, IncrementStream};
use super::estimate::Estimate;
use super::paths::{check_field, check_series, slice_plan, step_index, wrap, SlicePoint};
use super::refine_field;

// Path states advanced together; bounds the memory of one group.
const GROUP_STATES: usize = 1 << 17;

struct Slot {
    y: [f64; 3],
    acc: [f64; 3],
    noise: IncrementStream,
    first_step: usize,
}

/// Refined copies of the slices needed at the current step.
struct SliceCache<'a> {
    series: &'a TimeSeries,
    factor: usize,
    held: Vec<(usize, Cow<'a, SpectralField>)>,
}

impl<'a> SliceCache<'a> {
    fn new(series: &'a TimeSeries, factor: usize) -> Self {
        Self {
            series,
            factor,
            held: Vec::new(),
        }
    }

    fn prepare(&mut self, sp: SlicePoint) -> Result<()> {
        let need: &[usize] = &if sp.w > 0.0 {
            vec![sp.lo, sp.lo + 1]
        } else {
            vec![sp.lo]
        };
        self.held.retain(|(i, _)| need.contains(i));
        for &i in need {
            if self.held.iter().any(|(j, _)| *j == i) {
                continue;
            }
            let f = if self.factor > 1 {
                let f = refine_field(self.series.slice(i), self.factor)?;
                f.values();
                Cow::Owned(f)
            } else {
                Cow::Borrowed(self.series.slice(i))
            };
            self.held.push((i, f));
        }
        Ok(())
    }

    fn get(&self, i: usize) -> &SpectralField {
        &self
            .held
            .iter()
            .find(|(j, _)| *j == i)
            .expect("slice prepared")
            .1
    }

    /// Components at `y`, linear in time between the held slices.
    fn sample(&self, sp: SlicePoint, y: &[f64], out: &mut [f64; 3]) {
        let f = self.get(sp.lo);
        let st = InterpStencil::new(f.grid(), y);
        for (c, o) in out.iter_mut().enumerate().take(f.n_components()) {
            *o = st.apply(f.component_values(c));
        }
        if sp.w > 0.0 {
            let g = self.get(sp.lo + 1);
            for (c, o) in out.iter_mut().enumerate().take(g.n_components()) {
                *o = (1.0 - sp.w) * *o + sp.w * st.apply(g.component_values(c));
            }
        }
    }
}

/// [`super::characteristics_value`] for many `(x, t)` starts at once, with
/// the terminal value, drift and source all resampled `refine` times finer.
/// Returns one estimate per start and component, in the order of `starts`.
pub fn characteristics_sweep(
    batch: &BrownianBatch,
    drift: Option<&TimeSeries>,
    terminal: &SpectralField,
    source: Option<&TimeSeries>,
    nu: f64,
    starts: &[([f64; 3], f64)],
    refine: usize,
) -> Result<Vec<Vec<Estimate>>> {
    check_field(batch, terminal, false)?;
    let n_comp = terminal.n_components();
    let first: Vec<usize> = starts
        .iter()
        .map(|(_, t)| step_index(batch, *t))
        .collect::<Result<_>>()?;
    let Some(&k_min) = first.iter().min() else {
        return Ok(Vec::new());
    };
    let n_steps = batch.n_steps;
    let drift_plan = match drift {
        Some(d) => {
            check_series(batch, d)?;
            slice_plan(batch, d, k_min, n_steps)?
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
            slice_plan(batch, s, k_min, n_steps)?
        }
        None => Vec::new(),
    };
    let terminal = refine_field(terminal, refine)?;
    terminal.values();
    let length = terminal.grid().length();
    let sigma = (2.0 * nu).sqrt();
    let dim = batch.dim;
    let dt = batch.dt;
    let n_paths = batch.n_paths;
    let group = (GROUP_STATES / n_paths.max(1)).max(1);

    let mut out = Vec::with_capacity(starts.len());
    for (chunk, chunk_first) in starts.chunks(group).zip(first.chunks(group)) {
        let mut slots: Vec<Slot> = chunk
            .iter()
            .zip(chunk_first)
            .flat_map(|((x, _), &i0)| {
                (0..n_paths).map(move |p| {
                    let mut y = *x;
                    wrap(&mut y, dim, length);
                    Slot {
                        y,
                        acc: [0.0; 3],
                        noise: batch.stream(p, i0),
                        first_step: i0,
                    }
                })
            })
            .collect();
        let mut drift_cache = drift.map(|d| SliceCache::new(d, refine));
        let mut source_cache = source.map(|s| SliceCache::new(s, refine));
        let k_start = chunk_first.iter().copied().min().unwrap_or(n_steps);
        for k in k_start..n_steps {
            let j = k - k_min;
            if let Some(c) = drift_cache.as_mut() {
                c.prepare(drift_plan[j])?;
            }
            if let Some(c) = source_cache.as_mut() {
                c.prepare(source_plan[j])?;
            }
            let (dc, sc) = (drift_cache.as_ref(), source_cache.as_ref());
            slots
                .par_iter_mut()
                .filter(|s| k >= s.first_step)
                .for_each(|s| {
                    let mut v = [0.0; 3];
                    if let Some(sc) = sc {
                        let mut src = [0.0; 3];
                        sc.sample(source_plan[j], &s.y[..dim], &mut src);
                        for c in 0..n_comp {
                            s.acc[c] += src[c] * dt;
                        }
                    }
                    if let Some(dc) = dc {
                        dc.sample(drift_plan[j], &s.y[..dim], &mut v);
                    }
                    let dw = s.noise.next_increment();
                    for a in 0..dim {
                        s.y[a] += sigma * dw[a] - v[a] * dt;
                    }
                    wrap(&mut s.y, dim, length);
                });
        }
        let finals: Vec<[f64; 3]> = slots
            .par_iter()
            .map(|s| {
                let st = InterpStencil::new(terminal.grid(), &s.y[..dim]);
                let mut r = s.acc;
                for (c, r) in r.iter_mut().enumerate().take(n_comp) {
                    *r += st.apply(terminal.component_values(c));
                }
                r
            })
            .collect();
        for paths in finals.chunks(n_paths) {
            out.push(
                (0..n_comp)
                    .map(|c| {
                        Estimate::from_samples(&paths.iter().map(|s| s[c]).collect::<Vec<_>>())
                    })
                    .collect(),
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;
    use crate::stochastic::characteristics_value;

    fn series(
        grid: &Grid,
        n: usize,
        dt: f64,
        f: impl Fn(&[f64], usize, f64) -> f64,
        comps: usize,
    ) -> TimeSeries {
        let slices = (0..=n)
            .map(|i| {
                SpectralField::from_fn(grid.clone(), comps, |x, c| f(x, c, i as f64 * dt)).unwrap()
            })
            .collect();
        TimeSeries::new(0.0, dt, slices).unwrap()
    }

    #[test]
    fn matches_path_major_estimator_without_refinement() {
        let grid = Grid::square(16, 1.0).unwrap();
        let (n, dt) = (10, 0.02);
        let tau = std::f64::consts::TAU;
        let drift = series(
            &grid,
            n,
            dt,
            |x, c, t| 0.3 * ((tau * x[1 - c]).sin() + t),
            2,
        );
        let source = series(&grid, n, dt, |x, _, t| (tau * x[0]).cos() * (1.0 + t), 1);
        let terminal =
            SpectralField::scalar_from_fn(grid.clone(), |x| (tau * (x[0] + x[1])).sin()).unwrap();
        let batch = BrownianBatch::generate(11, 200, n, dt, 2).unwrap();
        let starts = [
            ([0.1, 0.7, 0.0], 0.0),
            ([0.5, 0.2, 0.0], 0.1),
            ([0.9, 0.9, 0.0], 0.2),
        ];
        let sweep = characteristics_sweep(
            &batch,
            Some(&drift),
            &terminal,
            Some(&source),
            0.05,
            &starts,
            1,
        )
        .unwrap();
        for (e, (x, t)) in sweep.iter().zip(&starts) {
            let direct =
                characteristics_value(&batch, Some(&drift), &terminal, Some(&source), 0.05, x, *t)
                    .unwrap();
            assert_eq!(e[0].mean.to_bits(), direct[0].mean.to_bits());
            assert_eq!(e[0].stderr.to_bits(), direct[0].stderr.to_bits());
        }
    }

    #[test]
    fn grouping_does_not_change_results() {
        let grid = Grid::square(8, 1.0).unwrap();
        let terminal = SpectralField::scalar_from_fn(grid, |x| x[0].sin()).unwrap();
        let batch = BrownianBatch::generate(2, GROUP_STATES / 2 + 1, 4, 0.05, 2).unwrap();
        let starts = [([0.3, 0.3, 0.0], 0.0), ([0.6, 0.1, 0.0], 0.05)];
        let both = characteristics_sweep(&batch, None, &terminal, None, 0.1, &starts, 2).unwrap();
        let one =
            characteristics_sweep(&batch, None, &terminal, None, 0.1, &starts[1..], 2).unwrap();
        assert_eq!(both[1], one[0]);
    }
}
