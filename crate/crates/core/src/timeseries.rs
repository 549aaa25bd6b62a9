use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::SpectralField;

/// Fields sampled on a uniform time grid `t_i = start + i·dt`.
#[derive(Clone, Debug)]
pub struct TimeSeries {
    start: f64,
    dt: f64,
    slices: Vec<SpectralField>,
}

// Tolerance (in units of dt) when snapping a time onto the grid.
const SNAP: f64 = 1e-9;

impl TimeSeries {
    pub fn new(start: f64, dt: f64, slices: Vec<SpectralField>) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::ShapeMismatch(
                "time series needs at least one slice".into(),
            ));
        }
        if slices.len() > 1 && !(dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {dt}"),
            });
        }
        let first = &slices[0];
        for s in &slices[1..] {
            first.check_same_layout(s)?;
        }
        Ok(Self { start, dt, slices })
    }

    /// Same field at every time of `n_steps + 1` slices.
    pub fn constant(field: SpectralField, start: f64, dt: f64, n_steps: usize) -> Result<Self> {
        Self::new(start, dt, vec![field; n_steps + 1])
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn end(&self) -> f64 {
        self.start + self.dt * (self.slices.len() - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + self.dt * i as f64
    }

    pub fn slices(&self) -> &[SpectralField] {
        &self.slices
    }

    pub fn slice(&self, i: usize) -> &SpectralField {
        &self.slices[i]
    }

    pub fn first(&self) -> &SpectralField {
        &self.slices[0]
    }

    pub fn last(&self) -> &SpectralField {
        self.slices.last().expect("non-empty")
    }

    pub fn into_slices(self) -> Vec<SpectralField> {
        self.slices
    }

    pub fn covers(&self, t: f64) -> bool {
        let tol = SNAP * self.dt.max(1e-300);
        t >= self.start - tol && t <= self.end() + tol
    }

    /// Index of the slice in force at time `t` under the piecewise-constant
    /// (left endpoint) rule: the last grid time `<= t`.
    pub fn index_at(&self, t: f64) -> Result<usize> {
        if !self.covers(t) {
            return Err(Error::TimeGridMismatch {
                grid_start: self.start,
                grid_end: self.end(),
                t0: t,
                t1: t,
            });
        }
        if self.slices.len() == 1 {
            return Ok(0);
        }
        let s = ((t - self.start) / self.dt + SNAP).floor().max(0.0) as usize;
        Ok(s.min(self.slices.len() - 1))
    }

    /// Index of a time that must lie on the grid.
    pub fn exact_index(&self, t: f64) -> Result<usize> {
        let i = self.index_at(t)?;
        if (self.time(i) - t).abs() > SNAP.max(1e-12) * self.dt.max(1.0) * 1e3 {
            return Err(Error::TimeGridMismatch {
                grid_start: self.start,
                grid_end: self.end(),
                t0: t,
                t1: t,
            });
        }
        Ok(i)
    }

    pub fn map(&self, f: impl Fn(&SpectralField) -> Result<SpectralField>) -> Result<TimeSeries> {
        let slices = self.slices.iter().map(f).collect::<Result<Vec<_>>>()?;
        TimeSeries::new(self.start, self.dt, slices)
    }

    /// [`TimeSeries::map`] with slices processed in parallel.
    pub fn par_map(
        &self,
        f: impl Fn(&SpectralField) -> Result<SpectralField> + Sync,
    ) -> Result<TimeSeries> {
        let slices = self.slices.par_iter().map(&f).collect::<Vec<_>>();
        TimeSeries::new(
            self.start,
            self.dt,
            slices.into_iter().collect::<Result<Vec<_>>>()?,
        )
    }

    /// `sup_i g(self_i, other_i)` over matching slices.
    pub fn sup_pairwise(
        &self,
        other: &TimeSeries,
        g: impl Fn(&SpectralField, &SpectralField) -> Result<f64>,
    ) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch(format!(
                "time series of {} and {} slices",
                self.len(),
                other.len()
            )));
        }
        let mut sup: f64 = 0.0;
        for (a, b) in self.slices.iter().zip(&other.slices) {
            sup = sup.max(g(a, b)?);
        }
        Ok(sup)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    #[test]
    fn left_endpoint_lookup() {
        let g = Grid::square(4, 1.0).unwrap();
        let ts = TimeSeries::constant(SpectralField::zeros(g, 1).unwrap(), 0.0, 0.1, 10).unwrap();
        assert_eq!(ts.index_at(0.0).unwrap(), 0);
        assert_eq!(ts.index_at(0.25).unwrap(), 2);
        assert_eq!(ts.index_at(0.3).unwrap(), 3);
        assert_eq!(ts.index_at(1.0).unwrap(), 10);
        assert!(matches!(
            ts.index_at(1.2),
            Err(Error::TimeGridMismatch { .. })
        ));
        assert!(ts.exact_index(0.25).is_err());
        assert_eq!(ts.exact_index(0.7).unwrap(), 7);
    }
}
