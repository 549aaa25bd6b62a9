use std::sync::OnceLock;

use bitflags::bitflags;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fft;
use super::grid::Grid;
use crate::error::{Error, Result};

bitflags! {
    /// Structural properties a field is known to satisfy.
    #[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
    pub struct FieldFlags: u32 {
        const MEAN_ZERO = 0b01;
        const DIVERGENCE_FREE = 0b10;
    }
}

/// Scalar or vector field on a periodic grid.
///
/// Grid samples and Fourier coefficients are both cached; whichever is
/// missing is computed on first access. Components are stacked, each stored
/// row-major over the grid.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    n_components: usize,
    values: OnceLock<Vec<f64>>,
    coeffs: OnceLock<Vec<Complex64>>,
    flags: FieldFlags,
}

impl SpectralField {
    pub fn from_values(grid: Grid, n_components: usize, values: Vec<f64>) -> Result<Self> {
        check_components(&grid, n_components)?;
        if values.len() != grid.len() * n_components {
            return Err(Error::ShapeMismatch(format!(
                "expected {} samples, got {}",
                grid.len() * n_components,
                values.len()
            )));
        }
        Ok(Self {
            grid,
            n_components,
            values: OnceLock::from(values),
            coeffs: OnceLock::new(),
            flags: FieldFlags::empty(),
        })
    }

    /// Build from Fourier coefficients. The coefficients must be Hermitian
    /// (coefficients of a real field); only the real part of the synthesis
    /// is kept.
    pub fn from_coeffs(grid: Grid, n_components: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        check_components(&grid, n_components)?;
        if coeffs.len() != grid.len() * n_components {
            return Err(Error::ShapeMismatch(format!(
                "expected {} coefficients, got {}",
                grid.len() * n_components,
                coeffs.len()
            )));
        }
        Ok(Self {
            grid,
            n_components,
            values: OnceLock::new(),
            coeffs: OnceLock::from(coeffs),
            flags: FieldFlags::empty(),
        })
    }

    pub fn zeros(grid: Grid, n_components: usize) -> Result<Self> {
        let n = grid.len() * n_components;
        let mut f = Self::from_values(grid, n_components, vec![0.0; n])?;
        f.flags = FieldFlags::MEAN_ZERO | FieldFlags::DIVERGENCE_FREE;
        Ok(f)
    }

    /// Sample `f(x, component)` at every grid point.
    pub fn from_fn(
        grid: Grid,
        n_components: usize,
        f: impl Fn(&[f64], usize) -> f64,
    ) -> Result<Self> {
        let n = grid.len();
        let dim = grid.dim();
        let mut values = Vec::with_capacity(n * n_components);
        for c in 0..n_components {
            for p in 0..n {
                let x = grid.coords(p);
                values.push(f(&x[..dim], c));
            }
        }
        Self::from_values(grid, n_components, values)
    }

    pub fn scalar_from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::from_fn(grid, 1, |x, _| f(x))
    }

    /// Stack scalar fields on a common grid into one multi-component field.
    pub fn from_components(components: &[SpectralField]) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::ShapeMismatch("no components given".into()))?;
        let grid = first.grid.clone();
        let mut coeffs = Vec::with_capacity(grid.len() * components.len());
        for c in components {
            if c.grid != grid {
                return Err(Error::ShapeMismatch(
                    "components live on different grids".into(),
                ));
            }
            coeffs.extend_from_slice(c.coeffs());
        }
        Self::from_coeffs(grid, coeffs.len() / first.grid.len(), coeffs)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn is_vector(&self) -> bool {
        self.n_components == self.grid.dim() && self.n_components > 1
    }

    pub fn flags(&self) -> FieldFlags {
        self.flags
    }

    pub fn with_flags(mut self, flags: FieldFlags) -> Self {
        self.flags = flags;
        self
    }

    pub fn values(&self) -> &[f64] {
        self.values.get_or_init(|| {
            let coeffs = self
                .coeffs
                .get()
                .expect("field has neither values nor coefficients");
            fft::inverse_real(&self.grid, coeffs)
        })
    }

    pub fn coeffs(&self) -> &[Complex64] {
        self.coeffs.get_or_init(|| {
            let values = self
                .values
                .get()
                .expect("field has neither values nor coefficients");
            fft::forward_real(&self.grid, values)
        })
    }

    pub fn component_values(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values()[c * n..(c + 1) * n]
    }

    pub fn component_coeffs(&self, c: usize) -> &[Complex64] {
        let n = self.grid.len();
        &self.coeffs()[c * n..(c + 1) * n]
    }

    pub fn component(&self, c: usize) -> SpectralField {
        let n = self.grid.len();
        match (self.coeffs.get(), self.values.get()) {
            (Some(cf), _) => {
                Self::from_coeffs(self.grid.clone(), 1, cf[c * n..(c + 1) * n].to_vec())
            }
            (None, Some(v)) => {
                Self::from_values(self.grid.clone(), 1, v[c * n..(c + 1) * n].to_vec())
            }
            (None, None) => unreachable!("field has neither values nor coefficients"),
        }
        .expect("component slice has the grid size")
    }

    /// Apply a per-mode multiplier to every component.
    pub fn map_modes(&self, multiplier: impl Fn(&super::grid::Mode) -> Complex64) -> SpectralField {
        let n = self.grid.len();
        let table: Vec<Complex64> = self.grid.modes().map(|m| multiplier(&m)).collect();
        let coeffs = self
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| c * table[i % n])
            .collect();
        Self::from_coeffs(self.grid.clone(), self.n_components, coeffs).expect("same layout")
    }

    fn zip_with(
        &self,
        other: &SpectralField,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<SpectralField> {
        self.check_same_layout(other)?;
        let values = self
            .values()
            .iter()
            .zip(other.values())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_values(self.grid.clone(), self.n_components, values)
    }

    /// `a·self + b·other`, computed on the Fourier side when both sides are
    /// already synchronised there.
    pub fn linear_combination(
        &self,
        a: f64,
        other: &SpectralField,
        b: f64,
    ) -> Result<SpectralField> {
        self.check_same_layout(other)?;
        if let (Some(x), Some(y)) = (self.coeffs.get(), other.coeffs.get()) {
            let coeffs = x.iter().zip(y).map(|(p, q)| p * a + q * b).collect();
            let mut out = Self::from_coeffs(self.grid.clone(), self.n_components, coeffs)?;
            out.flags = self.flags & other.flags;
            return Ok(out);
        }
        let mut out = self.zip_with(other, |p, q| a * p + b * q)?;
        out.flags = self.flags & other.flags;
        Ok(out)
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.linear_combination(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.linear_combination(1.0, other, -1.0)
    }

    pub fn scale(&self, s: f64) -> SpectralField {
        let mut out = if let Some(c) = self.coeffs.get() {
            Self::from_coeffs(
                self.grid.clone(),
                self.n_components,
                c.iter().map(|z| z * s).collect(),
            )
        } else {
            Self::from_values(
                self.grid.clone(),
                self.n_components,
                self.values().iter().map(|v| v * s).collect(),
            )
        }
        .expect("same layout");
        out.flags = self.flags;
        out
    }

    pub fn check_same_layout(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid || self.n_components != other.n_components {
            return Err(Error::ShapeMismatch(format!(
                "{:?}x{} vs {:?}x{}",
                self.grid.shape(),
                self.n_components,
                other.grid.shape(),
                other.n_components
            )));
        }
        Ok(())
    }

    /// Zero-mode coefficient (the spatial mean) of component `c`.
    pub fn mean(&self, c: usize) -> f64 {
        self.component_coeffs(c)[0].re
    }

    /// Largest zero-mode magnitude relative to the largest coefficient.
    pub fn relative_mean(&self) -> f64 {
        let max = self.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            return 0.0;
        }
        (0..self.n_components)
            .map(|c| self.component_coeffs(c)[0].norm())
            .fold(0.0, f64::max)
            / max
    }

    /// Error unless every component has zero mean to `tol` (relative).
    pub fn require_mean_zero(&self, tol: f64) -> Result<()> {
        let relative = self.relative_mean();
        if relative > tol {
            return Err(Error::NonZeroMean { relative });
        }
        Ok(())
    }

    /// Copy with the zero mode removed from every component.
    pub fn remove_mean(&self) -> SpectralField {
        let n = self.grid.len();
        let mut coeffs = self.coeffs().to_vec();
        for c in 0..self.n_components {
            coeffs[c * n] = Complex64::default();
        }
        Self::from_coeffs(self.grid.clone(), self.n_components, coeffs)
            .expect("same layout")
            .with_flags(self.flags | FieldFlags::MEAN_ZERO)
    }

    /// Copy truncated to the 2/3-rule band on every axis.
    pub fn dealias(&self) -> SpectralField {
        let dim = self.grid.dim();
        let cut: Vec<f64> = (0..dim).map(|a| self.grid.dealias_cutoff(a)).collect();
        self.map_modes(|m| {
            if (0..dim).all(|a| m.k[a].abs() <= cut[a]) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::default()
            }
        })
        .with_flags(self.flags)
    }

    /// Trigonometric interpolant sampled on `grid` (same dimension and box):
    /// coefficients are zero-padded or truncated, Nyquist bins dropped.
    pub fn resample(&self, grid: &Grid) -> Result<SpectralField> {
        if grid.dim() != self.dim() || grid.length() != self.grid.length() {
            return Err(Error::ShapeMismatch(
                "resampling needs the same dimension and box".into(),
            ));
        }
        let (n_old, n_new) = (self.grid.len(), grid.len());
        let old_shape = self.grid.shape();
        let new_shape = grid.shape();
        let mut out = vec![Complex64::default(); n_new * self.n_components];
        for m in grid.modes() {
            let mut idx = [0usize; 3];
            let mut keep = true;
            for a in 0..self.dim() {
                let k = m.k[a] as i64;
                let limit = old_shape[a].min(new_shape[a]) as i64;
                // strictly inside both bands: no Nyquist bin on either grid
                if 2 * k.abs() >= limit {
                    keep = false;
                    break;
                }
                idx[a] = k.rem_euclid(old_shape[a] as i64) as usize;
            }
            if !keep {
                continue;
            }
            let src = self.grid.flat_index(&idx[..self.dim()]);
            for c in 0..self.n_components {
                out[c * n_new + m.flat] = self.coeffs()[c * n_old + src];
            }
        }
        Ok(Self::from_coeffs(grid.clone(), self.n_components, out)?.with_flags(self.flags))
    }

    /// `L^2` norm over the box (all components).
    pub fn l2_norm(&self) -> f64 {
        (self.values().iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    /// `L^2` inner product over the box.
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        self.check_same_layout(other)?;
        Ok(self
            .values()
            .iter()
            .zip(other.values())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_volume())
    }

    /// `L^p` norm over the box by grid quadrature.
    pub fn lp_norm(&self, p: f64) -> f64 {
        (self.values().iter().map(|v| v.abs().powf(p)).sum::<f64>() * self.grid.cell_volume())
            .powf(1.0 / p)
    }

    pub fn max_abs(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Periodic multilinear interpolation of component `c` at `x`.
    pub fn interpolate(&self, c: usize, x: &[f64]) -> f64 {
        interpolate_periodic(&self.grid, self.component_values(c), x)
    }

    /// Evaluate the trigonometric (Fourier) interpolant of component `c` at
    /// an arbitrary point. Costs one pass over all modes.
    pub fn evaluate_spectral(&self, c: usize, x: &[f64]) -> f64 {
        let two_pi_over_l = 2.0 * std::f64::consts::PI / self.grid.length();
        let coeffs = self.component_coeffs(c);
        self.grid
            .modes()
            .map(|m| {
                let phase: f64 =
                    (0..self.dim()).map(|a| m.kd[a] * x[a]).sum::<f64>() * two_pi_over_l;
                (coeffs[m.flat] * Complex64::from_polar(1.0, phase)).re
            })
            .sum()
    }
}

fn check_components(grid: &Grid, n_components: usize) -> Result<()> {
    if n_components == 0 {
        return Err(Error::InvalidParameter {
            name: "n_components",
            reason: "must be positive".into(),
        });
    }
    if n_components != 1 && n_components != grid.dim() {
        return Err(Error::InvalidParameter {
            name: "n_components",
            reason: format!(
                "must be 1 or the dimension {}, got {n_components}",
                grid.dim()
            ),
        });
    }
    Ok(())
}

/// Corner indices and weights of the periodic multilinear stencil at a point.
#[derive(Clone, Copy, Debug)]
pub struct InterpStencil {
    pub index: [usize; 8],
    pub weight: [f64; 8],
    pub len: usize,
}

impl InterpStencil {
    pub fn new(grid: &Grid, x: &[f64]) -> Self {
        let dim = grid.dim();
        let shape = grid.shape();
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..dim {
            let s = x[a] / grid.spacing(a);
            let fl = s.floor();
            frac[a] = s - fl;
            base[a] = (fl as i64).rem_euclid(shape[a] as i64) as usize;
        }
        let len = 1usize << dim;
        let mut index = [0usize; 8];
        let mut weight = [0.0f64; 8];
        for corner in 0..len {
            let mut w = 1.0;
            let mut flat = 0usize;
            for a in 0..dim {
                let bit = (corner >> a) & 1;
                let i = if bit == 1 {
                    (base[a] + 1) % shape[a]
                } else {
                    base[a]
                };
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                flat = flat * shape[a] + i;
            }
            index[corner] = flat;
            weight[corner] = w;
        }
        Self { index, weight, len }
    }

    #[inline]
    pub fn apply(&self, samples: &[f64]) -> f64 {
        (0..self.len)
            .map(|c| self.weight[c] * samples[self.index[c]])
            .sum()
    }
}

/// Periodic multilinear interpolation of one component's samples.
pub fn interpolate_periodic(grid: &Grid, samples: &[f64], x: &[f64]) -> f64 {
    InterpStencil::new(grid, x).apply(samples)
}

/// Random band-limited field: independent complex Gaussian coefficients on
/// all modes with `|k_j| <= kmax`, zero mean, real-valued.
pub fn random_band_field(
    grid: &Grid,
    n_components: usize,
    kmax: usize,
    seed: u64,
) -> Result<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.len();
    let dim = grid.dim();
    let mut coeffs = vec![Complex64::default(); n * n_components];
    for c in 0..n_components {
        for m in grid.modes() {
            if m.is_zero() || (0..dim).any(|a| m.kd[a].abs() > kmax as f64 || m.kd[a] != m.k[a]) {
                continue;
            }
            let re: f64 = rng.random::<f64>() - 0.5;
            let im: f64 = rng.random::<f64>() - 0.5;
            coeffs[c * n + m.flat] = Complex64::new(re, im);
        }
    }
    // Real part of the synthesis is band-limited with Hermitian coefficients.
    let values: Vec<f64> = fft::inverse_real(grid, &coeffs);
    Ok(
        SpectralField::from_values(grid.clone(), n_components, values)?
            .remove_mean()
            .with_flags(FieldFlags::MEAN_ZERO),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn round_trip_values_coeffs() {
        let grid = Grid::square(32, 1.0).unwrap();
        let f = random_band_field(&grid, 2, 12, 7).unwrap();
        let back = SpectralField::from_coeffs(grid.clone(), 2, f.coeffs().to_vec()).unwrap();
        let scale = f.max_abs();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn resampling_preserves_band_limited_fields() {
        let coarse = Grid::square(16, 2.0).unwrap();
        let fine = Grid::square(40, 2.0).unwrap();
        let f =
            |x: &[f64]| (PI * x[0]).sin() * (2.0 * PI * x[1]).cos() + 0.3 * (3.0 * PI * x[1]).sin();
        let up = SpectralField::scalar_from_fn(coarse.clone(), f)
            .unwrap()
            .resample(&fine)
            .unwrap();
        let exact = SpectralField::scalar_from_fn(fine.clone(), f).unwrap();
        assert!(up.sub(&exact).unwrap().max_abs() < 1e-13);
        let down = exact.resample(&coarse).unwrap();
        let direct = SpectralField::scalar_from_fn(coarse, f).unwrap();
        assert!(down.sub(&direct).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn cosine_has_half_amplitude_coefficients() {
        let grid = Grid::square(16, 1.0).unwrap();
        let f = SpectralField::scalar_from_fn(grid.clone(), |x| (2.0 * PI * x[0]).cos()).unwrap();
        let c = f.coeffs();
        let plus = grid.flat_index(&[1, 0]);
        let minus = grid.flat_index(&[15, 0]);
        assert!((c[plus].re - 0.5).abs() < 1e-14);
        assert!((c[minus].re - 0.5).abs() < 1e-14);
        assert!(f.relative_mean() < 1e-14);
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_linear_between() {
        let grid = Grid::square(8, 1.0).unwrap();
        let f = SpectralField::scalar_from_fn(grid.clone(), |x| x[0] + 2.0 * x[1]).unwrap();
        assert!((f.interpolate(0, &[0.25, 0.5]) - 1.25).abs() < 1e-14);
        assert!((f.interpolate(0, &[0.3, 0.1]) - 0.5).abs() < 1e-14);
        // wraps periodically
        assert!((f.interpolate(0, &[1.25, -0.5]) - 1.25).abs() < 1e-14);
    }

    #[test]
    fn spectral_evaluation_recovers_trigonometric_polynomials() {
        let grid = Grid::square(16, 1.0).unwrap();
        let f = SpectralField::scalar_from_fn(grid, |x| {
            (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos()
        })
        .unwrap();
        let x = [0.123, 0.771];
        let exact = (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos();
        assert!((f.evaluate_spectral(0, &x) - exact).abs() < 1e-13);
    }

    #[test]
    fn random_fields_are_reproducible_and_band_limited() {
        let grid = Grid::cube(16, 2.0).unwrap();
        let a = random_band_field(&grid, 3, 4, 11).unwrap();
        let b = random_band_field(&grid, 3, 4, 11).unwrap();
        assert_eq!(a.values(), b.values());
        let n = grid.len();
        for c in 0..3 {
            for m in grid.modes() {
                if m.k.iter().any(|k| k.abs() > 4.0) {
                    assert!(a.coeffs()[c * n + m.flat].norm() < 1e-14);
                }
            }
        }
    }
}
