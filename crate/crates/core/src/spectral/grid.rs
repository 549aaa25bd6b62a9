use crate::error::{Error, Result};

/// Uniform periodic grid on the cube `[0, L)^d`, `d` in {1, 2, 3}.
///
/// Points are stored row-major with the last axis fastest. Wavenumber tables
/// hold the signed integer index `k` of each FFT bin; the physical angular
/// wavenumber is `2πk/L`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    shape: Vec<usize>,
    length: f64,
    waves: Vec<Vec<f64>>,
    deriv_waves: Vec<Vec<f64>>,
}

impl Grid {
    pub fn new(shape: &[usize], length: f64) -> Result<Self> {
        if shape.is_empty() || shape.len() > 3 {
            return Err(Error::InvalidParameter {
                name: "shape",
                reason: format!("dimension must be 1, 2 or 3, got {}", shape.len()),
            });
        }
        if shape.iter().any(|&n| n < 2) {
            return Err(Error::InvalidParameter {
                name: "shape",
                reason: format!("every axis needs at least 2 points, got {shape:?}"),
            });
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "box_length",
                reason: format!("must be positive and finite, got {length}"),
            });
        }
        let waves: Vec<Vec<f64>> = shape
            .iter()
            .map(|&n| (0..n).map(|i| signed_index(i, n) as f64).collect())
            .collect();
        let deriv_waves = shape
            .iter()
            .zip(&waves)
            .map(|(&n, w)| {
                w.iter()
                    .enumerate()
                    .map(|(i, &k)| if n % 2 == 0 && i == n / 2 { 0.0 } else { k })
                    .collect()
            })
            .collect();
        Ok(Self {
            shape: shape.to_vec(),
            length,
            waves,
            deriv_waves,
        })
    }

    pub fn square(n: usize, length: f64) -> Result<Self> {
        Self::new(&[n, n], length)
    }

    pub fn cube(n: usize, length: f64) -> Result<Self> {
        Self::new(&[n, n, n], length)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.length / self.shape[axis] as f64
    }

    /// Smallest grid spacing over all axes.
    pub fn min_spacing(&self) -> f64 {
        (0..self.dim())
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim() as i32)
    }

    /// Largest retained wavenumber index under the 2/3 rule.
    pub fn dealias_cutoff(&self, axis: usize) -> f64 {
        ((self.shape[axis] - 1) / 3) as f64
    }

    /// Signed wavenumber indices of every FFT bin along `axis`.
    pub fn waves(&self, axis: usize) -> &[f64] {
        &self.waves[axis]
    }

    /// Wavenumbers used by odd-order derivatives: the Nyquist bin is zeroed.
    pub fn deriv_waves(&self, axis: usize) -> &[f64] {
        &self.deriv_waves[axis]
    }

    /// Multi-index of a flat position (unused axes are zero).
    pub fn multi_index(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for axis in (0..self.dim()).rev() {
            let n = self.shape[axis];
            idx[axis] = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Physical coordinates of a flat grid position.
    pub fn coords(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dim() {
            x[axis] = idx[axis] as f64 * self.spacing(axis);
        }
        x
    }

    /// Visit every Fourier mode in storage order.
    pub fn modes(&self) -> ModeIter<'_> {
        ModeIter {
            grid: self,
            idx: [0; 3],
            flat: 0,
            total: self.len(),
        }
    }

    /// Smallest nonzero eigenvalue of `-Δ` (the spectral gap).
    pub fn spectral_gap(&self) -> f64 {
        let two_pi_over_l = 2.0 * std::f64::consts::PI / self.length;
        self.modes()
            .map(|m| m.k2())
            .filter(|&k2| k2 > 0.0)
            .fold(f64::INFINITY, f64::min)
            * two_pi_over_l
            * two_pi_over_l
    }
}

fn signed_index(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// One Fourier mode: its flat position, wavenumber index vector and the
/// derivative wavenumber vector (Nyquist zeroed).
#[derive(Clone, Copy, Debug)]
pub struct Mode {
    pub flat: usize,
    pub k: [f64; 3],
    pub kd: [f64; 3],
}

impl Mode {
    pub fn k2(&self) -> f64 {
        self.k.iter().map(|k| k * k).sum()
    }

    pub fn kd2(&self) -> f64 {
        self.kd.iter().map(|k| k * k).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.k.iter().all(|&k| k == 0.0)
    }
}

pub struct ModeIter<'a> {
    grid: &'a Grid,
    idx: [usize; 3],
    flat: usize,
    total: usize,
}

impl Iterator for ModeIter<'_> {
    type Item = Mode;

    fn next(&mut self) -> Option<Mode> {
        if self.flat >= self.total {
            return None;
        }
        let dim = self.grid.dim();
        let mut k = [0.0; 3];
        let mut kd = [0.0; 3];
        for axis in 0..dim {
            k[axis] = self.grid.waves[axis][self.idx[axis]];
            kd[axis] = self.grid.deriv_waves[axis][self.idx[axis]];
        }
        let mode = Mode {
            flat: self.flat,
            k,
            kd,
        };
        self.flat += 1;
        for axis in (0..dim).rev() {
            self.idx[axis] += 1;
            if self.idx[axis] < self.grid.shape[axis] {
                break;
            }
            self.idx[axis] = 0;
        }
        Some(mode)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = self.total - self.flat;
        (rest, Some(rest))
    }
}

impl ExactSizeIterator for ModeIter<'_> {}
