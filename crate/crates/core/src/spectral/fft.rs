//! N-dimensional complex FFT built from cached 1-D plans.
//!
//! Forward transforms are normalised by `1/N` so that the coefficients are the
//! torus Fourier coefficients `f̂(k) = L^{-d} ∫ f(y) e^{-2πi⟨k,y⟩/L} dy`
//! evaluated by the rectangle rule; the inverse is the plain synthesis sum.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

use super::grid::Grid;

type PlanCache = Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft plan cache poisoned");
    map.entry((len, forward))
        .or_insert_with(|| {
            let direction = if forward {
                FftDirection::Forward
            } else {
                FftDirection::Inverse
            };
            FftPlanner::new().plan_fft(len, direction)
        })
        .clone()
}

// Lines handed to one rayon task; each line is transformed independently so
// results do not depend on how lines are split across workers.
const LINES_PER_TASK: usize = 64;

fn transform(grid: &Grid, data: &mut [Complex64], forward: bool) {
    debug_assert_eq!(data.len(), grid.len());
    let shape = grid.shape();
    let dim = shape.len();
    let mut buf: Vec<Complex64> = Vec::new();
    for axis in 0..dim {
        let n = shape[axis];
        let fft = plan(n, forward);
        let stride: usize = shape[axis + 1..].iter().product();
        if stride == 1 {
            data.par_chunks_mut(n * LINES_PER_TASK)
                .for_each(|chunk| fft.process(chunk));
            continue;
        }
        let outer: usize = shape[..axis].iter().product();
        let lines = outer * stride;
        buf.resize(lines * n, Complex64::default());
        // gather lines into contiguous storage
        buf.par_chunks_mut(n).enumerate().for_each(|(line, dst)| {
            let (o, inner) = (line / stride, line % stride);
            let base = o * n * stride + inner;
            for (j, d) in dst.iter_mut().enumerate() {
                *d = data[base + j * stride];
            }
        });
        buf.par_chunks_mut(n * LINES_PER_TASK)
            .for_each(|chunk| fft.process(chunk));
        for (line, src) in buf.chunks(n).enumerate() {
            let (o, inner) = (line / stride, line % stride);
            let base = o * n * stride + inner;
            for (j, s) in src.iter().enumerate() {
                data[base + j * stride] = *s;
            }
        }
    }
}

/// In-place forward transform, normalised by `1/N`.
pub fn forward(grid: &Grid, data: &mut [Complex64]) {
    transform(grid, data, true);
    let scale = 1.0 / grid.len() as f64;
    data.par_iter_mut().for_each(|c| *c *= scale);
}

/// In-place inverse transform (synthesis, no normalisation).
pub fn inverse(grid: &Grid, data: &mut [Complex64]) {
    transform(grid, data, false);
}

/// Forward transform of `n_components` stacked real components.
pub fn forward_real(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    let n = grid.len();
    let mut out: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for chunk in out.chunks_mut(n) {
        forward(grid, chunk);
    }
    out
}

/// Inverse transform of stacked components, keeping the real part.
pub fn inverse_real(grid: &Grid, coeffs: &[Complex64]) -> Vec<f64> {
    let n = grid.len();
    let mut work = coeffs.to_vec();
    for chunk in work.chunks_mut(n) {
        inverse(grid, chunk);
    }
    work.into_iter().map(|c| c.re).collect()
}
