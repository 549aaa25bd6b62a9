//! Reproducible Brownian increments.
//!
//! Every path owns a ChaCha8 stream selected by its index; within a stream
//! each step consumes a fixed number of 32-bit words, so the increment of
//! `(path, step)` can be generated directly by seeking. Results therefore do
//! not depend on how paths are scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Batch of `n_paths` Brownian paths on the grid `k·dt`, `k <= n_steps`.
///
/// Increments are generated on demand rather than stored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BrownianBatch {
    pub seed: u64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub dim: usize,
}

impl BrownianBatch {
    pub fn generate(
        seed: u64,
        n_paths: usize,
        n_steps: usize,
        dt: f64,
        dim: usize,
    ) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::ZeroSteps);
        }
        if n_paths == 0 {
            return Err(Error::InvalidParameter {
                name: "n_paths",
                reason: "must be positive".into(),
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {dt}"),
            });
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: format!("must be 1, 2 or 3, got {dim}"),
            });
        }
        Ok(Self {
            seed,
            n_paths,
            n_steps,
            dt,
            dim,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    fn words_per_step(&self) -> u128 {
        // one Box–Muller pair = two u64 draws = four 32-bit words
        4 * self.dim.div_ceil(2) as u128
    }

    /// Sequential increments of `path`, starting at `first_step`.
    pub fn stream(&self, path: usize, first_step: usize) -> IncrementStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path as u64);
        rng.set_word_pos(first_step as u128 * self.words_per_step());
        IncrementStream {
            rng,
            dim: self.dim,
            sqrt_dt: self.dt.sqrt(),
        }
    }

    /// The increment `B_{(step+1)dt} - B_{step·dt}` of `path`.
    pub fn increment(&self, path: usize, step: usize) -> [f64; 3] {
        self.stream(path, step).next_increment()
    }

    /// `B_{step·dt}` of `path` (sum of the first `step` increments).
    pub fn position(&self, path: usize, step: usize) -> [f64; 3] {
        let mut s = self.stream(path, 0);
        let mut b = [0.0; 3];
        for _ in 0..step {
            let d = s.next_increment();
            for a in 0..self.dim {
                b[a] += d[a];
            }
        }
        b
    }
}

pub struct IncrementStream {
    rng: ChaCha8Rng,
    dim: usize,
    sqrt_dt: f64,
}

impl IncrementStream {
    /// Next Gaussian increment with variance `dt` per component (unused
    /// trailing components are zero).
    pub fn next_increment(&mut self) -> [f64; 3] {
        let mut out = [0.0; 4];
        for pair in 0..self.dim.div_ceil(2) {
            let (z0, z1) = box_muller(self.rng.next_u64(), self.rng.next_u64());
            out[2 * pair] = z0 * self.sqrt_dt;
            out[2 * pair + 1] = z1 * self.sqrt_dt;
        }
        let mut inc = [0.0; 3];
        inc[..self.dim].copy_from_slice(&out[..self.dim]);
        inc
    }
}

fn box_muller(a: u64, b: u64) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    // u1 in (0, 1], u2 in [0, 1)
    let u1 = ((a >> 11) + 1) as f64 * SCALE;
    let u2 = (b >> 11) as f64 * SCALE;
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
    (r * c, r * s)
}
