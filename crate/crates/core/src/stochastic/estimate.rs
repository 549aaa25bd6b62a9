use rayon::prelude::*;

use crate::error::Result;

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    /// Mean and standard error of `samples`, reduced pairwise in a fixed
    /// order so the result does not depend on how samples were produced.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                n,
            };
        }
        let mean = pairwise_sum(samples) / n as f64;
        let stderr = if n > 1 {
            let dev: Vec<f64> = samples.iter().map(|s| (s - mean) * (s - mean)).collect();
            (pairwise_sum(&dev) / ((n - 1) as f64 * n as f64)).sqrt()
        } else {
            f64::INFINITY
        };
        Self { mean, stderr, n }
    }

    /// `|self - other|` in units of the combined standard error.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        (self.mean - other.mean).abs() / self.stderr.hypot(other.stderr)
    }

    /// `|self - exact|` in units of the standard error.
    pub fn z_against(&self, exact: f64) -> f64 {
        (self.mean - exact).abs() / self.stderr
    }
}

/// Pairwise (cascade) summation with a fixed split order.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if x.len() <= LEAF {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

/// Evaluate `f` for every path index in parallel, keeping index order. The
/// first failing path (by index) determines the error.
pub(crate) fn par_paths<T: Send>(
    n: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..n)
        .into_par_iter()
        .map(&f)
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_of_known_samples() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        // sample variance 5/3, n = 4
        assert!((e.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn pairwise_sum_matches_naive_sum_on_integers() {
        let x: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&x), 499_500.0);
    }
}
