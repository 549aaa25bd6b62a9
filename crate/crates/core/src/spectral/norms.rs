use std::f64::consts::PI;

use num_complex::Complex64;

use super::field::SpectralField;
use crate::error::{Error, Result};

/// All multi-indices `β ∈ ℕ^dim` with `|β| <= k`.
pub fn multi_indices(dim: usize, k: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = vec![0u32; dim];
    fn rec(axis: usize, left: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if axis == current.len() {
            out.push(current.clone());
            return;
        }
        for order in 0..=left {
            current[axis] = order as u32;
            rec(axis + 1, left - order, current, out);
        }
        current[axis] = 0;
    }
    rec(0, k, &mut current, &mut out);
    out
}

/// `(Σ_{|β|<=k} ‖∂^β f‖_p^p)^{1/p}`, summed over components; derivatives are
/// spectral and the `L^p` integrals use grid quadrature.
pub fn sobolev_norm(f: &SpectralField, k: usize, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("must be >= 1, got {p}"),
        });
    }
    let s = 2.0 * PI / f.grid().length();
    let vol = f.grid().cell_volume();
    let mut total = 0.0;
    for beta in multi_indices(f.dim(), k) {
        let d = f.map_modes(|m| {
            let mut z = Complex64::new(1.0, 0.0);
            for (a, &order) in beta.iter().enumerate() {
                if order > 0 {
                    let kk = if order % 2 == 1 { m.kd[a] } else { m.k[a] };
                    z *= (Complex64::new(0.0, s * kk)).powu(order);
                }
            }
            z
        });
        total += d.values().iter().map(|v| v.abs().powf(p)).sum::<f64>() * vol;
    }
    Ok(total.powf(1.0 / p))
}

/// `‖f‖_{-2,2}` as the lattice sum `L^d Σ_k (1 + |k/L|²)^{-2} |f̂(k)|²`.
pub fn neg_sobolev_norm(f: &SpectralField) -> f64 {
    let n = f.grid().len();
    let l = f.grid().length();
    let weights: Vec<f64> = f
        .grid()
        .modes()
        .map(|m| (1.0 + m.k2() / (l * l)).powi(-2))
        .collect();
    let sum: f64 = f
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| weights[i % n] * c.norm_sqr())
        .sum();
    (sum * f.grid().volume()).sqrt()
}
