//! Integrating-factor time steppers for `∂_t q = νΔq + N(q)`.
//!
//! The diffusion is integrated exactly through the heat semigroup; only the
//! nonlinear term `N` is treated explicitly.

use crate::error::Result;
use crate::spectral::{heat_semigroup, SpectralField};

/// One Lawson (integrating-factor) RK4 step of size `dt`.
pub fn lawson_rk4_step(
    q: &SpectralField,
    nu: f64,
    dt: f64,
    rhs: impl Fn(&SpectralField) -> Result<SpectralField>,
) -> Result<SpectralField> {
    let half = |f: &SpectralField| heat_semigroup(f, nu, 0.5 * dt);
    let full = |f: &SpectralField| heat_semigroup(f, nu, dt);
    let k1 = rhs(q)?;
    let k2 = rhs(&half(&q.linear_combination(1.0, &k1, 0.5 * dt)?))?;
    let k3 = rhs(&half(q).linear_combination(1.0, &k2, 0.5 * dt)?)?;
    let k4 = rhs(&full(q).linear_combination(1.0, &half(&k3), dt)?)?;
    let mid = half(&k2.add(&k3)?);
    let incr = full(&k1).linear_combination(1.0, &mid, 2.0)?.add(&k4)?;
    full(q).linear_combination(1.0, &incr, dt / 6.0)
}

/// One integrating-factor Heun (RK2) step where the nonlinear term may
/// depend on time: `rhs(f, 0)` is evaluated at the start of the step and
/// `rhs(f, 1)` at its end.
pub fn if_heun_step(
    q: &SpectralField,
    nu: f64,
    dt: f64,
    rhs: impl Fn(&SpectralField, usize) -> Result<SpectralField>,
) -> Result<SpectralField> {
    let full = |f: &SpectralField| heat_semigroup(f, nu, dt);
    let eq = full(q);
    let k1 = full(&rhs(q, 0)?);
    let predictor = eq.linear_combination(1.0, &k1, dt)?;
    let k2 = rhs(&predictor, 1)?;
    eq.linear_combination(1.0, &k1.add(&k2)?, 0.5 * dt)
}

/// Exponential Adams–Bashforth 2:
/// `q⁺ = E q + dt[(3/2) E N_n - (1/2) E² N_{n-1}]`, with `E = e^{dtνΔ}`.
/// Without a previous value the step falls back to `q⁺ = E(q + dt N_n)`.
pub fn if_ab2_step(
    q: &SpectralField,
    nu: f64,
    dt: f64,
    n_now: &SpectralField,
    n_prev: Option<&SpectralField>,
) -> Result<SpectralField> {
    let e = |f: &SpectralField| heat_semigroup(f, nu, dt);
    match n_prev {
        None => Ok(e(&q.linear_combination(1.0, n_now, dt)?)),
        Some(p) => {
            let inner = q
                .linear_combination(1.0, n_now, 1.5 * dt)?
                .linear_combination(1.0, &e(p), -0.5 * dt)?;
            Ok(e(&inner))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;
    use std::f64::consts::PI;

    fn mode() -> SpectralField {
        let g = Grid::square(16, 1.0).unwrap();
        SpectralField::scalar_from_fn(g, |x| (2.0 * PI * x[0]).cos()).unwrap()
    }

    // dq/dt = νΔq + c q for a single mode: q(t) = e^{(c - 4π²ν)t} q(0).
    fn order_of(step: impl Fn(&SpectralField, f64) -> SpectralField) -> f64 {
        let (nu, c, t) = (0.01, 1.0, 1.0);
        let q0 = mode();
        let exact = q0.values()[0] * ((c - 4.0 * PI * PI * nu) * t).exp();
        let err = |n: usize| {
            let dt = t / n as f64;
            let mut q = q0.clone();
            for _ in 0..n {
                q = step(&q, dt);
            }
            (q.values()[0] - exact).abs()
        };
        (err(20) / err(40)).log2()
    }

    #[test]
    fn lawson_rk4_is_fourth_order() {
        let p = order_of(|q, dt| lawson_rk4_step(q, 0.01, dt, |f| Ok(f.clone())).unwrap());
        assert!((p - 4.0).abs() < 0.2, "order {p}");
    }

    #[test]
    fn heun_is_second_order() {
        let p = order_of(|q, dt| if_heun_step(q, 0.01, dt, |f, _| Ok(f.clone())).unwrap());
        assert!((p - 2.0).abs() < 0.2, "order {p}");
    }

    #[test]
    fn linear_part_is_exact() {
        let q = mode();
        let zero = q.scale(0.0);
        let out = lawson_rk4_step(&q, 0.3, 0.7, |f| Ok(f.scale(0.0))).unwrap();
        let exact = heat_semigroup(&q, 0.3, 0.7);
        let ab = if_ab2_step(&q, 0.3, 0.7, &zero, Some(&zero)).unwrap();
        for (a, b) in out.values().iter().zip(exact.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        for (a, b) in ab.values().iter().zip(exact.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
