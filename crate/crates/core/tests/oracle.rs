//! Pseudo-spectral reference solvers: invariants, convergence orders and
//! closed forms.

use std::f64::consts::PI;

use nsalpha_core::oracle::*;
use nsalpha_core::spectral::{heat_semigroup, helmholtz_forward, leray_project, random_band_field};
use nsalpha_core::{AlphaModelParams, Grid, SpectralField};

fn two_shells(n: usize, a: f64) -> SpectralField {
    let grid = Grid::square(n, 1.0).unwrap();
    SpectralField::scalar_from_fn(grid, move |x| {
        a * ((2.0 * PI * x[0]).cos() + 0.5 * (2.0 * PI * (x[0] + x[1])).cos())
    })
    .unwrap()
}

fn diff(a: &SpectralField, b: &SpectralField) -> f64 {
    a.sub(b).unwrap().l2_norm()
}

#[test]
fn inviscid_flow_conserves_the_l2_norm() {
    // bypasses validation, which insists on ν > 0
    let params = AlphaModelParams {
        nu: 0.0,
        alpha: 0.1,
        horizon: 0.5,
        dim: 2,
        box_length: 1.0,
    };
    let run = oracle_vorticity_2d(&two_shells(32, 1.0), &params, 0.005, 100).unwrap();
    let l0 = run.l2[0];
    let drift = run
        .l2
        .iter()
        .map(|l| (l - l0).abs() / l0)
        .fold(0.0, f64::max);
    assert!(drift < 1e-6, "relative L2 drift {drift}");
    // the data is not steady: the solution must have moved
    assert!(diff(run.last(), run.trajectory.first()) > 1e-3 * l0);
    assert!(run.mean.iter().all(|&m| m < 1e-10));
}

#[test]
fn time_stepping_is_fourth_order() {
    let params = AlphaModelParams::torus(0.05, 0.1, 0.4).unwrap();
    let psi = two_shells(32, 2.0);
    let at = |steps: usize| oracle_vorticity_2d(&psi, &params, 0.4 / steps as f64, steps).unwrap();
    let reference = at(640);
    let errors: Vec<f64> = [20, 40, 80]
        .iter()
        .map(|&s| {
            let run = at(s);
            assert!(
                run.substeps.iter().all(|&k| k == 1),
                "CFL substepping at {s} steps"
            );
            diff(run.last(), reference.last())
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 3.5, "observed order {order} from {errors:?}");
    }
}

#[test]
fn spatial_resolution_is_converged() {
    let params = AlphaModelParams::torus(0.05, 0.1, 0.4).unwrap();
    let coarse = oracle_vorticity_2d(&two_shells(32, 1.0), &params, 0.01, 40).unwrap();
    let fine = oracle_vorticity_2d(&two_shells(64, 1.0), &params, 0.01, 40).unwrap();
    let fine_on_coarse = fine.last().resample(coarse.last().grid()).unwrap();
    let rel = diff(coarse.last(), &fine_on_coarse) / coarse.last().l2_norm();
    assert!(rel < 1e-6, "relative difference {rel}");
}

/// `‖q_α(T) - q_0(T)‖₂` at the given filter lengths; with `fix_omega` the
/// data is `q_α(0) = (I - α²Δ)ω₀` instead of a fixed `q(0)`.
fn alpha_differences(alphas: &[f64], fix_omega: bool) -> Vec<f64> {
    let base = two_shells(32, 1.0);
    let solve = |alpha: f64| {
        let psi = if fix_omega {
            helmholtz_forward(&base, alpha)
        } else {
            base.clone()
        };
        let params = AlphaModelParams::torus(0.05, alpha, 0.5).unwrap();
        oracle_vorticity_2d(&psi, &params, 0.005, 100)
            .unwrap()
            .last()
            .clone()
    };
    let q0 = solve(0.0);
    alphas.iter().map(|&a| diff(&solve(a), &q0)).collect()
}

fn local_orders(alphas: &[f64], diffs: &[f64]) -> Vec<f64> {
    (1..alphas.len())
        .map(|i| (diffs[i - 1] / diffs[i]).ln() / (alphas[i - 1] / alphas[i]).ln())
        .collect()
}

#[test]
fn fixed_vorticity_alpha_difference_is_second_order() {
    let alphas = [0.05, 0.025, 0.0125];
    let orders = local_orders(&alphas, &alpha_differences(&alphas, true));
    assert!(orders.iter().all(|p| (p - 2.0).abs() < 0.1), "{orders:?}");
}

#[test]
fn fixed_q_alpha_difference_is_fourth_order() {
    // u_α = K q + α² ∇^⊥q + O(α⁴) and ∇^⊥q does not advect q
    let alphas = [0.05, 0.025, 0.0125];
    let orders = local_orders(&alphas, &alpha_differences(&alphas, false));
    assert!(orders.iter().all(|&p| p > 3.5), "{orders:?}");
}

#[test]
fn heat_only_variant_is_the_heat_semigroup() {
    let grid = Grid::cube(16, 2.0).unwrap();
    let m0 = leray_project(&random_band_field(&grid, 3, 4, 2).unwrap()).unwrap();
    let params = AlphaModelParams::new(0.1, 0.2, 0.2, 3, 2.0).unwrap();
    let run = oracle_mild_nd(&m0, &params, 0.02, 10, MildVariant::HeatOnly, false).unwrap();
    let exact = heat_semigroup(&m0.dealias(), 0.1, 0.2);
    assert!(diff(run.last(), &exact) / exact.l2_norm() < 1e-10);
}

#[test]
fn zero_data_stays_zero() {
    let grid = Grid::cube(8, 2.0).unwrap();
    let m0 = SpectralField::zeros(grid, 3).unwrap();
    let params = AlphaModelParams::new(0.1, 0.2, 0.1, 3, 2.0).unwrap();
    for variant in [
        MildVariant::NavierStokesAlpha,
        MildVariant::LerayAlpha,
        MildVariant::HeatOnly,
    ] {
        let run = oracle_mild_nd(&m0, &params, 0.01, 10, variant, true).unwrap();
        assert_eq!(run.last().max_abs(), 0.0);
    }
}
