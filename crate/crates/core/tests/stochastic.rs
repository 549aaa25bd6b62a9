//! Brownian batches and the Monte Carlo estimators against closed forms.

use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use nsalpha_core::stochastic::*;
use nsalpha_core::{Error, Grid, SpectralField, TimeSeries};

fn cosine(grid: Grid, k: [f64; 2]) -> SpectralField {
    let l = grid.length();
    SpectralField::scalar_from_fn(grid, move |x| {
        (2.0 * PI * (k[0] * x[0] + k[1] * x[1]) / l).cos()
    })
    .unwrap()
}

fn constant_drift(grid: Grid, c: [f64; 2], dt: f64, n_steps: usize) -> TimeSeries {
    let v = SpectralField::from_fn(grid, 2, move |_, comp| c[comp]).unwrap();
    TimeSeries::constant(v, 0.0, dt, n_steps).unwrap()
}

/// `E[cos(2π k·X_T)]` for `X_T = x - c τ + √(2ν) W_τ` on the unit torus.
fn drifted_heat(k: [f64; 2], c: [f64; 2], nu: f64, x: [f64; 2], tau: f64) -> f64 {
    let k2 = k[0] * k[0] + k[1] * k[1];
    let phase = k[0] * (x[0] - c[0] * tau) + k[1] * (x[1] - c[1] * tau);
    (-4.0 * PI * PI * nu * k2 * tau).exp() * (2.0 * PI * phase).cos()
}

#[test]
fn increments_have_brownian_moments() {
    let (n_paths, n_steps, dt) = (4000, 25, 0.01);
    let batch = BrownianBatch::generate(11, n_paths, n_steps, dt, 3).unwrap();
    let mut sum = [0.0; 3];
    let mut sq = [0.0; 3];
    let mut cross = 0.0;
    let mut lag = 0.0;
    for p in 0..n_paths {
        let mut prev = [0.0; 3];
        for k in 0..n_steps {
            let d = batch.increment(p, k);
            for a in 0..3 {
                sum[a] += d[a];
                sq[a] += d[a] * d[a];
            }
            cross += d[0] * d[2];
            if k > 0 {
                lag += d[1] * prev[1];
            }
            prev = d;
        }
    }
    let n = (n_paths * n_steps) as f64;
    for a in 0..3 {
        // standard errors: √(dt/n) for the mean, dt√(2/n) for the variance
        assert!((sum[a] / n).abs() < 5.0 * (dt / n).sqrt());
        assert!((sq[a] / n - dt).abs() < 5.0 * dt * (2.0 / n).sqrt());
    }
    assert!((cross / n).abs() < 5.0 * dt / n.sqrt());
    assert!((lag / n).abs() < 5.0 * dt / n.sqrt());
}

#[test]
fn increments_are_addressable_by_path_and_step() {
    let batch = BrownianBatch::generate(5, 10, 40, 0.02, 2).unwrap();
    let mut stream = batch.stream(7, 0);
    let mut position = [0.0; 3];
    for k in 0..40 {
        let d = stream.next_increment();
        assert_eq!(d, batch.increment(7, k));
        assert_eq!(d[2], 0.0);
        for a in 0..2 {
            position[a] += d[a];
        }
    }
    assert_eq!(position, batch.position(7, 40));
    assert_ne!(batch.increment(7, 0), batch.increment(8, 0));
    let other = BrownianBatch::generate(6, 10, 40, 0.02, 2).unwrap();
    assert_ne!(batch.increment(7, 0), other.increment(7, 0));
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let grid = Grid::square(16, 1.0).unwrap();
    let terminal = cosine(grid.clone(), [1.0, 2.0]);
    let drift = constant_drift(grid, [0.3, -0.2], 0.05, 10);
    let batch = BrownianBatch::generate(3, 3000, 10, 0.05, 2).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let c = characteristics_value(
                &batch,
                Some(&drift),
                &terminal,
                None,
                0.05,
                &[0.2, 0.7],
                0.1,
            )
            .unwrap();
            let g =
                girsanov_estimate(&batch, Some(&drift), &terminal, 0.05, &[0.2, 0.7], 0.0).unwrap();
            (c, g)
        })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn characteristics_match_drifted_heat_flow() {
    let (nu, dt, n_steps): (f64, f64, usize) = (0.05, 0.01, 50);
    let (k, c) = ([1.0, 1.0], [0.4, -0.3]);
    let grid = Grid::square(32, 1.0).unwrap();
    let terminal = cosine(grid.clone(), k);
    let drift = constant_drift(grid, c, dt, n_steps);
    let batch = BrownianBatch::generate(2024, 20_000, n_steps, dt, 2).unwrap();
    let starts = [
        ([0.1, 0.2, 0.0], 0.0),
        ([0.55, 0.9, 0.0], 0.2),
        ([0.3, 0.4, 0.0], 0.4),
    ];
    let swept =
        characteristics_sweep(&batch, Some(&drift), &terminal, None, nu, &starts, 4).unwrap();
    for ((x, t), est) in starts.iter().zip(&swept) {
        let exact = drifted_heat(k, c, nu, [x[0], x[1]], 0.5 - t);
        let z = est[0].z_against(exact);
        assert!(z.abs() < 4.0, "z = {z} at {x:?}, t = {t}");
    }
    // at the horizon the value is the refined terminal itself
    let at_end = characteristics_sweep(
        &batch,
        Some(&drift),
        &terminal,
        None,
        nu,
        &[([0.3, 0.4, 0.0], 0.5)],
        4,
    )
    .unwrap();
    assert_eq!(at_end[0][0].stderr, 0.0);
    assert_abs_diff_eq!(
        at_end[0][0].mean,
        drifted_heat(k, c, nu, [0.3, 0.4], 0.0),
        epsilon = 1e-3
    );
}

#[test]
fn girsanov_weights_reproduce_the_drift() {
    // driftless paths reweighted by h = c/√(2ν) see the drift c
    let (nu, dt, n_steps): (f64, f64, usize) = (0.05, 0.01, 50);
    let (k, c) = ([1.0, 0.0], [0.5, 0.25]);
    let grid = Grid::square(32, 1.0).unwrap();
    let mc = McConfig::new(99, 20_000, dt).with_refine(4);
    let terminal = mc.refined(&cosine(grid.clone(), k)).unwrap();
    let s = (2.0 * nu).sqrt();
    let h = constant_drift(grid, [c[0] / s, c[1] / s], dt, n_steps);
    let batch = BrownianBatch::generate(mc.seed, mc.n_paths, n_steps, dt, 2).unwrap();
    let g = girsanov_estimate(&batch, Some(&h), &terminal, nu, &[0.3, 0.6], 0.1).unwrap();
    assert!(g.weight.z_against(1.0).abs() < 4.0, "weight {:?}", g.weight);
    let exact = drifted_heat(k, c, nu, [0.3, 0.6], 0.4);
    assert!(
        g.value.z_against(exact).abs() < 4.0,
        "value {:?} vs {exact}",
        g.value
    );
}

#[test]
fn standard_error_halves_with_four_times_the_paths() {
    let grid = Grid::square(16, 1.0).unwrap();
    let terminal = cosine(grid, [1.0, 0.0]);
    let est = |n| {
        let batch = BrownianBatch::generate(8, n, 20, 0.01, 2).unwrap();
        characteristics_value(&batch, None, &terminal, None, 0.1, &[0.1, 0.1], 0.0).unwrap()[0]
    };
    let ratio = est(4000).stderr / est(16_000).stderr;
    assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn constant_source_accumulates_exactly() {
    let grid = Grid::square(8, 1.0).unwrap();
    let terminal = SpectralField::zeros(grid.clone(), 1).unwrap();
    let one = SpectralField::scalar_from_fn(grid, |_| 1.0).unwrap();
    let source = TimeSeries::constant(one, 0.0, 0.1, 10).unwrap();
    let batch = BrownianBatch::generate(1, 50, 10, 0.1, 2).unwrap();
    let est = characteristics_value(
        &batch,
        None,
        &terminal,
        Some(&source),
        0.2,
        &[0.5, 0.5],
        0.3,
    )
    .unwrap();
    assert_abs_diff_eq!(est[0].mean, 0.7, epsilon = 1e-12);
    assert_abs_diff_eq!(est[0].stderr, 0.0, epsilon = 1e-12);
}

#[test]
fn noiseless_paths_follow_the_drift() {
    let grid = Grid::square(8, 1.0).unwrap();
    let drift = constant_drift(grid, [0.25, -0.5], 0.1, 10);
    let batch = BrownianBatch::generate(1, 4, 10, 0.1, 2).unwrap();
    let state =
        integrate_sde(&batch, Some(&drift), 0.0, 1.0, &[[0.1, 0.2, 0.0]], 0.2, 1.0).unwrap();
    let x = state.positions[0];
    // x - c·0.8, wrapped into [0, 1)
    assert_abs_diff_eq!(x[0], 0.9, epsilon = 1e-12);
    assert_abs_diff_eq!(x[1], 0.6, epsilon = 1e-12);
    assert_eq!(state.time_index, 10);
}

#[test]
fn off_grid_times_and_short_series_are_rejected() {
    let grid = Grid::square(8, 1.0).unwrap();
    let terminal = cosine(grid.clone(), [1.0, 0.0]);
    let batch = BrownianBatch::generate(1, 10, 10, 0.1, 2).unwrap();
    let err =
        characteristics_value(&batch, None, &terminal, None, 0.1, &[0.0, 0.0], 0.05).unwrap_err();
    assert!(matches!(err, Error::TimeGridMismatch { .. }));
    let short = constant_drift(grid, [0.0, 0.0], 0.1, 5);
    let err = characteristics_value(&batch, Some(&short), &terminal, None, 0.1, &[0.0, 0.0], 0.0)
        .unwrap_err();
    assert!(matches!(err, Error::TimeGridMismatch { .. }));
    assert_eq!(
        BrownianBatch::generate(1, 10, 0, 0.1, 2).unwrap_err(),
        Error::ZeroSteps
    );
}
