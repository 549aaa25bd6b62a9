//! Spectral operator identities on random band-limited fields, plus closed
//! forms on single modes.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use nsalpha_core::spectral::*;
use nsalpha_core::{Grid, SpectralField};

const SEEDS: u64 = 12;

fn rel(a: &SpectralField, b: &SpectralField) -> f64 {
    let scale = b.l2_norm().max(a.l2_norm());
    if scale == 0.0 {
        0.0
    } else {
        a.sub(b).unwrap().l2_norm() / scale
    }
}

fn scalar2(seed: u64) -> SpectralField {
    random_band_field(&Grid::square(32, 1.0).unwrap(), 1, 6, seed).unwrap()
}

fn vector3(seed: u64, kmax: usize) -> SpectralField {
    random_band_field(&Grid::cube(16, 2.0).unwrap(), 3, kmax, seed).unwrap()
}

#[test]
fn biot_savart_solves_its_poisson_equations() {
    for seed in 0..SEEDS {
        let w = scalar2(seed);
        let u = biot_savart(&w).unwrap();
        let lap = laplacian(&u);
        let minus_d2 = derivative(&w, 1, 1).unwrap().scale(-1.0);
        let d1 = derivative(&w, 0, 1).unwrap();
        assert!(rel(&lap.component(0), &minus_d2) < 1e-10);
        assert!(rel(&lap.component(1), &d1) < 1e-10);
    }
}

#[test]
fn biot_savart_of_a_cosine() {
    // ω = cos 2πx₁ is generated by the shear u = (0, sin(2πx₁)/(2π))
    let g = Grid::square(16, 1.0).unwrap();
    let w = SpectralField::scalar_from_fn(g.clone(), |x| (2.0 * PI * x[0]).cos()).unwrap();
    let expected = SpectralField::from_fn(g, 2, |x, c| {
        if c == 1 {
            (2.0 * PI * x[0]).sin() / (2.0 * PI)
        } else {
            0.0
        }
    })
    .unwrap();
    assert!(rel(&biot_savart(&w).unwrap(), &expected) < 1e-13);
}

#[test]
fn filtered_velocity_is_solenoidal_and_consistent() {
    for seed in 0..SEEDS {
        let q = scalar2(seed);
        for alpha in [0.0, 0.05, 0.3] {
            let u = k_tilde_alpha(&q, alpha).unwrap();
            let div = divergence(&u).unwrap().l2_norm();
            assert!(div <= 1e-10 * gradient(&q).unwrap().l2_norm());
            let direct = biot_savart(&helmholtz_inverse(&q, alpha)).unwrap();
            assert!(rel(&u, &direct) < 1e-14);
        }
    }
}

#[test]
fn helmholtz_round_trip() {
    for seed in 0..SEEDS {
        let f = vector3(seed, 5);
        for alpha in [0.01, 0.2, 1.5] {
            let back = helmholtz_forward(&helmholtz_inverse(&f, alpha), alpha);
            assert!(rel(&back, &f) < 1e-12);
        }
    }
}

#[test]
fn newtonian_potential_inverts_the_laplacian() {
    for seed in 0..SEEDS {
        let f = vector3(seed, 5).component(0);
        assert!(rel(&laplacian(&newtonian_potential(&f).unwrap()), &f) < 1e-12);
    }
    // N cos(2π k·x/L) = -cos(2π k·x/L) L²/(4π²|k|²)
    let g = Grid::cube(8, 2.0).unwrap();
    let f = SpectralField::scalar_from_fn(g.clone(), |x| (PI * (x[0] + 2.0 * x[2])).cos()).unwrap();
    let expected = f.scale(-4.0 / (4.0 * PI * PI * 5.0));
    assert!(rel(&newtonian_potential(&f).unwrap(), &expected) < 1e-13);
}

#[test]
fn leray_projection_is_an_orthogonal_projector() {
    for seed in 0..SEEDS {
        let m = vector3(seed, 5).dealias();
        let p = leray_project(&m).unwrap();
        assert!(rel(&leray_project(&p).unwrap(), &p) < 1e-13);
        assert!(relative_divergence(&p).unwrap() < 1e-13);
        // the removed part is the gradient ∇N(∇·m)
        let removed = m.sub(&p).unwrap();
        let grad = gradient(&newtonian_potential(&divergence(&m).unwrap()).unwrap()).unwrap();
        assert!(rel(&removed, &grad) < 1e-12);
        assert!(p.inner(&removed).unwrap().abs() < 1e-12 * m.l2_norm().powi(2));
    }
}

/// `Σ_{i,j} ∂_i v^j ∂_j m^i` with plain pointwise products; exact for
/// fields whose products stay inside the resolved band.
fn contraction_by_hand(v: &SpectralField, m: &SpectralField) -> SpectralField {
    let grid = m.grid().clone();
    let n = grid.len();
    let mut out = vec![0.0; n];
    for i in 0..3 {
        for j in 0..3 {
            let a = derivative(&v.component(j), i, 1).unwrap();
            let b = derivative(&m.component(i), j, 1).unwrap();
            for (o, (x, y)) in out.iter_mut().zip(a.values().iter().zip(b.values())) {
                *o += x * y;
            }
        }
    }
    SpectralField::from_values(grid, 1, out).unwrap()
}

#[test]
fn divergence_of_j_is_the_gradient_contraction() {
    for seed in 0..SEEDS {
        // band 2 keeps every quadratic product below the 2/3 cutoff
        let m = leray_project(&vector3(seed, 2)).unwrap();
        for model in [MomentumModel::NavierStokesAlpha, MomentumModel::LerayAlpha] {
            let alpha = 0.2;
            let v = helmholtz_inverse(&m, alpha);
            let j = assemble_j(&m, alpha, model).unwrap();
            let div = divergence(&j).unwrap();
            let expected = contraction_by_hand(&v, &m);
            assert!(rel(&div, &expected) < 1e-10, "seed {seed}, {model:?}");
            assert!(rel(&gradient_contraction(&v, &m).unwrap(), &expected) < 1e-12);
        }
    }
}

#[test]
fn heat_semigroup_of_a_mode() {
    let g = Grid::cube(8, 2.0).unwrap();
    let (nu, t) = (0.3, 0.7);
    let f = SpectralField::scalar_from_fn(g, |x| (PI * (x[0] - x[1])).sin()).unwrap();
    let decayed = heat_semigroup(&f, nu, t);
    let factor = (-nu * t * 2.0 * PI * PI).exp();
    assert_relative_eq!(
        decayed.l2_norm(),
        factor * f.l2_norm(),
        max_relative = 1e-13
    );
    assert!(rel(&decayed, &f.scale(factor)) < 1e-13);
}

#[test]
fn lp_norm_of_a_sine_mode() {
    // ‖sin 2πx₁‖₂ on the unit square is 1/√2
    let g = Grid::square(32, 1.0).unwrap();
    let f = SpectralField::scalar_from_fn(g, |x| (2.0 * PI * x[0]).sin()).unwrap();
    assert_relative_eq!(
        sobolev_norm(&f, 0, 2.0).unwrap(),
        0.5f64.sqrt(),
        max_relative = 1e-12
    );
}
