//! Linear and singular operators on periodic fields.
//!
//! Convention: `f(x) = Σ_k f̂(k) e^{2πi⟨k,x⟩/L}`, so `∂_j` has symbol
//! `2πi k_j/L` and `Δ` has symbol `-4π²|k|²/L²`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::field::{FieldFlags, SpectralField};
use super::grid::Mode;
use crate::error::{Error, Result};

/// Relative zero-mode tolerance used by operators that need mean-zero input.
pub const MEAN_TOL: f64 = 1e-10;

/// Relative divergence tolerance for operators that need solenoidal input.
pub const DIV_TOL: f64 = 1e-8;

fn i_unit() -> Complex64 {
    Complex64::new(0.0, 1.0)
}

fn two_pi_over(field: &SpectralField) -> f64 {
    2.0 * PI / field.grid().length()
}

/// `∂^order / ∂x_axis^order`, componentwise.
pub fn derivative(f: &SpectralField, axis: usize, order: u32) -> Result<SpectralField> {
    if axis >= f.dim() {
        return Err(Error::AxisOutOfRange { axis, dim: f.dim() });
    }
    let s = two_pi_over(f);
    let odd = order % 2 == 1;
    Ok(f.map_modes(|m| {
        let k = if odd { m.kd[axis] } else { m.k[axis] };
        (i_unit() * s * k).powu(order)
    })
    .with_flags(f.flags() & FieldFlags::DIVERGENCE_FREE | FieldFlags::MEAN_ZERO))
}

fn laplacian_symbol(m: &Mode, s: f64) -> f64 {
    -s * s * m.k2()
}

pub fn laplacian(f: &SpectralField) -> SpectralField {
    let s = two_pi_over(f);
    f.map_modes(|m| Complex64::new(laplacian_symbol(m, s), 0.0))
        .with_flags(f.flags() | FieldFlags::MEAN_ZERO)
}

/// Gradient of a scalar field.
pub fn gradient(f: &SpectralField) -> Result<SpectralField> {
    if f.n_components() != 1 {
        return Err(Error::ShapeMismatch("gradient needs a scalar field".into()));
    }
    let parts = (0..f.dim())
        .map(|a| derivative(f, a, 1))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralField::from_components(&parts)?.with_flags(FieldFlags::MEAN_ZERO))
}

/// Divergence of a vector field.
pub fn divergence(m: &SpectralField) -> Result<SpectralField> {
    require_vector(m)?;
    let n = m.grid().len();
    let s = two_pi_over(m);
    let mut out = vec![Complex64::default(); n];
    for c in 0..m.dim() {
        let coeffs = m.component_coeffs(c);
        for mode in m.grid().modes() {
            out[mode.flat] += i_unit() * s * mode.kd[c] * coeffs[mode.flat];
        }
    }
    Ok(SpectralField::from_coeffs(m.grid().clone(), 1, out)?.with_flags(FieldFlags::MEAN_ZERO))
}

/// Divergence defect `‖∇·m‖₂ / ‖∇m‖₂` (zero for the zero field).
pub fn relative_divergence(m: &SpectralField) -> Result<f64> {
    let div = divergence(m)?.l2_norm();
    let mut grad2 = 0.0;
    for c in 0..m.dim() {
        let comp = m.component(c);
        for a in 0..m.dim() {
            grad2 += derivative(&comp, a, 1)?.l2_norm().powi(2);
        }
    }
    if grad2 == 0.0 {
        return Ok(0.0);
    }
    Ok(div / grad2.sqrt())
}

pub fn require_divergence_free(m: &SpectralField, tol: f64) -> Result<()> {
    let relative = relative_divergence(m)?;
    if relative > tol {
        return Err(Error::NotDivergenceFree { relative });
    }
    Ok(())
}

fn require_vector(m: &SpectralField) -> Result<()> {
    if !m.is_vector() {
        return Err(Error::ShapeMismatch(format!(
            "expected a {}-component vector field, got {} components",
            m.dim(),
            m.n_components()
        )));
    }
    Ok(())
}

fn require_scalar(f: &SpectralField) -> Result<()> {
    if f.n_components() != 1 {
        return Err(Error::ShapeMismatch("expected a scalar field".into()));
    }
    Ok(())
}

/// `(I - α²Δ)^{-1}`, componentwise.
pub fn helmholtz_inverse(f: &SpectralField, alpha: f64) -> SpectralField {
    if alpha == 0.0 {
        return f.clone();
    }
    let s = two_pi_over(f);
    let a2 = alpha * alpha;
    f.map_modes(|m| Complex64::new(1.0 / (1.0 - a2 * laplacian_symbol(m, s)), 0.0))
        .with_flags(f.flags())
}

/// `(I - α²Δ)`, componentwise.
pub fn helmholtz_forward(f: &SpectralField, alpha: f64) -> SpectralField {
    let s = two_pi_over(f);
    let a2 = alpha * alpha;
    f.map_modes(|m| Complex64::new(1.0 - a2 * laplacian_symbol(m, s), 0.0))
        .with_flags(f.flags())
}

/// Heat semigroup `e^{tνΔ}`, componentwise.
pub fn heat_semigroup(f: &SpectralField, nu: f64, t: f64) -> SpectralField {
    let s = two_pi_over(f);
    f.map_modes(|m| Complex64::new((nu * t * laplacian_symbol(m, s)).exp(), 0.0))
        .with_flags(f.flags())
}

/// Biot–Savart law on T²: the mean-free `u` with `Δu¹ = -∂₂ω`, `Δu² = ∂₁ω`.
pub fn biot_savart(omega: &SpectralField) -> Result<SpectralField> {
    require_scalar(omega)?;
    if omega.dim() != 2 {
        return Err(Error::ShapeMismatch(
            "Biot-Savart is defined on the 2-torus".into(),
        ));
    }
    omega.require_mean_zero(MEAN_TOL)?;
    let n = omega.grid().len();
    let s = two_pi_over(omega);
    let w = omega.coeffs();
    let mut out = vec![Complex64::default(); 2 * n];
    for m in omega.grid().modes() {
        if m.is_zero() {
            continue;
        }
        // Δ has symbol -s²|k|², ∂_j has symbol i s kd_j.
        let inv = 1.0 / (s * s * m.k2());
        out[m.flat] = i_unit() * s * m.kd[1] * inv * w[m.flat];
        out[n + m.flat] = -i_unit() * s * m.kd[0] * inv * w[m.flat];
    }
    Ok(SpectralField::from_coeffs(omega.grid().clone(), 2, out)?
        .with_flags(FieldFlags::MEAN_ZERO | FieldFlags::DIVERGENCE_FREE))
}

/// `K̃^α = K ∘ (I - α²Δ)^{-1}`: velocity recovered from `q = ω - α²Δω`.
pub fn k_tilde_alpha(q: &SpectralField, alpha: f64) -> Result<SpectralField> {
    require_scalar(q)?;
    q.require_mean_zero(MEAN_TOL)?;
    biot_savart(&helmholtz_inverse(q, alpha))
}

/// Mean-free inverse Laplacian `N` with `ΔNf = f`.
pub fn newtonian_potential(f: &SpectralField) -> Result<SpectralField> {
    f.require_mean_zero(MEAN_TOL)?;
    Ok(inverse_laplacian_unchecked(f))
}

fn inverse_laplacian_unchecked(f: &SpectralField) -> SpectralField {
    let s = two_pi_over(f);
    f.map_modes(|m| {
        if m.is_zero() {
            Complex64::default()
        } else {
            Complex64::new(1.0 / laplacian_symbol(m, s), 0.0)
        }
    })
    .with_flags(FieldFlags::MEAN_ZERO)
}

/// Leray–Hodge projection `m - ∇N(∇·m)` onto divergence-free fields.
///
/// The symbol is `I - g gᵀ/|g|²` with the derivative wavenumbers `g`, which
/// makes the discrete projector exactly idempotent and self-adjoint.
pub fn leray_project(m: &SpectralField) -> Result<SpectralField> {
    require_vector(m)?;
    let dim = m.dim();
    let n = m.grid().len();
    let c = m.coeffs();
    let mut out = c.to_vec();
    for mode in m.grid().modes() {
        let g2 = mode.kd2();
        if g2 == 0.0 {
            continue;
        }
        let mut dot = Complex64::default();
        for a in 0..dim {
            dot += mode.kd[a] * c[a * n + mode.flat];
        }
        for a in 0..dim {
            out[a * n + mode.flat] -= mode.kd[a] * dot / g2;
        }
    }
    Ok(SpectralField::from_coeffs(m.grid().clone(), dim, out)?
        .with_flags(m.flags() | FieldFlags::DIVERGENCE_FREE))
}

/// Pointwise product of two scalar fields (or a scalar and each component),
/// truncated by the 2/3 rule.
pub fn product(a: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
    require_scalar(a)?;
    if a.grid() != b.grid() {
        return Err(Error::ShapeMismatch(
            "product of fields on different grids".into(),
        ));
    }
    let n = a.grid().len();
    let av = a.values();
    let values = b
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| av[i % n] * v)
        .collect();
    Ok(SpectralField::from_values(a.grid().clone(), b.n_components(), values)?.dealias())
}

/// Dealiased advection `(u·∇)f`, componentwise in `f`.
pub fn advect(u: &SpectralField, f: &SpectralField) -> Result<SpectralField> {
    require_vector(u)?;
    let dim = u.dim();
    let n = u.grid().len();
    let mut acc = vec![0.0; n * f.n_components()];
    for a in 0..dim {
        let d = derivative(f, a, 1)?;
        let ua = u.component_values(a);
        for (i, v) in d.values().iter().enumerate() {
            acc[i] += ua[i % n] * v;
        }
    }
    Ok(SpectralField::from_values(u.grid().clone(), f.n_components(), acc)?.dealias())
}

/// Which nonlinearity the momentum form carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MomentumModel {
    /// Navier–Stokes-α: `J = ∇N G + α²∇vᵀΔv`.
    #[default]
    NavierStokesAlpha,
    /// Leray-α: no `α²∇vᵀΔv` term, pressure source `G = Σ ∂_i v^j ∂_j m^i`.
    LerayAlpha,
}

/// Products that enter the pressure source and `J`, computed once.
struct VelocityGradients {
    grad_v: Vec<Vec<f64>>, // [i*d + j] = ∂_i v^j
    lap_v: Vec<Vec<f64>>,  // [j] = Δv^j
    grad_m: Vec<Vec<f64>>, // [i*d + j] = ∂_j m^i
}

fn velocity_gradients(m: &SpectralField, v: &SpectralField) -> Result<VelocityGradients> {
    let d = m.dim();
    let mut grad_v = Vec::with_capacity(d * d);
    let mut grad_m = Vec::with_capacity(d * d);
    let mut lap_v = Vec::with_capacity(d);
    let v_comps: Vec<SpectralField> = (0..d).map(|j| v.component(j)).collect();
    let m_comps: Vec<SpectralField> = (0..d).map(|i| m.component(i)).collect();
    for i in 0..d {
        for j in 0..d {
            grad_v.push(derivative(&v_comps[j], i, 1)?.values().to_vec());
            grad_m.push(derivative(&m_comps[i], j, 1)?.values().to_vec());
        }
    }
    for vj in &v_comps {
        lap_v.push(laplacian(vj).values().to_vec());
    }
    Ok(VelocityGradients {
        grad_v,
        lap_v,
        grad_m,
    })
}

/// `Σ_{i,j} ∂_i v^j ∂_j m^i` (dealiased).
pub fn gradient_contraction(v: &SpectralField, m: &SpectralField) -> Result<SpectralField> {
    require_vector(v)?;
    require_vector(m)?;
    let d = m.dim();
    let n = m.grid().len();
    let mut acc = vec![0.0; n];
    for i in 0..d {
        let dm: Vec<SpectralField> = (0..d)
            .map(|j| derivative(&m.component(i), j, 1))
            .collect::<Result<_>>()?;
        for (j, dmj) in dm.iter().enumerate() {
            let dv = derivative(&v.component(j), i, 1)?;
            for ((a, x), y) in acc.iter_mut().zip(dv.values()).zip(dmj.values()) {
                *a += x * y;
            }
        }
    }
    Ok(SpectralField::from_values(m.grid().clone(), 1, acc)?.dealias())
}

/// Pressure source `G_v` for `v = (I - α²Δ)^{-1} m`:
/// `Σ_{i,j} [∂_i v^j ∂_j m^i - α² ∂_ii v^j Δv^j - α² ∂_i v^j Δ∂_i v^j]`.
pub fn pressure_source(
    m: &SpectralField,
    alpha: f64,
    model: MomentumModel,
) -> Result<SpectralField> {
    require_vector(m)?;
    let v = helmholtz_inverse(m, alpha);
    let g = velocity_gradients(m, &v)?;
    pressure_source_from(m, &v, &g, alpha, model)
}

fn pressure_source_from(
    m: &SpectralField,
    v: &SpectralField,
    g: &VelocityGradients,
    alpha: f64,
    model: MomentumModel,
) -> Result<SpectralField> {
    let d = m.dim();
    let n = m.grid().len();
    let mut acc = vec![0.0; n];
    for i in 0..d {
        for j in 0..d {
            for (p, a) in acc.iter_mut().enumerate() {
                *a += g.grad_v[i * d + j][p] * g.grad_m[i * d + j][p];
            }
        }
    }
    if model == MomentumModel::NavierStokesAlpha && alpha != 0.0 {
        let a2 = alpha * alpha;
        for i in 0..d {
            for j in 0..d {
                let vj = v.component(j);
                let d_ii = derivative(&vj, i, 2)?;
                let lap_d_i = laplacian(&derivative(&vj, i, 1)?);
                let lap_vj = &g.lap_v[j];
                let dv = &g.grad_v[i * d + j];
                for (p, a) in acc.iter_mut().enumerate() {
                    *a -= a2 * (d_ii.values()[p] * lap_vj[p] + dv[p] * lap_d_i.values()[p]);
                }
            }
        }
    }
    Ok(SpectralField::from_values(m.grid().clone(), 1, acc)?.dealias())
}

/// `J_v = ∇N G_v + α²∇vᵀΔv` with `v = (I - α²Δ)^{-1} m`.
///
/// For the Leray-α model the `α²∇vᵀΔv` term and the matching α² part of the
/// pressure source are dropped.
pub fn assemble_j(m: &SpectralField, alpha: f64, model: MomentumModel) -> Result<SpectralField> {
    require_vector(m)?;
    require_divergence_free(m, DIV_TOL)?;
    assemble_j_unchecked(m, alpha, model)
}

pub(crate) fn assemble_j_unchecked(
    m: &SpectralField,
    alpha: f64,
    model: MomentumModel,
) -> Result<SpectralField> {
    let d = m.dim();
    let n = m.grid().len();
    let v = helmholtz_inverse(m, alpha);
    let g = velocity_gradients(m, &v)?;
    let source = pressure_source_from(m, &v, &g, alpha, model)?;
    // The source is a divergence, so its mean is zero up to round-off.
    let potential = inverse_laplacian_unchecked(&source);
    let f = gradient(&potential)?;
    if model == MomentumModel::LerayAlpha || alpha == 0.0 {
        return Ok(f.with_flags(FieldFlags::MEAN_ZERO));
    }
    let a2 = alpha * alpha;
    let mut extra = vec![0.0; d * n];
    for i in 0..d {
        for j in 0..d {
            let dv = &g.grad_v[i * d + j];
            let lap = &g.lap_v[j];
            for p in 0..n {
                extra[i * n + p] += a2 * dv[p] * lap[p];
            }
        }
    }
    let extra = SpectralField::from_values(m.grid().clone(), d, extra)?.dealias();
    Ok(f.add(&extra)?.with_flags(FieldFlags::empty()))
}
