//! Analytic initial data.

use std::f64::consts::PI;

use nsalpha_core::fixedpoint::centered_bump;
use nsalpha_core::io::load_field;
use nsalpha_core::spectral::{helmholtz_forward, leray_project, random_band_field, FieldFlags};
use nsalpha_core::{Grid, SpectralField};

use crate::config::{ExperimentConfig, InitialData, Variable};
use crate::error::{CliError, CliResult, Context};

fn phase(k: &[i64], x: &[f64], length: f64) -> f64 {
    2.0 * PI * k.iter().zip(x).map(|(k, x)| *k as f64 * x).sum::<f64>() / length
}

/// Unit vector orthogonal to `k`, built from the axis `k` is least aligned with.
fn transverse(k: &[i64]) -> [f64; 3] {
    let axis = (0..3).min_by_key(|&a| (k[a].abs(), a)).unwrap_or(0);
    let k2: f64 = k.iter().map(|k| (*k * *k) as f64).sum();
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    for a in 0..3 {
        e[a] -= k[axis] as f64 * k[a] as f64 / k2;
    }
    let n = e.iter().map(|x| x * x).sum::<f64>().sqrt();
    e.map(|x| x / n)
}

fn check_wave(field: &str, k: &[i64]) -> CliResult<()> {
    if k.iter().all(|&k| k == 0) {
        return Err(CliError::config(field, "wave vector must be non-zero"));
    }
    Ok(())
}

fn cosine_2d(grid: &Grid, modes: &[(&[i64], f64)]) -> CliResult<SpectralField> {
    let l = grid.length();
    SpectralField::scalar_from_fn(grid.clone(), |x| {
        modes.iter().map(|(k, a)| a * phase(k, x, l).cos()).sum()
    })
    .context("building initial data")
}

fn shear_3d(grid: &Grid, modes: &[(&[i64], f64)]) -> CliResult<SpectralField> {
    let l = grid.length();
    let dirs: Vec<[f64; 3]> = modes.iter().map(|(k, _)| transverse(k)).collect();
    SpectralField::from_fn(grid.clone(), 3, |x, c| {
        modes
            .iter()
            .zip(&dirs)
            .map(|((k, a), e)| a * e[c] * phase(k, x, l).sin())
            .sum()
    })
    .context("building initial data")
}

/// The 2-D `q₀` or the 3-D `m₀` described by `config`, on its grid and for
/// filter length `alpha`.
pub fn build_initial(config: &ExperimentConfig, alpha: f64) -> CliResult<SpectralField> {
    let grid = config.params.grid(config.n).context("building grid")?;
    let dim = config.dim;
    let field = match &config.initial {
        InitialData::SingleMode { k, amplitude } => {
            check_wave("initial.k1", k)?;
            if dim == 2 {
                cosine_2d(&grid, &[(k, *amplitude)])?
            } else {
                shear_3d(&grid, &[(k, *amplitude)])?
            }
        }
        InitialData::TwoMode {
            k1,
            k2,
            amplitude,
            amplitude2,
        } => {
            check_wave("initial.k1", k1)?;
            check_wave("initial.k2", k2)?;
            let modes: [(&[i64], f64); 2] = [(k1, *amplitude), (k2, *amplitude2)];
            if dim == 2 {
                cosine_2d(&grid, &modes)?
            } else {
                shear_3d(&grid, &modes)?
            }
        }
        InitialData::RandomBand { kmax, seed } => {
            let f = random_band_field(&grid, if dim == 2 { 1 } else { 3 }, *kmax, *seed)
                .context("random data")?;
            if dim == 2 {
                f
            } else {
                leray_project(&f).context("projecting random data")?
            }
        }
        InitialData::Bump { sigma } => {
            if dim != 3 {
                return Err(CliError::config(
                    "initial.family",
                    "the bump is three-dimensional",
                ));
            }
            centered_bump(&grid, *sigma, config.solver.k, config.solver.p)
                .context("building the bump")?
        }
        InitialData::File { path } => {
            let f = load_field(path).context(format!("loading {}", path.display()))?;
            if f.grid().shape() != grid.shape() || (f.grid().length() - grid.length()).abs() > 1e-12
            {
                return Err(CliError::config(
                    "initial.path",
                    format!(
                        "field grid {:?} does not match the configured grid",
                        f.grid().shape()
                    ),
                ));
            }
            let expected = if dim == 2 { 1 } else { 3 };
            if f.n_components() != expected {
                return Err(CliError::config(
                    "initial.path",
                    format!("expected {expected} components, found {}", f.n_components()),
                ));
            }
            f
        }
    };
    let field = field.remove_mean();
    Ok(match (dim, config.variable) {
        (2, Variable::Omega) => helmholtz_forward(&field, alpha).with_flags(FieldFlags::MEAN_ZERO),
        (2, Variable::Q) => field.with_flags(FieldFlags::MEAN_ZERO),
        _ => field,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transverse_is_orthogonal_unit() {
        for k in [[0, 0, 1], [1, 2, 0], [1, 1, 1], [3, -1, 2]] {
            let e = transverse(&k);
            let dot: f64 = (0..3).map(|a| e[a] * k[a] as f64).sum();
            let n: f64 = e.iter().map(|x| x * x).sum();
            assert!(
                dot.abs() < 1e-14 && (n - 1.0).abs() < 1e-14,
                "{k:?} -> {e:?}"
            );
        }
    }
}
