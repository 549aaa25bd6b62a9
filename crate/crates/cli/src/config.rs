//! Plain-text experiment configuration.
//!
//! ```text
//! mode = oracle2d
//! [grid]
//! n = 64
//! [model]
//! nu = 0.05
//! ```
//!
//! Keys are addressed as `section.key` (top-level keys have no prefix).
//! `#` starts a comment. Command-line overrides use the same addressing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use nsalpha_core::bsde2d::McEstimator;
use nsalpha_core::fixedpoint::InitialIterate;
use nsalpha_core::spectral::MomentumModel;
use nsalpha_core::stochastic::McConfig;
use nsalpha_core::AlphaModelParams;

use crate::error::{CliError, CliResult};

const KNOWN_KEYS: &[&str] = &[
    "mode",
    "name",
    "grid.n",
    "grid.dim",
    "model.nu",
    "model.alpha",
    "model.horizon",
    "model.box_length",
    "time.n_steps",
    "time.dt",
    "initial.family",
    "initial.variable",
    "initial.k1",
    "initial.k2",
    "initial.amplitude",
    "initial.amplitude2",
    "initial.kmax",
    "initial.seed",
    "initial.sigma",
    "initial.path",
    "solver.tol",
    "solver.max_iter",
    "solver.k",
    "solver.p",
    "solver.start",
    "solver.leray_alpha",
    "solver.truncation_monitor",
    "solver.check_uniqueness",
    "solver.oracle_dt",
    "mc.seed",
    "mc.n_paths",
    "mc.dt",
    "mc.estimator",
    "mc.refine",
    "mc.full_grid",
    "mc.points",
    "mc.times",
    "output.dir",
    "output.stride",
    "output.csv",
    "sweep.alphas",
    "sweep.mode",
    "acceptance.decay_tol",
    "acceptance.oracle_tol",
    "acceptance.z_max",
    "acceptance.ratio_max",
    "acceptance.div_tol",
    "acceptance.mild_tol",
    "acceptance.uniqueness_tol",
    "acceptance.order",
    "acceptance.order_tol",
    "acceptance.agree_max",
    "acceptance.stderr_scaling_tol",
];

// Where results go does not change what they are.
const LOCATION_KEYS: &[&str] = &["output.dir"];

/// Flat `section.key -> value` map in canonical (sorted) order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| {
                    CliError::config(format!("line {}", no + 1), "unterminated section header")
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(format!("line {}", no + 1), "expected `key = value`")
            })?;
            let key = qualify(&section, key.trim());
            check_known(&key)?;
            if entries
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(CliError::config(key, "given twice"));
            }
        }
        Ok(Self { entries })
    }

    /// Apply a `section.key=value` override.
    pub fn set(&mut self, assignment: &str) -> CliResult<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::config(assignment, "override must be `key=value`"))?;
        let key = key.trim().to_string();
        check_known(&key)?;
        self.entries.insert(key, value.trim().to_string());
        Ok(())
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.entries
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::config(key, format!("cannot parse `{v}`: {e}")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| CliError::config(key, "required"))
    }

    /// Whitespace-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> CliResult<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        self.entries
            .get(key)
            .map(|v| {
                v.split_whitespace()
                    .map(|s| {
                        s.parse::<T>()
                            .map_err(|e| CliError::config(key, format!("cannot parse `{s}`: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    /// `;`-separated points with whitespace-separated coordinates.
    pub fn get_points(&self, key: &str) -> CliResult<Option<Vec<Vec<f64>>>> {
        self.entries
            .get(key)
            .map(|v| {
                v.split(';')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| {
                        p.split_whitespace()
                            .map(|s| {
                                s.parse::<f64>().map_err(|e| {
                                    CliError::config(key, format!("cannot parse `{s}`: {e}"))
                                })
                            })
                            .collect()
                    })
                    .collect()
            })
            .transpose()
    }

    /// One `key=value` line per entry, sorted, without the output location.
    pub fn canonical(&self) -> String {
        self.entries
            .iter()
            .filter(|(k, _)| !LOCATION_KEYS.contains(&k.as_str()))
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// SHA-256 of [`RawConfig::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

fn qualify(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

fn check_known(key: &str) -> CliResult<()> {
    if KNOWN_KEYS.contains(&key) {
        Ok(())
    } else {
        Err(CliError::config(key, "unknown key"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Bsde2d,
    FixedPoint3d,
    Oracle2d,
    Oracle3d,
    Crosscheck,
    AlphaSweep,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "bsde2d" => Self::Bsde2d,
            "fixedpoint3d" => Self::FixedPoint3d,
            "oracle2d" => Self::Oracle2d,
            "oracle3d" => Self::Oracle3d,
            "crosscheck" => Self::Crosscheck,
            "alpha-sweep" => Self::AlphaSweep,
            other => {
                return Err(format!(
                    "unknown mode `{other}` (expected bsde2d, fixedpoint3d, oracle2d, oracle3d, crosscheck or alpha-sweep)"
                ))
            }
        })
    }
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bsde2d => "bsde2d",
            Self::FixedPoint3d => "fixedpoint3d",
            Self::Oracle2d => "oracle2d",
            Self::Oracle3d => "oracle3d",
            Self::Crosscheck => "crosscheck",
            Self::AlphaSweep => "alpha-sweep",
        }
    }

    pub fn uses_monte_carlo(self) -> bool {
        matches!(self, Self::Crosscheck)
    }
}

/// Which variable the analytic initial data describes in 2-D.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variable {
    /// `q = ω - α²Δω` directly.
    Q,
    /// The vorticity `ω`; `q` follows from the configured `α`.
    Omega,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    /// `amplitude · cos(2π⟨k1, x⟩/L)` (2-D), or a divergence-free shear
    /// mode `amplitude · sin(2π⟨k1, x⟩/L) e` with `e ⊥ k1` (3-D).
    SingleMode {
        k: Vec<i64>,
        amplitude: f64,
    },
    /// Sum of two cosine modes.
    TwoMode {
        k1: Vec<i64>,
        k2: Vec<i64>,
        amplitude: f64,
        amplitude2: f64,
    },
    RandomBand {
        kmax: usize,
        seed: u64,
    },
    /// Divergence-free Gaussian bump normalised in `W^{k,p}` (3-D).
    Bump {
        sigma: f64,
    },
    /// First record of an AFLD file.
    File {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub k: usize,
    pub p: f64,
    pub start: InitialIterate,
    pub model: MomentumModel,
    pub truncation_monitor: bool,
    pub check_uniqueness: bool,
    /// Output step of the comparison oracle.
    pub oracle_dt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McSettingsConfig {
    pub config: McConfig,
    pub estimator: McEstimator,
    pub full_grid: bool,
    pub points: Vec<Vec<f64>>,
    pub times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Acceptance {
    pub decay_tol: f64,
    pub oracle_tol: f64,
    pub z_max: f64,
    pub ratio_max: f64,
    pub div_tol: f64,
    pub mild_tol: f64,
    pub uniqueness_tol: f64,
    pub order: Option<f64>,
    pub order_tol: f64,
    /// Largest combined z-score between the two 2-D estimators.
    pub agree_max: f64,
    /// Allowed relative deviation of `stderr(N) / stderr(4N)` from 2.
    pub stderr_scaling_tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSettings {
    pub alphas: Vec<f64>,
    pub mode: Mode,
}

/// Validated experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub name: String,
    pub dim: usize,
    pub n: usize,
    pub params: AlphaModelParams,
    pub n_steps: usize,
    pub dt: f64,
    pub initial: InitialData,
    pub variable: Variable,
    pub solver: SolverSettings,
    pub mc: Option<McSettingsConfig>,
    pub out_dir: PathBuf,
    pub stride: usize,
    pub write_csv: bool,
    pub sweep: Option<SweepSettings>,
    pub acceptance: Acceptance,
    pub raw: RawConfig,
}

fn positive(key: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(key, format!("must be positive, got {v}")))
    }
}

fn wave_vector(raw: &RawConfig, key: &str, dim: usize, default: &[i64]) -> CliResult<Vec<i64>> {
    let k = raw
        .get_list::<i64>(key)?
        .unwrap_or_else(|| default.to_vec());
    if k.len() != dim {
        return Err(CliError::config(
            key,
            format!("needs {dim} integers, got {}", k.len()),
        ));
    }
    Ok(k)
}

impl ExperimentConfig {
    pub fn from_raw(raw: RawConfig) -> CliResult<Self> {
        let mode: Mode = raw.require("mode")?;
        let name = raw.get_str("name").unwrap_or(mode.as_str()).to_string();
        let default_dim = match mode {
            Mode::FixedPoint3d | Mode::Oracle3d => 3,
            _ => 2,
        };
        let dim: usize = raw.get_or("grid.dim", default_dim)?;
        if !(2..=3).contains(&dim) {
            return Err(CliError::config(
                "grid.dim",
                format!("must be 2 or 3, got {dim}"),
            ));
        }
        match mode {
            Mode::Bsde2d | Mode::Oracle2d | Mode::AlphaSweep if dim != 2 => {
                return Err(CliError::config(
                    "grid.dim",
                    format!("mode {} is two-dimensional", mode.as_str()),
                ));
            }
            Mode::FixedPoint3d | Mode::Oracle3d if dim != 3 => {
                return Err(CliError::config(
                    "grid.dim",
                    format!("mode {} is three-dimensional", mode.as_str()),
                ));
            }
            _ => {}
        }
        let n: usize = raw.require("grid.n")?;
        if n < 4 {
            return Err(CliError::config(
                "grid.n",
                "needs at least 4 points per axis",
            ));
        }
        let default_length = if dim == 2 { 1.0 } else { 2.0 };
        let params = AlphaModelParams::new(
            raw.require("model.nu")?,
            raw.get_or("model.alpha", 0.0)?,
            raw.require("model.horizon")?,
            dim,
            raw.get_or("model.box_length", default_length)?,
        )
        .map_err(|e| CliError::config("model", e.to_string()))?;
        // either the step count or the step size fixes the time grid
        let (n_steps, dt) = match (
            raw.get::<usize>("time.n_steps")?,
            raw.get::<f64>("time.dt")?,
        ) {
            (Some(_), Some(_)) => {
                return Err(CliError::config("time", "give n_steps or dt, not both"))
            }
            (Some(0), None) => return Err(CliError::config("time.n_steps", "must be positive")),
            (Some(s), None) => (s, params.horizon / s as f64),
            (None, Some(dt)) => {
                let dt = positive("time.dt", dt)?;
                let s = (params.horizon / dt).round();
                if s < 1.0 || ((params.horizon / dt) - s).abs() > 1e-9 {
                    return Err(CliError::config("time.dt", "must divide the horizon"));
                }
                (s as usize, dt)
            }
            (None, None) => return Err(CliError::config("time", "n_steps or dt is required")),
        };
        let initial =
            match raw.get_str("initial.family").unwrap_or("single-mode") {
                "single-mode" => InitialData::SingleMode {
                    k: wave_vector(
                        &raw,
                        "initial.k1",
                        dim,
                        &if dim == 2 { vec![1, 0] } else { vec![0, 0, 1] },
                    )?,
                    amplitude: raw.get_or("initial.amplitude", 1.0)?,
                },
                "two-mode" => InitialData::TwoMode {
                    k1: wave_vector(
                        &raw,
                        "initial.k1",
                        dim,
                        &if dim == 2 { vec![1, 0] } else { vec![0, 0, 1] },
                    )?,
                    k2: wave_vector(
                        &raw,
                        "initial.k2",
                        dim,
                        &if dim == 2 { vec![0, 1] } else { vec![0, 1, 0] },
                    )?,
                    amplitude: raw.get_or("initial.amplitude", 1.0)?,
                    amplitude2: raw.get_or("initial.amplitude2", 1.0)?,
                },
                "random-band" => InitialData::RandomBand {
                    kmax: raw.get_or("initial.kmax", 3)?,
                    seed: raw.require("initial.seed")?,
                },
                "bump" => InitialData::Bump {
                    sigma: positive("initial.sigma", raw.get_or("initial.sigma", 0.15)?)?,
                },
                "file" => InitialData::File {
                    path: raw.require::<String>("initial.path")?.into(),
                },
                other => return Err(CliError::config(
                    "initial.family",
                    format!(
                        "unknown family `{other}` (single-mode, two-mode, random-band, bump, file)"
                    ),
                )),
            };
        let variable = match raw.get_str("initial.variable").unwrap_or("q") {
            "q" => Variable::Q,
            "omega" => Variable::Omega,
            other => {
                return Err(CliError::config(
                    "initial.variable",
                    format!("expected q or omega, got `{other}`"),
                ))
            }
        };
        if variable == Variable::Omega && dim != 2 {
            return Err(CliError::config(
                "initial.variable",
                "omega applies to 2-D data only",
            ));
        }
        let solver = SolverSettings {
            tol: positive("solver.tol", raw.get_or("solver.tol", 1e-10)?)?,
            max_iter: raw.get_or("solver.max_iter", 50)?,
            k: raw.get_or("solver.k", 2)?,
            p: raw.get_or("solver.p", 4.0)?,
            start: match raw.get_str("solver.start").unwrap_or("constant") {
                "constant" => InitialIterate::Constant,
                "heat" => InitialIterate::HeatFlow,
                other => {
                    return Err(CliError::config(
                        "solver.start",
                        format!("expected constant or heat, got `{other}`"),
                    ))
                }
            },
            model: if raw.get_or("solver.leray_alpha", false)? {
                MomentumModel::LerayAlpha
            } else {
                MomentumModel::NavierStokesAlpha
            },
            truncation_monitor: raw.get_or("solver.truncation_monitor", true)?,
            check_uniqueness: raw.get_or("solver.check_uniqueness", false)?,
            oracle_dt: raw
                .get::<f64>("solver.oracle_dt")?
                .map(|v| positive("solver.oracle_dt", v))
                .transpose()?,
        };
        let mc = if raw.get_str("mc.n_paths").is_some() || mode.uses_monte_carlo() {
            let seed = raw.get::<u64>("mc.seed")?.ok_or_else(|| {
                CliError::config("mc.seed", "a seed is mandatory for Monte Carlo runs")
            })?;
            let n_paths: usize = raw.require("mc.n_paths")?;
            if n_paths < 2 {
                return Err(CliError::config("mc.n_paths", "needs at least 2 paths"));
            }
            let mc_dt = positive("mc.dt", raw.get_or("mc.dt", dt)?)?;
            Some(McSettingsConfig {
                config: McConfig::new(seed, n_paths, mc_dt)
                    .with_refine(raw.get_or("mc.refine", 1)?),
                estimator: match raw.get_str("mc.estimator").unwrap_or("girsanov") {
                    "girsanov" => McEstimator::Girsanov,
                    "characteristics" => McEstimator::Characteristics,
                    other => {
                        return Err(CliError::config(
                            "mc.estimator",
                            format!("expected girsanov or characteristics, got `{other}`"),
                        ))
                    }
                },
                full_grid: raw.get_or("mc.full_grid", false)?,
                points: raw.get_points("mc.points")?.unwrap_or_default(),
                times: raw
                    .get_list("mc.times")?
                    .unwrap_or_else(|| vec![params.horizon]),
            })
        } else {
            None
        };
        if let Some(mc) = &mc {
            if let Some(p) = mc.points.iter().find(|p| p.len() != dim) {
                return Err(CliError::config(
                    "mc.points",
                    format!("point {p:?} is not {dim}-dimensional"),
                ));
            }
            if mode == Mode::Crosscheck && mc.points.is_empty() {
                return Err(CliError::config(
                    "mc.points",
                    "crosscheck needs at least one evaluation point",
                ));
            }
        }
        let sweep = if mode == Mode::AlphaSweep {
            let alphas: Vec<f64> = raw.get_list("sweep.alphas")?.unwrap_or_default();
            if alphas.is_empty() {
                return Err(CliError::config("sweep.alphas", "needs at least one α"));
            }
            if alphas.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
                return Err(CliError::config("sweep.alphas", "α must be non-negative"));
            }
            if alphas.windows(2).any(|w| w[0] < w[1]) && alphas.windows(2).any(|w| w[0] > w[1]) {
                return Err(CliError::config("sweep.alphas", "must be sorted"));
            }
            let inner: Mode = raw.get_or("sweep.mode", Mode::Oracle2d)?;
            if !matches!(inner, Mode::Oracle2d | Mode::Bsde2d) {
                return Err(CliError::config("sweep.mode", "must be oracle2d or bsde2d"));
            }
            Some(SweepSettings {
                alphas,
                mode: inner,
            })
        } else {
            None
        };
        let acceptance = Acceptance {
            decay_tol: raw.get_or("acceptance.decay_tol", 1e-8)?,
            oracle_tol: raw.get_or("acceptance.oracle_tol", 1e-5)?,
            z_max: raw.get_or("acceptance.z_max", 4.0)?,
            ratio_max: raw.get_or("acceptance.ratio_max", 0.5)?,
            div_tol: raw.get_or("acceptance.div_tol", 1e-8)?,
            mild_tol: raw.get_or("acceptance.mild_tol", 1e-4)?,
            uniqueness_tol: raw.get_or("acceptance.uniqueness_tol", 1e-5)?,
            order: raw.get("acceptance.order")?,
            order_tol: raw.get_or("acceptance.order_tol", 0.3)?,
            agree_max: raw.get_or("acceptance.agree_max", 3.0)?,
            stderr_scaling_tol: raw.get_or("acceptance.stderr_scaling_tol", 0.2)?,
        };
        for (key, v) in [
            ("acceptance.decay_tol", acceptance.decay_tol),
            ("acceptance.oracle_tol", acceptance.oracle_tol),
            ("acceptance.z_max", acceptance.z_max),
            ("acceptance.ratio_max", acceptance.ratio_max),
            ("acceptance.div_tol", acceptance.div_tol),
            ("acceptance.mild_tol", acceptance.mild_tol),
            ("acceptance.uniqueness_tol", acceptance.uniqueness_tol),
            ("acceptance.order_tol", acceptance.order_tol),
            ("acceptance.agree_max", acceptance.agree_max),
            (
                "acceptance.stderr_scaling_tol",
                acceptance.stderr_scaling_tol,
            ),
        ] {
            positive(key, v)?;
        }
        Ok(Self {
            mode,
            name,
            dim,
            n,
            params,
            n_steps,
            dt,
            initial,
            variable,
            solver,
            mc,
            out_dir: raw.get_str("output.dir").unwrap_or("out").into(),
            stride: raw.get_or("output.stride", 10)?,
            write_csv: raw.get_or("output.csv", false)?,
            sweep,
            acceptance,
            raw,
        })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        Self::from_raw(RawConfig::parse(text)?)
    }

    /// Read `path` and apply `overrides` in order.
    pub fn load(path: &Path, overrides: &[String]) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
        let mut raw = RawConfig::parse(&text)?;
        for o in overrides {
            raw.set(o)?;
        }
        Self::from_raw(raw)
    }

    pub fn seed(&self) -> Option<u64> {
        self.mc.as_ref().map(|m| m.config.seed)
    }
}
