//! Run reports and their on-disk layout.
//!
//! `report.json` and every data file depend only on the configuration and
//! seed. Wall-clock time and the worker count go to `timing.json`.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use nsalpha_core::io::{strided, write_field};
use nsalpha_core::{SpectralField, TimeSeries};

use crate::error::{CliResult, Context};

/// A named CSV table, embedded verbatim.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    /// Measured quantity, when the check is a threshold.
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

impl Verdict {
    /// `value <= threshold`; non-finite values fail.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value.is_finite() && value <= threshold,
            value: Some(value),
            threshold: Some(threshold),
            detail: String::new(),
        }
    }

    pub fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value: None,
            threshold: None,
            detail: detail.into(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Accounting {
    /// Solver iterations across all runs of the experiment.
    pub iterations: u64,
    /// Monte Carlo evaluation points (one per point and time).
    pub mc_evaluations: u64,
    /// Simulated paths summed over evaluations.
    pub mc_paths: u64,
    /// Euler–Maruyama steps summed over paths.
    pub mc_path_steps: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub name: String,
    pub mode: String,
    pub config_hash: String,
    /// Canonical `key=value` form of the configuration.
    pub config: String,
    pub seed: Option<u64>,
    pub code_version: String,
    pub metrics: Vec<(String, f64)>,
    pub tables: Vec<Table>,
    pub verdicts: Vec<Verdict>,
    pub accounting: Accounting,
    pub files: Vec<FileEntry>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    pub fn table(&self, name: &str) -> Option<&str> {
        self.tables
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.csv.as_str())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }
}

/// Collects the outputs of one run before they are written.
#[derive(Debug, Default)]
pub struct Recorder {
    pub stride: usize,
    pub metrics: Vec<(String, f64)>,
    pub tables: Vec<Table>,
    pub verdicts: Vec<Verdict>,
    pub accounting: Accounting,
    pub files: Vec<(String, Vec<u8>)>,
}

impl Recorder {
    pub fn new(stride: usize) -> Self {
        Self {
            stride: stride.max(1),
            ..Self::default()
        }
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push((name.into(), value));
    }

    /// Embed a table and also write it as `<name>.csv`.
    pub fn table(&mut self, name: &str, csv: String) {
        self.files
            .push((format!("{name}.csv"), csv.clone().into_bytes()));
        self.tables.push(Table {
            name: name.to_string(),
            csv,
        });
    }

    pub fn verdict(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    pub fn field(&mut self, name: &str, f: &SpectralField) -> CliResult<()> {
        let mut buf = Vec::new();
        write_field(&mut buf, f).context(format!("encoding {name}"))?;
        self.files.push((format!("{name}.afld"), buf));
        Ok(())
    }

    /// Every `stride`-th slice (and the last) as one AFLD stream.
    pub fn series(&mut self, name: &str, s: &TimeSeries) -> CliResult<()> {
        let mut buf = Vec::new();
        for i in strided(s.len(), self.stride) {
            write_field(&mut buf, s.slice(i)).context(format!("encoding {name}"))?;
        }
        self.files.push((format!("{name}.afld"), buf));
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body.into_bytes()));
    }

    pub fn add_paths(&mut self, evaluations: u64, paths_per_evaluation: u64, steps_per_path: u64) {
        self.accounting.mc_evaluations += evaluations;
        self.accounting.mc_paths += evaluations * paths_per_evaluation;
        self.accounting.mc_path_steps += evaluations * paths_per_evaluation * steps_per_path;
    }

    /// Nest another recorder's output under `prefix`.
    pub fn absorb(&mut self, prefix: &str, other: Recorder) {
        self.metrics.extend(
            other
                .metrics
                .into_iter()
                .map(|(n, v)| (format!("{prefix}/{n}"), v)),
        );
        self.tables.extend(other.tables.into_iter().map(|t| Table {
            name: format!("{prefix}/{}", t.name),
            csv: t.csv,
        }));
        self.verdicts
            .extend(other.verdicts.into_iter().map(|v| Verdict {
                name: format!("{prefix}/{}", v.name),
                ..v
            }));
        self.files.extend(
            other
                .files
                .into_iter()
                .map(|(n, b)| (format!("{prefix}/{n}"), b)),
        );
        let a = other.accounting;
        self.accounting.iterations += a.iterations;
        self.accounting.mc_evaluations += a.mc_evaluations;
        self.accounting.mc_paths += a.mc_paths;
        self.accounting.mc_path_steps += a.mc_path_steps;
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write data files, `report.json` and `manifest.json` under `dir`.
pub fn write_outputs(dir: &Path, report: &RunReport, files: &[(String, Vec<u8>)]) -> CliResult<()> {
    for (name, bytes) in files {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).context(format!("creating {}", parent.display()))?;
        }
        std::fs::write(&path, bytes).context(format!("writing {}", path.display()))?;
    }
    std::fs::create_dir_all(dir).context(format!("creating {}", dir.display()))?;
    let manifest = serde_json::json!({
        "config_hash": report.config_hash,
        "seed": report.seed,
        "code_version": report.code_version,
        "files": report.files,
    });
    let manifest = serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n";
    std::fs::write(dir.join("manifest.json"), manifest).context("writing manifest.json")?;
    std::fs::write(dir.join("report.json"), report.to_json()).context("writing report.json")?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub finished_unix: u64,
    pub threads: usize,
}

pub fn write_timing(dir: &Path, timing: &Timing) -> CliResult<()> {
    let body = serde_json::to_string_pretty(timing).expect("timing serialises") + "\n";
    std::fs::write(dir.join("timing.json"), body).context("writing timing.json")
}
