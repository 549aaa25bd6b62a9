//! Library-level runs of small experiments.

use nsalpha_cli::{execute, CliError, ExperimentConfig};

const DECAY: &str = "
mode = oracle2d
name = decay
[grid]
n = 16
[model]
nu = 0.05
alpha = 0.1
horizon = 0.5
[time]
dt = 0.05
[initial]
family = single-mode
k1 = 1 1
[acceptance]
decay_tol = 1e-10
";

const CROSSCHECK: &str = "
mode = crosscheck
name = small-crosscheck
[grid]
n = 16
[model]
nu = 0.05
alpha = 0.1
horizon = 0.2
[time]
dt = 0.02
[initial]
family = single-mode
k1 = 1 0
[mc]
seed = 3
n_paths = 400
dt = 0.01
points = 0.1 0.2; 0.6 0.3
times = 0.2
";

fn config(text: &str, overrides: &[&str]) -> Result<ExperimentConfig, CliError> {
    let mut raw = nsalpha_cli::RawConfig::parse(text)?;
    for o in overrides {
        raw.set(o)?;
    }
    ExperimentConfig::from_raw(raw)
}

#[test]
fn oracle_decay_passes_every_verdict() {
    let out = execute(&config(DECAY, &[]).unwrap()).unwrap();
    let report = out.report;
    assert!(report.passed(), "{:#?}", report.verdicts);
    let decay = report.verdict("exact decay").expect("decay verdict");
    assert!(decay.value.unwrap() < 1e-10);
    assert_eq!(report.mode, "oracle2d");
    assert_eq!(report.seed, None);
    // every listed file is present with the recorded size
    assert_eq!(report.files.len(), out.files.len());
    for (entry, (name, bytes)) in report.files.iter().zip(&out.files) {
        assert_eq!(&entry.name, name);
        assert_eq!(entry.bytes, bytes.len());
    }
}

#[test]
fn crosscheck_is_reproducible() {
    let c = config(CROSSCHECK, &[]).unwrap();
    let a = execute(&c).unwrap();
    let b = execute(&c).unwrap();
    assert_eq!(a.report.to_json(), b.report.to_json());
    assert_eq!(a.files, b.files);
    assert_eq!(a.report.seed, Some(3));
    let other = execute(&config(CROSSCHECK, &["mc.seed=4"]).unwrap()).unwrap();
    assert_ne!(a.report.tables, other.report.tables);
}

#[test]
fn unknown_mode_names_the_field() {
    match config(DECAY, &["mode=spectral-magic"]) {
        Err(CliError::Config { field, .. }) => assert_eq!(field, "mode"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn sweep_at_zero_alpha_has_a_zero_row() {
    let c = config(
        DECAY,
        &["mode=alpha-sweep", "sweep.alphas=0", "sweep.mode=oracle2d"],
    )
    .unwrap();
    let report = execute(&c).unwrap().report;
    let table = report.table("alpha_sweep").unwrap();
    let row: Vec<f64> = table
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .take(3)
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(row, vec![0.0, 0.0, 0.0]);
    assert_eq!(report.metric("fitted_order"), None);
}

#[test]
fn empty_sweep_is_a_config_error() {
    let err = config(
        DECAY,
        &["mode=alpha-sweep", "sweep.alphas=", "sweep.mode=oracle2d"],
    )
    .unwrap_err();
    assert!(matches!(err, CliError::Config { .. }), "{err:?}");
}

#[test]
fn monte_carlo_modes_require_a_seed() {
    let text = CROSSCHECK.replace("seed = 3\n", "");
    match config(&text, &[]) {
        Err(CliError::Config { field, .. }) => assert_eq!(field, "mc.seed"),
        other => panic!("expected a config error, got {other:?}"),
    }
}
