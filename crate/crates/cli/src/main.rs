use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nsalpha_cli::{run, ExperimentConfig, THREADS_ENV};

#[derive(Parser)]
#[command(name = "nsalpha", version, about = "Navier–Stokes-α experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its report.
    Run {
        config: PathBuf,
        /// Override a config entry, `section.key=value`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory (`output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Monte Carlo seed (`mc.seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Assemble the Leray-α nonlinearity (`solver.leray_alpha`).
        #[arg(long)]
        leray_alpha: bool,
    },
    /// Validate a config and print its canonical form and hash.
    Check {
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn init_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .map_err(|_| format!("{THREADS_ENV} must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match cli.command {
        Command::Check { config, set } => match ExperimentConfig::load(&config, &set) {
            Ok(c) => {
                print!("{}", c.raw.canonical());
                println!("hash = {}", c.raw.hash());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Run {
            config,
            mut set,
            out,
            seed,
            leray_alpha,
        } => {
            // command-line flags win over the file and over --set
            if let Some(out) = out {
                set.push(format!("output.dir={}", out.display()));
            }
            if let Some(seed) = seed {
                set.push(format!("mc.seed={seed}"));
            }
            if leray_alpha {
                set.push("solver.leray_alpha=true".into());
            }
            let config = match ExperimentConfig::load(&config, &set) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match run(&config) {
                Ok(report) => {
                    for v in &report.verdicts {
                        let value = v.value.map_or_else(String::new, |x| format!(" {x:.3e}"));
                        let threshold = v
                            .threshold
                            .map_or_else(String::new, |x| format!(" (limit {x:.3e})"));
                        println!(
                            "{} {}{value}{threshold} {}",
                            if v.passed { "PASS" } else { "FAIL" },
                            v.name,
                            v.detail
                        );
                    }
                    println!("report: {}", config.out_dir.join("report.json").display());
                    if report.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
