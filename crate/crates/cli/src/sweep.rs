//! Filter-length sweeps against the `α = 0` baseline.

use nsalpha_core::bsde2d::picard_solve_2d;
use nsalpha_core::oracle::oracle_vorticity_2d;
use nsalpha_core::SpectralField;

use crate::config::{ExperimentConfig, Mode};
use crate::error::{CliError, CliResult, Context};
use crate::initial::build_initial;
use crate::report::{Recorder, Verdict};

/// Differences at or below this multiple of `‖q₀(T)‖₂` are round-off.
pub const ROUND_OFF: f64 = 1e-13;

/// Least-squares slope of `log diff` against `log α` over the points with
/// `α > 0` and `diff > floor`. `None` with fewer than two such points.
pub fn fit_order(points: &[(f64, f64)], floor: f64) -> Option<f64> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(a, d)| *a > 0.0 && *d > floor)
        .map(|(a, d)| (a.ln(), d.ln()))
        .collect();
    if usable.len() < 2 {
        return None;
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

fn terminal_q(
    config: &ExperimentConfig,
    inner: Mode,
    alpha: f64,
) -> CliResult<(SpectralField, u64)> {
    let params = config.params.with_alpha(alpha);
    let psi = build_initial(config, alpha)?;
    match inner {
        Mode::Oracle2d => {
            let run = oracle_vorticity_2d(&psi, &params, config.dt, config.n_steps)
                .context(format!("oracle at α = {alpha}"))?;
            Ok((run.last().clone(), 0))
        }
        Mode::Bsde2d => {
            let state = picard_solve_2d(
                &psi,
                &params,
                config.n_steps,
                config.solver.tol,
                config.solver.max_iter,
                None,
            )
            .context(format!("picard iteration at α = {alpha}"))?;
            let iterations = state.diagnostics.len() as u64 - 1;
            Ok((state.iterate.theta.last().clone(), iterations))
        }
        other => Err(CliError::config(
            "sweep.mode",
            format!("{} cannot be swept", other.as_str()),
        )),
    }
}

/// Run the inner mode at every configured α and at `α = 0`, tabulate
/// `‖q_α(T) - q₀(T)‖₂` and fit its order in α.
pub fn alpha_sweep(config: &ExperimentConfig, rec: &mut Recorder) -> CliResult<()> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::config("sweep", "alpha-sweep needs a [sweep] section"))?;
    let (baseline, it) = terminal_q(config, sweep.mode, 0.0)?;
    rec.accounting.iterations += it;
    rec.field("q_final_alpha0", &baseline)?;
    let scale = baseline.l2_norm();
    let mut rows = Vec::with_capacity(sweep.alphas.len());
    for (i, &alpha) in sweep.alphas.iter().enumerate() {
        let q = if alpha == 0.0 {
            baseline.clone()
        } else {
            let (q, it) = terminal_q(config, sweep.mode, alpha)?;
            rec.accounting.iterations += it;
            q
        };
        rec.field(&format!("q_final_{i}"), &q)?;
        let diff = q.sub(&baseline).context("difference")?.l2_norm();
        rows.push((alpha, diff));
    }
    let floor = ROUND_OFF * scale;
    let mut csv = String::from("alpha,l2_difference,relative_difference,local_order\n");
    for (i, (alpha, diff)) in rows.iter().enumerate() {
        let local = if i > 0 {
            fit_order(&rows[i - 1..=i], floor).map_or_else(String::new, |p| format!("{p:.17e}"))
        } else {
            String::new()
        };
        let rel = if scale == 0.0 { *diff } else { diff / scale };
        csv.push_str(&format!("{alpha:.17e},{diff:.17e},{rel:.17e},{local}\n"));
    }
    rec.table("alpha_sweep", csv);
    let fitted = fit_order(&rows, floor);
    if let Some(p) = fitted {
        rec.metric("fitted_order", p);
    }
    rec.metric("baseline_l2", scale);
    if let Some(target) = config.acceptance.order {
        let tol = config.acceptance.order_tol;
        rec.verdict(match fitted {
            Some(p) => Verdict {
                name: "fitted order".into(),
                passed: (p - target).abs() <= tol,
                value: Some(p),
                threshold: Some(target),
                detail: format!("|order - {target}| <= {tol}"),
            },
            None => Verdict::flag(
                "fitted order",
                false,
                "no order: fewer than two differences above round-off",
            ),
        });
    }
    Ok(())
}
