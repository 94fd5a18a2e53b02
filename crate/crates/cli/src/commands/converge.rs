//! `converge`: paired convergence study plus a power-law rate fit.

use serde::Serialize;
use varswap::closed_form::{check_theorem4_conditions, ConvergenceConditions};
use varswap::experiments::{convergence_study, rate_fit, ConvergenceTable, RateFit};
use varswap::Error;

use crate::config::ResolvedConfig;
use crate::output::{csv_comments, write_csv, write_json};
use crate::CliError;

#[derive(Serialize)]
struct ConvergeBody {
    conditions: ConvergenceConditions,
    table: ConvergenceTable,
    fit: Option<RateFit>,
    fit_error: Option<String>,
}

pub fn run(config: &ResolvedConfig) -> Result<(), CliError> {
    let n_list = config
        .n_list
        .clone()
        .or_else(|| config.n.map(|n| vec![n]))
        .ok_or_else(|| CliError::Config("grid.n_list is required for converge".into()))?;

    let conditions = check_theorem4_conditions(&config.model, config.horizon)?;
    let table = match convergence_study(
        &config.model,
        config.horizon,
        &n_list,
        config.substeps,
        config.paths,
        config.seed,
        config.scheme,
        config.override_conditions,
    ) {
        Ok(table) => table,
        Err(Error::ConditionsFailed(detail)) => {
            println!("refusing to run convergence study: {detail}");
            println!("  (--force runs it anyway, labeled exploratory)");
            return Err(CliError::Refusal("convergence conditions fail".into()));
        }
        Err(e) => return Err(e.into()),
    };

    let (fit, fit_error) = match rate_fit(&table) {
        Ok(fit) => (Some(fit), None),
        Err(e) => (None, Some(e.to_string())),
    };

    if !conditions.satisfied {
        println!("exploratory run: {}", conditions.detail);
    }
    println!(
        "{} | horizon {} | paths {} | seed {} | scheme {}",
        config.model.family_name(),
        config.horizon,
        config.paths,
        config.seed,
        config.scheme.tag()
    );
    println!("  {:>6} {:>14} {:>12} {:>14} {:>12}", "n", "gap", "gap_se", "cond_gap", "cond_se");
    for r in &table.rows {
        println!(
            "  {:>6} {:>14.6e} {:>12.3e} {:>14} {:>12}",
            r.n,
            r.gap,
            r.gap_se,
            r.cond_gap.map(|g| format!("{g:.6e}")).unwrap_or_else(|| "-".into()),
            r.cond_gap_se.map(|g| format!("{g:.3e}")).unwrap_or_else(|| "-".into()),
        );
    }
    match (&fit, &fit_error) {
        (Some(fit), _) => println!(
            "  rate fit: slope {:.4}, r^2 {:.4} ({} rows)",
            fit.slope, fit.r_squared, fit.points_used
        ),
        (None, Some(msg)) => println!("  rate fit unavailable: {msg}"),
        _ => {}
    }

    write_csv(config, "converge", &table.to_csv(&csv_comments(config)))?;
    write_json(config, "converge", ConvergeBody { conditions, table, fit, fit_error })?;
    Ok(())
}
