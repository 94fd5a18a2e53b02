//! `tail`: Hill tail-index diagnostics on freshly simulated samples.

use serde::Serialize;
use varswap::experiments::{
    collect_payoff_samples, integrated_variance_samples, tail_diagnostic, TailReport,
};
use varswap::models::classify_finiteness;

use crate::config::{ResolvedConfig, TailStatistic};
use crate::output::{csv_comments, write_csv, write_json};
use crate::CliError;

#[derive(Serialize)]
struct TailBody {
    statistic: TailStatistic,
    tstar: Option<f64>,
    report: TailReport,
}

pub fn run(config: &ResolvedConfig) -> Result<(), CliError> {
    let n = config
        .n
        .ok_or_else(|| CliError::Config("grid.n is required for tail".into()))?;

    let samples = match config.tail_statistic {
        TailStatistic::IntegratedVariance => integrated_variance_samples(
            &config.model,
            config.horizon,
            n * config.substeps,
            config.paths,
            config.seed,
            config.scheme,
        )?,
        TailStatistic::Pn => {
            let s = collect_payoff_samples(
                &config.model,
                config.horizon,
                &[n],
                config.substeps,
                config.paths,
                config.seed,
                config.scheme,
            )?;
            s.pn.into_iter().next().expect("one n requested")
        }
    };
    let report = tail_diagnostic(&samples, config.tail_fraction)?;
    let tstar = classify_finiteness(&config.model, config.horizon, n)?.tstar;

    println!(
        "{} | horizon {} | {:?} | paths {} | fraction {}",
        config.model.family_name(),
        config.horizon,
        config.tail_statistic,
        config.paths,
        config.tail_fraction
    );
    if let Some(tstar) = tstar {
        println!("  explosion time T* = {tstar}");
    }
    println!(
        "  hill index {:.4} (95% CI [{:.4}, {:.4}], k = {})",
        report.index, report.ci_low, report.ci_high, report.k_used
    );
    for p in &report.sweep {
        println!("    fraction {:>5}: index {:.4}", p.fraction, p.index);
    }
    println!("  verdict: {:?}", report.verdict);

    let mut csv = String::new();
    for c in csv_comments(config) {
        csv.push_str(&format!("# {c}\n"));
    }
    csv.push_str("fraction,index,ci_low,ci_high,k,verdict\n");
    csv.push_str(&format!(
        "{},{},{},{},{},{:?}\n",
        report.fraction, report.index, report.ci_low, report.ci_high, report.k_used, report.verdict
    ));
    for p in &report.sweep {
        csv.push_str(&format!("{},{},,,,\n", p.fraction, p.index));
    }
    write_csv(config, "tail", &csv)?;
    write_json(config, "tail", TailBody { statistic: config.tail_statistic, tstar, report })?;
    Ok(())
}
