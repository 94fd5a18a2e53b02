//! `price`: Monte Carlo estimates of all four swap payoffs for a single
//! sampling count, gated by the finiteness classification.

use serde::Serialize;
use varswap::experiments::collect_payoff_samples;
use varswap::models::{classify_finiteness, Finiteness, FinitenessVerdict};
use varswap::payoffs::{mc_estimate, McEstimate};
use varswap::sde_sim::{simulate_paths, TimeGrid};

use crate::config::ResolvedConfig;
use crate::output::{csv_comments, csv_field, write_csv, write_json};
use crate::CliError;

/// Largest batch written by `--dump-paths`; price runs use far more paths
/// than anyone wants in a CSV.
const DUMP_PATH_CAP: usize = 256;

#[derive(Serialize)]
struct PriceBody {
    verdict: FinitenessVerdict,
    refused: bool,
    estimates: Vec<McEstimate>,
}

pub fn run(config: &ResolvedConfig) -> Result<(), CliError> {
    let n = config
        .n
        .ok_or_else(|| CliError::Config("grid.n is required for price".into()))?;
    let verdict = classify_finiteness(&config.model, config.horizon, n)?;

    if verdict.ep_discrete == Finiteness::Infinite && !config.force {
        println!("refusing to price: E(P^n(T)) is infinite for this model and horizon");
        println!("  rationale: {}", verdict.rationale);
        if let Some(tstar) = verdict.tstar {
            println!("  explosion time T* = {tstar}");
        }
        println!("  (--force runs the estimate anyway, labeled exploratory)");
        write_json(config, "price", PriceBody { verdict, refused: true, estimates: Vec::new() })?;
        return Err(CliError::Refusal(
            "discrete swap expectation diverges; no headline price".into(),
        ));
    }

    let samples = collect_payoff_samples(
        &config.model,
        config.horizon,
        &[n],
        config.substeps,
        config.paths,
        config.seed,
        config.scheme,
    )?;
    let pn = &samples.pn[0];
    let vn: Vec<f64> = pn.iter().map(|&x| x.sqrt()).collect();
    let v_qv: Vec<f64> = samples.p_qv.iter().map(|&x| x.sqrt()).collect();

    let mut estimates = vec![
        mc_estimate(pn, "pn")?.with_seed(config.seed),
        mc_estimate(&samples.p_qv, "p_qv")?.with_seed(config.seed),
        mc_estimate(&vn, "vn")?.with_seed(config.seed),
        mc_estimate(&v_qv, "v_qv")?.with_seed(config.seed),
    ];
    if config.annualize {
        let factor = 252.0 / n as f64;
        for i in 0..4 {
            let e = &estimates[i];
            let label = format!("{}_annualized", e.label);
            estimates.push(e.scaled(factor, label));
        }
    }

    if verdict.ep_discrete != Finiteness::Finite {
        println!("exploratory run: discrete-payoff finiteness is {:?}", verdict.ep_discrete);
    }
    println!(
        "{} | horizon {} | n {} | paths {} | seed {} | scheme {}",
        config.model.family_name(),
        config.horizon,
        n,
        config.paths,
        config.seed,
        config.scheme.tag()
    );
    for e in &estimates {
        println!(
            "  {:<16} {:>.10e}  (se {:.3e}, 95% CI [{:.6e}, {:.6e}])",
            e.label, e.mean, e.std_error, e.ci_low, e.ci_high
        );
    }

    let mut csv = String::new();
    for c in csv_comments(config) {
        csv.push_str(&format!("# {c}\n"));
    }
    csv.push_str("estimand,n,paths,seed,mean,std_error,ci_low,ci_high\n");
    for e in &estimates {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            csv_field(&e.label),
            n,
            e.n_samples,
            config.seed,
            e.mean,
            e.std_error,
            e.ci_low,
            e.ci_high
        ));
    }
    write_csv(config, "price", &csv)?;
    write_json(config, "price", PriceBody { verdict, refused: false, estimates })?;

    if config.dump_paths {
        dump_paths(config, n)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DumpSidecar<'a> {
    seed: u64,
    scheme: &'a str,
    spec_hash: String,
    grid: TimeGrid,
    paths: usize,
}

fn dump_paths(config: &ResolvedConfig, n: usize) -> Result<(), CliError> {
    let grid = TimeGrid::new(config.horizon, n, config.substeps)?;
    let count = config.paths.min(DUMP_PATH_CAP);
    let batch = simulate_paths(&config.model, &grid, count, config.seed, config.scheme)?;
    write_csv(config, "paths", &batch.to_csv())?;
    write_json(
        config,
        "paths",
        DumpSidecar {
            seed: config.seed,
            scheme: config.scheme.tag(),
            spec_hash: format!("{:016x}", batch.meta().spec_hash),
            grid,
            paths: count,
        },
    )?;
    Ok(())
}
