//! Flag-driven analytic subcommands: `explode`, `laplace`, `moments`.
//! These wrap pure closed forms; output goes to stdout and optionally to
//! a JSON file.

use std::path::Path;

use serde::Serialize;
use varswap::closed_form::{
    dufresne_moment, dufresne_r_moment_as_printed, explosion_time, laplace_transform_32,
    q_transform, ExplosionReport, MomentValue, QTransform,
};
use varswap::models::ThreeHalves;

use crate::output::VERSION;
use crate::CliError;

fn write_json_file<T: Serialize>(path: &Path, params: T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&params)
        .map_err(|e| CliError::Config(format!("serialization failed: {e}")))?;
    std::fs::write(path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

#[derive(Serialize)]
struct ExplodeBody {
    version: &'static str,
    kappa: f64,
    eta: f64,
    rho: f64,
    report: ExplosionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    q_transform: Option<QTransform>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tstar_after: Option<f64>,
}

pub fn explode(
    kappa: f64,
    eta: f64,
    rho: f64,
    theta: f64,
    gamma: Option<f64>,
    with_transform: bool,
    json: Option<&Path>,
) -> Result<(), CliError> {
    let report = explosion_time(kappa, eta, rho)?;
    println!("chi = {}", report.chi);
    println!("delta = {}", report.delta);
    println!("branch = {:?}", report.branch);
    println!("tstar = {}", report.tstar);

    let mut transform = None;
    let mut tstar_after = None;
    if with_transform {
        let q = q_transform(kappa, theta, eta, rho, gamma)?;
        let after = explosion_time(q.kappa_q, eta, rho)?;
        println!(
            "q-transform: gamma = {}, kappa_q = {}, theta_q = {}, chi_q = {}, delta_q = {}",
            q.gamma, q.kappa_q, q.theta_q, q.chi_q, q.delta_q
        );
        println!("tstar under Q = {}", after.tstar);
        tstar_after = Some(after.tstar);
        transform = Some(q);
    }
    if let Some(path) = json {
        write_json_file(
            path,
            ExplodeBody {
                version: VERSION,
                kappa,
                eta,
                rho,
                report,
                q_transform: transform,
                tstar_after,
            },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct LaplaceBody {
    version: &'static str,
    model: ThreeHalves,
    horizon: f64,
    points: Vec<(f64, f64)>,
}

#[allow(clippy::too_many_arguments)]
pub fn laplace(
    p: f64,
    q: f64,
    epsilon: f64,
    v0: f64,
    horizon: f64,
    lambdas: &[f64],
    json: Option<&Path>,
) -> Result<(), CliError> {
    if lambdas.is_empty() {
        return Err(CliError::Config("at least one --lambdas value required".into()));
    }
    let model = ThreeHalves { s0: 100.0, v0, p, q, epsilon };
    varswap::models::ModelSpec::ThreeHalves(model).validate()?;
    let mut points = Vec::with_capacity(lambdas.len());
    println!("E(exp(-lambda int_0^T v ds)) for p={p}, q={q}, epsilon={epsilon}, v0={v0}, T={horizon}");
    for &lam in lambdas {
        let value = laplace_transform_32(lam, &model, horizon)?;
        println!("  lambda {lam:>10}: {value:.12}");
        points.push((lam, value));
    }
    if let Some(path) = json {
        write_json_file(path, LaplaceBody { version: VERSION, model, horizon, points })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct MomentRow {
    order: f64,
    value: MomentValue,
    #[serde(skip_serializing_if = "Option::is_none")]
    as_printed: Option<Result<f64, String>>,
}

#[derive(Serialize)]
struct MomentsBody {
    version: &'static str,
    model: ThreeHalves,
    vbar: f64,
    t: f64,
    rows: Vec<MomentRow>,
}

#[allow(clippy::too_many_arguments)]
pub fn moments(
    p: f64,
    q: f64,
    epsilon: f64,
    v0: f64,
    t: f64,
    orders: &[f64],
    as_printed: bool,
    json: Option<&Path>,
) -> Result<(), CliError> {
    if orders.is_empty() {
        return Err(CliError::Config("at least one --orders value required".into()));
    }
    let model = ThreeHalves { s0: 100.0, v0, p, q, epsilon };
    varswap::models::ModelSpec::ThreeHalves(model).validate()?;
    let cir = model.reciprocal_cir();
    println!(
        "moments of v_t (equivalently negative moments of the reciprocal square-root process)"
    );
    println!("  vbar = {} (orders >= vbar diverge)", model.vbar());
    let mut rows = Vec::with_capacity(orders.len());
    for &order in orders {
        let value = dufresne_moment(order, &cir, t)?;
        match value {
            MomentValue::Finite(v) => println!("  E(v_t^{order}) = {v:.12e}"),
            MomentValue::Infinite => println!("  E(v_t^{order}) = infinite"),
        }
        let printed = as_printed.then(|| {
            let r = dufresne_r_moment_as_printed(-order, &cir, t).map_err(|e| e.to_string());
            match &r {
                Ok(v) => println!("    as printed: {v:.12e}"),
                Err(e) => println!("    as printed: error ({e})"),
            }
            r
        });
        rows.push(MomentRow { order, value, as_printed: printed });
    }
    if let Some(path) = json {
        write_json_file(
            path,
            MomentsBody { version: VERSION, model, vbar: model.vbar(), t, rows },
        )?;
    }
    Ok(())
}
