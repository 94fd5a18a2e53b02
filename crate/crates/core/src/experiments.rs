//! Experiment orchestration: convergence tables over the sampling count,
//! rate fits, heavy-tail diagnostics, and the measure-change rescue.
//!
//! All studies share one set of simulated paths across every sampling
//! count (common random numbers): the discrete-minus-continuous gap is far
//! smaller than either mean, and only paired estimation resolves it at
//! desk-scale path counts. Two paired gap estimators are reported:
//!
//! * `gap` - difference of the marginal means, with a standard error from
//!   per-path differences. Unbiased but dominated by the martingale noise
//!   of the squared increments.
//! * `cond_gap` - per-path conditional expectation of `Pn - P` given the
//!   variance path and jumps (see [`payoffs::conditional_gap`]). Same
//!   estimand whenever the price driver is independent of the variance
//!   (every family except CEV), with orders of magnitude less variance;
//!   rate fits use this column when it is available.
//!
//! Experiments re-run bit-identically for a fixed seed and config: path
//! substreams are keyed by global path index, reductions are fixed-order.

use serde::Serialize;

use crate::closed_form::{self, QTransform};
use crate::error::{Error, Result};
use crate::models::{ModelSpec, VolOfVol};
use crate::payoffs;
use crate::sde_sim::{simulate_path_range, Scheme, TimeGrid, DEFAULT_MEMORY_BUDGET};
use crate::util::{pairwise_mean, sample_variance};

/// Paths per simulation chunk are sized to roughly this many bytes; the
/// results do not depend on the chunking, only peak memory does.
const CHUNK_BYTES: usize = 64 << 20;

/// Hill index below which the second moment is flagged as likely infinite.
pub const HEAVY_TAIL_INDEX: f64 = 2.0;
/// Hill index above which all relevant low moments are considered safe.
pub const LIGHT_TAIL_INDEX: f64 = 2.5;
/// Sensitivity sweep of order-statistics fractions reported alongside the
/// requested one.
pub const SWEEP_FRACTIONS: [f64; 3] = [0.025, 0.05, 0.10];

/// Provenance common to a whole study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyMeta {
    pub spec: ModelSpec,
    pub horizon: f64,
    pub substeps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub ep_n: f64,
    pub se_n: f64,
    pub ep_qv: f64,
    pub se_qv: f64,
    /// `ep_n - ep_qv` exactly (same paths, fixed summation order).
    pub gap: f64,
    /// Standard error of the per-path differences `pn - p_qv`.
    pub gap_se: f64,
    pub cond_gap: Option<f64>,
    pub cond_gap_se: Option<f64>,
    /// Mean volatility-swap payoffs, informational only: no convergence
    /// claim attaches to them and they stay out of the fixed CSV schema.
    pub ev_n: f64,
    pub ev_qv: f64,
}

/// Paired estimates of `E(P^n)` and `E(P)` across sampling counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub meta: StudyMeta,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Fixed-schema CSV: `n,ep_n,se_n,ep_qv,se_qv,gap,gap_se`, preceded by
    /// `# key=value` comment lines supplied by the caller.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str("n,ep_n,se_n,ep_qv,se_qv,gap,gap_se\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.n, r.ep_n, r.se_n, r.ep_qv, r.se_qv, r.gap, r.gap_se
            ));
        }
        out
    }
}

/// Per-path payoff samples shared by the estimators.
#[derive(Debug, Clone)]
pub struct PayoffSamples {
    pub n_list: Vec<usize>,
    /// `pn[j][path]` for `n_list[j]` sampling intervals.
    pub pn: Vec<Vec<f64>>,
    /// Continuous-plus-jump quadratic variation per path.
    pub p_qv: Vec<f64>,
    /// Conditional gap samples per n, when the model admits them.
    pub cond_gap: Option<Vec<Vec<f64>>>,
}

fn chunk_paths(steps: usize, channels: usize) -> usize {
    (CHUNK_BYTES / ((steps + 1) * 8 * channels)).max(1)
}

/// Simulate `n_paths` paths in chunks and collect payoff samples for every
/// n in `n_list` on common paths.
pub fn collect_payoff_samples(
    spec: &ModelSpec,
    horizon: f64,
    n_list: &[usize],
    substeps: usize,
    n_paths: usize,
    seed: u64,
    scheme: Scheme,
) -> Result<PayoffSamples> {
    if n_list.is_empty() {
        return Err(Error::GridMismatch("empty n list".into()));
    }
    let mut n_list = n_list.to_vec();
    n_list.sort_unstable();
    n_list.dedup();
    let n_max = *n_list.last().expect("nonempty");
    let grid = TimeGrid::new(horizon, n_max, substeps)?;
    let steps = grid.steps();
    for &n in &n_list {
        if n == 0 || steps % n != 0 {
            return Err(Error::GridMismatch(format!(
                "n = {n} does not divide the simulation grid of {steps} steps"
            )));
        }
    }

    let with_cond = spec.price_driver_independent();
    let jump_drift = spec.jump_drift();
    let mut pn: Vec<Vec<f64>> = vec![Vec::with_capacity(n_paths); n_list.len()];
    let mut p_qv: Vec<f64> = Vec::with_capacity(n_paths);
    let mut cond: Option<Vec<Vec<f64>>> =
        with_cond.then(|| vec![Vec::with_capacity(n_paths); n_list.len()]);

    let chunk = chunk_paths(steps, 3);
    let mut offset = 0;
    while offset < n_paths {
        let count = chunk.min(n_paths - offset);
        let batch =
            simulate_path_range(spec, &grid, offset, count, seed, scheme, DEFAULT_MEMORY_BUDGET)?;
        for (j, &n) in n_list.iter().enumerate() {
            let d = payoffs::discrete_payoffs(&batch, n)?;
            pn[j].extend(d.into_iter().map(|(p, _)| p));
            if let Some(cond) = cond.as_mut() {
                cond[j].extend(payoffs::conditional_gap(&batch, n, jump_drift)?);
            }
        }
        p_qv.extend(payoffs::qv_payoffs(&batch)?.into_iter().map(|(p, _)| p));
        offset += count;
    }

    Ok(PayoffSamples { n_list, pn, p_qv, cond_gap: cond })
}

/// Paired convergence study over `n_list` on common paths.
///
/// Refuses to run when the convergence-theorem moment conditions fail,
/// unless `override_conditions` is set (exploratory mode).
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    spec: &ModelSpec,
    horizon: f64,
    n_list: &[usize],
    substeps: usize,
    n_paths: usize,
    seed: u64,
    scheme: Scheme,
    override_conditions: bool,
) -> Result<ConvergenceTable> {
    if n_paths < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n_paths });
    }
    let conditions = closed_form::check_theorem4_conditions(spec, horizon)?;
    if !conditions.satisfied && !override_conditions {
        return Err(Error::ConditionsFailed(conditions.detail));
    }

    let samples = collect_payoff_samples(spec, horizon, n_list, substeps, n_paths, seed, scheme)?;
    let qv_est = payoffs::mc_estimate(&samples.p_qv, "E(P)")?;
    let v_qv: Vec<f64> = samples.p_qv.iter().map(|&x| x.sqrt()).collect();
    let ev_qv = pairwise_mean(&v_qv);

    let mut rows = Vec::with_capacity(samples.n_list.len());
    for (j, &n) in samples.n_list.iter().enumerate() {
        let pn = &samples.pn[j];
        let pn_est = payoffs::mc_estimate(pn, format!("E(P^{n})"))?;
        let vn: Vec<f64> = pn.iter().map(|&x| x.sqrt()).collect();
        let diffs: Vec<f64> = pn.iter().zip(&samples.p_qv).map(|(a, b)| a - b).collect();
        let diff_mean = pairwise_mean(&diffs);
        let gap_se = (sample_variance(&diffs, diff_mean) / diffs.len() as f64).sqrt();
        let (cond_gap, cond_gap_se) = match &samples.cond_gap {
            Some(cond) => {
                let c = &cond[j];
                let mean = pairwise_mean(c);
                let se = (sample_variance(c, mean) / c.len() as f64).sqrt();
                (Some(mean), Some(se))
            }
            None => (None, None),
        };
        rows.push(ConvergenceRow {
            n,
            ep_n: pn_est.mean,
            se_n: pn_est.std_error,
            ep_qv: qv_est.mean,
            se_qv: qv_est.std_error,
            gap: pn_est.mean - qv_est.mean,
            gap_se,
            cond_gap,
            cond_gap_se,
            ev_n: pairwise_mean(&vn),
            ev_qv,
        });
    }

    Ok(ConvergenceTable {
        meta: StudyMeta {
            spec: spec.clone(),
            horizon,
            substeps,
            n_paths,
            seed,
            scheme,
        },
        rows,
    })
}

/// Power-law fit of the gap against the sampling count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

/// Least-squares fit of `ln|gap|` against `ln n` over `(n, |gap|)` points.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientSignal(format!(
            "{} usable rows, need at least 3",
            points.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, g)| g.ln()).collect();
    let xbar = pairwise_mean(&xs);
    let ybar = pairwise_mean(&ys);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - xbar) * (x - xbar);
        sxy += (x - xbar) * (y - ybar);
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientSignal("degenerate n values".into()));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let fit = intercept + slope * x;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - ybar) * (y - ybar);
    }
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RateFit { slope, intercept, r_squared, points_used: points.len() })
}

/// Fit the convergence rate from a table.
///
/// Uses the conditional gap column when present (direct paired gaps are
/// noise-dominated for large n at practical path counts) and keeps only
/// rows whose |gap| clears three standard errors; fewer than three such
/// rows is an [`Error::InsufficientSignal`].
pub fn rate_fit(table: &ConvergenceTable) -> Result<RateFit> {
    let mut points = Vec::new();
    for r in &table.rows {
        let (gap, se) = match (r.cond_gap, r.cond_gap_se) {
            (Some(g), Some(se)) => (g, se),
            _ => (r.gap, r.gap_se),
        };
        if gap.abs() > 3.0 * se && gap != 0.0 {
            points.push((r.n as f64, gap.abs()));
        }
    }
    if points.len() < 3 {
        return Err(Error::InsufficientSignal(format!(
            "only {} of {} rows have |gap| above 3 standard errors",
            points.len(),
            table.rows.len()
        )));
    }
    fit_power_law(&points)
}

/// Tail verdict from the Hill index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TailVerdict {
    MeanLikelyFinite,
    SecondMomentLikelyInfinite,
    Inconclusive,
}

/// One point of the fraction sensitivity sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HillPoint {
    pub fraction: f64,
    pub index: f64,
}

/// Hill tail-index estimate with confidence interval and verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub index: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub fraction: f64,
    pub k_used: usize,
    pub sweep: Vec<HillPoint>,
    pub verdict: TailVerdict,
}

fn hill_index(sorted_desc: &[f64], k: usize) -> f64 {
    let threshold = sorted_desc[k];
    let mut sum_log = 0.0;
    for &x in &sorted_desc[..k] {
        sum_log += (x / threshold).ln();
    }
    if sum_log <= 0.0 {
        return f64::INFINITY;
    }
    k as f64 / sum_log
}

/// Hill estimator on the top `fraction` of order statistics.
///
/// Verdict thresholds: index below [`HEAVY_TAIL_INDEX`] flags an infinite
/// second moment; above [`LIGHT_TAIL_INDEX`] the mean (and second moment)
/// are considered safe; in between the report is inconclusive. The
/// estimator is fragile in the fraction, so the report carries a
/// sensitivity sweep over [`SWEEP_FRACTIONS`] rather than a single number.
pub fn tail_diagnostic(samples: &[f64], fraction: f64) -> Result<TailReport> {
    if !(fraction > 0.0 && fraction <= 0.2) {
        return Err(Error::DomainError(format!(
            "fraction in (0, 0.2] required, got {fraction}"
        )));
    }
    let mut positive: Vec<f64> = samples.iter().copied().filter(|&x| x > 0.0).collect();
    if positive.len() < 10_000 {
        return Err(Error::InsufficientSamples { needed: 10_000, got: positive.len() });
    }
    positive.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite samples"));

    let k_for = |frac: f64| ((positive.len() as f64 * frac) as usize).min(positive.len() - 1);
    let k = k_for(fraction);
    if k < 10 {
        return Err(Error::DomainError(format!(
            "fraction {fraction} leaves only {k} order statistics"
        )));
    }
    let index = hill_index(&positive, k);
    let se = index / (k as f64).sqrt();
    let sweep = SWEEP_FRACTIONS
        .iter()
        .map(|&frac| HillPoint { fraction: frac, index: hill_index(&positive, k_for(frac)) })
        .collect();
    let verdict = if index < HEAVY_TAIL_INDEX {
        TailVerdict::SecondMomentLikelyInfinite
    } else if index > LIGHT_TAIL_INDEX {
        TailVerdict::MeanLikelyFinite
    } else {
        TailVerdict::Inconclusive
    };
    Ok(TailReport {
        index,
        ci_low: index - 1.96 * se,
        ci_high: index + 1.96 * se,
        fraction,
        k_used: k,
        sweep,
        verdict,
    })
}

/// Continuous quadratic-variation samples `int_0^T v_s ds`, one per path.
pub fn integrated_variance_samples(
    spec: &ModelSpec,
    horizon: f64,
    steps: usize,
    n_paths: usize,
    seed: u64,
    scheme: Scheme,
) -> Result<Vec<f64>> {
    let grid = TimeGrid::new(horizon, 1, steps)?;
    let chunk = chunk_paths(steps, 3);
    let mut out = Vec::with_capacity(n_paths);
    let mut offset = 0;
    while offset < n_paths {
        let count = chunk.min(n_paths - offset);
        let batch =
            simulate_path_range(spec, &grid, offset, count, seed, scheme, DEFAULT_MEMORY_BUDGET)?;
        out.extend(payoffs::qv_continuous(&batch));
        offset += count;
    }
    Ok(out)
}

/// Outcome of the measure-change rescue experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QRescueReport {
    /// Explosion time under the original measure (finite by assumption).
    pub tstar_before: f64,
    pub before: TailReport,
    pub transform: QTransform,
    pub transformed_spec: ModelSpec,
    /// Explosion time under the transformed dynamics.
    pub tstar_after: f64,
    pub after: ConvergenceTable,
}

/// Demonstrate the measure-change rescue: heavy tails of the integrated
/// variance beyond the explosion time under the original parameters, then
/// finite, converging estimates after the Girsanov tilt of `w`.
#[allow(clippy::too_many_arguments)]
pub fn q_rescue_experiment(
    model: &VolOfVol,
    horizon: f64,
    n_list: &[usize],
    substeps: usize,
    n_paths: usize,
    seed: u64,
    scheme: Scheme,
) -> Result<QRescueReport> {
    let report = closed_form::explosion_time(model.kappa, model.eta, model.rho)?;
    if report.chi <= 0.0 {
        return Err(Error::DomainError(format!(
            "chi = {} <= 0: the second moment never explodes, nothing to rescue",
            report.chi
        )));
    }
    if !(horizon > report.tstar) {
        return Err(Error::DomainError(format!(
            "horizon {horizon} does not exceed the explosion time {}",
            report.tstar
        )));
    }
    let transform = closed_form::q_transform(model.kappa, model.theta, model.eta, model.rho, None)?;

    let n_max = n_list.iter().copied().max().unwrap_or(1);
    let before_samples = integrated_variance_samples(
        &ModelSpec::VolOfVol(*model),
        horizon,
        n_max * substeps,
        n_paths,
        seed,
        scheme,
    )?;
    let before = tail_diagnostic(&before_samples, 0.05)?;

    let transformed = VolOfVol {
        kappa: transform.kappa_q,
        theta: transform.theta_q,
        ..*model
    };
    let tstar_after =
        closed_form::explosion_time(transformed.kappa, transformed.eta, transformed.rho)?.tstar;
    let transformed_spec = ModelSpec::VolOfVol(transformed).validate()?;
    let after = convergence_study(
        &transformed_spec,
        horizon,
        n_list,
        substeps,
        n_paths,
        seed,
        scheme,
        false,
    )?;

    Ok(QRescueReport {
        tstar_before: report.tstar,
        before,
        transform,
        transformed_spec,
        tstar_after,
        after,
    })
}
