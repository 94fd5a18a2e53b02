//! Swap payoffs per path and Monte Carlo aggregation.
//!
//! For a path sampled at `n` payoff dates the discrete payoffs are
//!
//! ```text
//! Pn = sum_{i=1..n} (delta_i ln S)^2        Vn = sqrt(Pn)
//! ```
//!
//! and the continuous approximations are the quadratic variation split
//! into its continuous and jump parts:
//!
//! ```text
//! P = int_0^T v_s ds + sum_jumps ln(1+x)^2   V = sqrt(P)
//! ```
//!
//! Quantities are raw (unannualized); the 252/n annualization is a
//! reporting concern and applied only in the CLI layer.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sde_sim::PathBatch;
use crate::util::{pairwise_mean, sample_variance};

/// Per-path payoff quadruple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwapSample {
    pub pn: f64,
    pub vn: f64,
    pub p_qv: f64,
    pub v_qv: f64,
}

/// Monte Carlo point estimate with its 95% confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub label: String,
    pub mean: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_samples: usize,
    pub seed: Option<u64>,
}

impl McEstimate {
    pub fn with_seed(mut self, seed: u64) -> McEstimate {
        self.seed = Some(seed);
        self
    }

    /// Scale the estimate by a constant (used for annualization).
    pub fn scaled(&self, factor: f64, label: impl Into<String>) -> McEstimate {
        McEstimate {
            label: label.into(),
            mean: self.mean * factor,
            std_error: self.std_error * factor,
            ci_low: self.mean * factor - 1.96 * self.std_error * factor,
            ci_high: self.mean * factor + 1.96 * self.std_error * factor,
            n_samples: self.n_samples,
            seed: self.seed,
        }
    }
}

fn payoff_stride(batch: &PathBatch, n: usize) -> Result<usize> {
    let steps = batch.steps();
    if n == 0 || steps % n != 0 {
        return Err(Error::GridMismatch(format!(
            "n = {n} does not divide the simulation grid of {steps} steps"
        )));
    }
    Ok(steps / n)
}

/// Discrete payoffs `(Pn, Vn)` per path for `n` sampling intervals.
///
/// Log-prices are read at every `steps/n`-th grid point; jumps are picked
/// up automatically because they live in the log-price path.
pub fn discrete_payoffs(batch: &PathBatch, n: usize) -> Result<Vec<(f64, f64)>> {
    let stride = payoff_stride(batch, n)?;
    let mut out = Vec::with_capacity(batch.n_paths());
    for p in 0..batch.n_paths() {
        let lp = batch.log_price(p);
        let mut pn = 0.0;
        for i in 1..=n {
            let d = lp[i * stride] - lp[(i - 1) * stride];
            pn += d * d;
        }
        out.push((pn, pn.sqrt()));
    }
    Ok(out)
}

/// Continuous part of one path's quadratic variation: trapezoid quadrature
/// of the spot variance, except that a constant variance path (the
/// Black-Scholes and jump-diffusion case) integrates exactly to `v * T`.
fn integrated_variance(v: &[f64], dt: f64, horizon: f64) -> f64 {
    let first = v[0];
    if v.iter().all(|&x| x == first) {
        return first * horizon;
    }
    let mut acc = 0.0;
    for k in 0..v.len() - 1 {
        acc += 0.5 * (v[k] + v[k + 1]) * dt;
    }
    acc
}

/// Continuous quadratic-variation part `int_0^T v_s ds`, one per path.
pub fn qv_continuous(batch: &PathBatch) -> Vec<f64> {
    let dt = batch.grid().dt();
    let horizon = batch.grid().horizon;
    (0..batch.n_paths())
        .map(|p| integrated_variance(batch.variance(p), dt, horizon))
        .collect()
}

/// Quadratic-variation payoffs `(P, V)` per path:
/// `P = int v ds + sum ln(1+x)^2` over the path's jump records.
pub fn qv_payoffs(batch: &PathBatch) -> Result<Vec<(f64, f64)>> {
    let continuous = qv_continuous(batch);
    let mut out = Vec::with_capacity(batch.n_paths());
    for (p, mut qv) in continuous.into_iter().enumerate() {
        for rec in batch.jumps(p) {
            let j = rec.size.ln_1p();
            qv += j * j;
        }
        out.push((qv, qv.sqrt()));
    }
    Ok(out)
}

/// Discrete and continuous payoffs combined per path.
pub fn swap_samples(batch: &PathBatch, n: usize) -> Result<Vec<SwapSample>> {
    let discrete = discrete_payoffs(batch, n)?;
    let qv = qv_payoffs(batch)?;
    Ok(discrete
        .into_iter()
        .zip(qv)
        .map(|((pn, vn), (p_qv, v_qv))| SwapSample { pn, vn, p_qv, v_qv })
        .collect())
}

/// Conditional expectation of `Pn - P` given the variance path and jumps.
///
/// Valid when the price driver is independent of the variance path and of
/// the jumps (every family here except CEV): conditionally, each payoff
/// increment is Gaussian with mean `m_i = -Iv_i/2 - jump_drift * dt_i +
/// sum of jump log-sizes in the interval` and variance `Iv_i`, so
///
/// ```text
/// E(Pn | v, jumps) - E(P | v, jumps) = sum_i m_i^2 - sum_jumps ln(1+x)^2.
/// ```
///
/// This is an unbiased per-path gap sample with far less noise than the
/// raw difference `pn - p_qv`, whose martingale cross terms otherwise
/// dominate. `jump_drift` is the model's per-unit-time compensator drift
/// ([`crate::models::ModelSpec::jump_drift`]).
pub fn conditional_gap(batch: &PathBatch, n: usize, jump_drift: f64) -> Result<Vec<f64>> {
    let stride = payoff_stride(batch, n)?;
    let dt = batch.grid().dt();
    let interval_dt = batch.grid().horizon / n as f64;
    let mut out = Vec::with_capacity(batch.n_paths());
    for p in 0..batch.n_paths() {
        let v = batch.variance(p);
        let jumps = batch.jumps(p);
        let mut jump_qv = 0.0;
        let mut gap = 0.0;
        for i in 0..n {
            // Trapezoid integral of v over payoff interval i.
            let mut iv = 0.0;
            for k in i * stride..(i + 1) * stride {
                iv += 0.5 * (v[k] + v[k + 1]) * dt;
            }
            let mut m = -0.5 * iv - jump_drift * interval_dt;
            for rec in jumps {
                if rec.step > i * stride && rec.step <= (i + 1) * stride {
                    m += rec.size.ln_1p();
                }
            }
            gap += m * m;
        }
        for rec in jumps {
            let j = rec.size.ln_1p();
            jump_qv += j * j;
        }
        out.push(gap - jump_qv);
    }
    Ok(out)
}

/// Mean, standard error and 95% confidence interval of a sample set.
///
/// All reductions run in a fixed pairwise order, so the estimate is
/// reproducible bit-for-bit. Requires at least two finite samples.
pub fn mc_estimate(samples: &[f64], label: impl Into<String>) -> Result<McEstimate> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: samples.len() });
    }
    if let Some(bad) = samples.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteSample(bad));
    }
    let mean = pairwise_mean(samples);
    let std_error = (sample_variance(samples, mean) / samples.len() as f64).sqrt();
    Ok(McEstimate {
        label: label.into(),
        mean,
        std_error,
        ci_low: mean - 1.96 * std_error,
        ci_high: mean + 1.96 * std_error,
        n_samples: samples.len(),
        seed: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{BlackScholes, JumpDiffusion, ModelSpec};
    use crate::sde_sim::{simulate_paths, Scheme, TimeGrid};

    #[test]
    fn constant_path_has_zero_payoffs() {
        let grid = TimeGrid::new(1.0, 4, 2).unwrap();
        let spec = ModelSpec::BlackScholes(BlackScholes { s0: 100.0, sigma: 0.0 });
        let batch = simulate_paths(&spec, &grid, 2, 1, Scheme::ExactWhereAvailable).unwrap();
        for s in swap_samples(&batch, 4).unwrap() {
            assert_eq!((s.pn, s.vn, s.p_qv, s.v_qv), (0.0, 0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn two_interval_arithmetic() {
        // Log-returns (0.01, -0.02): pn = 0.0005, vn = sqrt(0.0005).
        let d1 = 0.01f64;
        let d2 = -0.02f64;
        let pn = d1 * d1 + d2 * d2;
        assert!((pn - 0.0005).abs() < 1e-18);
        assert!((pn.sqrt() - 0.022360679774997897).abs() < 1e-15);
    }

    #[test]
    fn black_scholes_qv_is_sigma_squared_t_exactly() {
        let grid = TimeGrid::new(1.0, 6, 7).unwrap(); // 42 steps: not a power of two
        let spec = ModelSpec::BlackScholes(BlackScholes { s0: 100.0, sigma: 0.2 });
        let batch = simulate_paths(&spec, &grid, 4, 2, Scheme::ExactWhereAvailable).unwrap();
        let want = 0.2f64 * 0.2 * 1.0;
        for (p_qv, _) in qv_payoffs(&batch).unwrap() {
            assert_eq!(p_qv, want);
            assert!((p_qv - 0.04).abs() < 1e-15);
        }
    }

    #[test]
    fn single_jump_qv_is_squared_log_jump() {
        let grid = TimeGrid::new(1.0, 8, 1).unwrap();
        let spec = ModelSpec::JumpDiffusion(JumpDiffusion {
            s0: 100.0,
            sigma: 0.0,
            lam: 0.7,
            jump_mean: 0.1,
            jump_sd: 0.0,
        });
        // Find a path with exactly one jump: ln(1+x) = 0.1, so P = 0.01.
        let batch = simulate_paths(&spec, &grid, 64, 3, Scheme::ExactWhereAvailable).unwrap();
        let qv = qv_payoffs(&batch).unwrap();
        let mut found = false;
        for p in 0..batch.n_paths() {
            if batch.jumps(p).len() == 1 {
                assert!((qv[p].0 - 0.01).abs() < 1e-15, "{}", qv[p].0);
                found = true;
            }
        }
        assert!(found, "no single-jump path at this seed");
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let grid = TimeGrid::new(1.0, 8, 1).unwrap();
        let spec = ModelSpec::BlackScholes(BlackScholes { s0: 100.0, sigma: 0.2 });
        let batch = simulate_paths(&spec, &grid, 2, 1, Scheme::ExactWhereAvailable).unwrap();
        assert!(matches!(discrete_payoffs(&batch, 3), Err(Error::GridMismatch(_))));
        assert!(discrete_payoffs(&batch, 4).is_ok());
    }

    #[test]
    fn vn_is_sqrt_of_pn_exactly() {
        let grid = TimeGrid::new(0.5, 16, 2).unwrap();
        let spec = ModelSpec::BlackScholes(BlackScholes { s0: 50.0, sigma: 0.4 });
        let batch = simulate_paths(&spec, &grid, 32, 5, Scheme::ExactWhereAvailable).unwrap();
        for s in swap_samples(&batch, 16).unwrap() {
            assert_eq!(s.vn.to_bits(), s.pn.sqrt().to_bits());
            assert_eq!(s.v_qv.to_bits(), s.p_qv.sqrt().to_bits());
            assert!(s.pn >= 0.0 && s.p_qv >= 0.0);
        }
    }

    #[test]
    fn mc_estimate_small_cases() {
        let e = mc_estimate(&[1.0, 1.0, 1.0, 1.0], "const").unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.std_error, 0.0);

        let e = mc_estimate(&[0.0, 2.0], "pair").unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.std_error, 1.0);
        assert!((e.ci_high - (1.0 + 1.96)).abs() < 1e-15);
        assert!((e.ci_high - e.mean - 1.96 * e.std_error).abs() < 1e-15);
    }

    #[test]
    fn mc_estimate_rejects_bad_input() {
        assert!(matches!(
            mc_estimate(&[1.0], "short"),
            Err(Error::InsufficientSamples { .. })
        ));
        assert!(matches!(
            mc_estimate(&[1.0, f64::NAN], "nan"),
            Err(Error::NonFiniteSample(1))
        ));
    }

    #[test]
    fn conditional_gap_is_exact_for_black_scholes() {
        let grid = TimeGrid::new(1.0, 16, 4).unwrap();
        let spec = ModelSpec::BlackScholes(BlackScholes { s0: 100.0, sigma: 0.2 });
        let batch = simulate_paths(&spec, &grid, 8, 4, Scheme::ExactWhereAvailable).unwrap();
        let want = crate::closed_form::bs_gap(0.2, 1.0, 16);
        for g in conditional_gap(&batch, 16, 0.0).unwrap() {
            assert!((g - want).abs() < 1e-15 * want.max(1.0), "{g} vs {want}");
        }
    }
}
