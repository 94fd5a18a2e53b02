//! Model families and their analytic classification.
//!
//! Five price-process families are supported, all driftless under the
//! pricing measure (zero interest rate, money market numeraire):
//!
//! ```text
//! black_scholes   dS = sigma S dB
//! cev             dS = S^alpha dB                      (alpha >= 1)
//! vol_of_vol      dS = S sqrt(v) dB
//!                 dv = v sqrt(w) dW
//!                 dw = kappa (theta - w) dt + eta sqrt(w) dZ,  corr(W,Z)=rho
//! three_halves    dS = S sqrt(v) dB
//!                 dv = v (p + q v) dt + epsilon v^{3/2} dW     (q < eps^2/2)
//! jump_diffusion  dS = S_-(sigma dB + (e^J - 1) d(compensated jumps)),
//!                 jumps: Poisson(lam) arrivals, J ~ Normal(jump_mean, jump_sd^2)
//! ```
//!
//! Units: time in years, `sigma` per sqrt(year), `v`/`w`/`theta` in
//! variance-per-year units, `lam` jumps per year. All parameters are
//! validated on construction; invalid values never reach the simulator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::closed_form;
use crate::error::{Error, Result};
use crate::util::fnv1a64;

/// Constant-volatility lognormal model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlackScholes {
    pub s0: f64,
    pub sigma: f64,
}

/// Constant elasticity of variance, `dS = S^alpha dB`.
///
/// Restricted to `alpha >= 1`: the strict-local-martingale regime studied
/// here. For `alpha > 1` the price is a strict local martingale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cev {
    pub s0: f64,
    pub alpha: f64,
}

/// Stochastic volatility with stochastic volatility-of-volatility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolOfVol {
    pub s0: f64,
    /// Spot variance of the price.
    pub v0: f64,
    /// Spot variance of the volatility process.
    pub w0: f64,
    pub kappa: f64,
    pub theta: f64,
    pub eta: f64,
    /// Correlation between the `v` driver `W` and the `w` driver `Z`.
    pub rho: f64,
    /// Correlation between the price driver `B` and `W`. The analysis
    /// assumes independence, so this defaults to 0; the Euler scheme
    /// honors nonzero values for exploratory runs.
    #[serde(default)]
    pub corr_bw: f64,
}

/// 3/2 stochastic volatility model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeHalves {
    pub s0: f64,
    pub v0: f64,
    /// Drift level.
    pub p: f64,
    /// Drift slope; must satisfy `q < epsilon^2 / 2` so `v` cannot explode.
    pub q: f64,
    pub epsilon: f64,
}

/// Lognormal finite-activity jump diffusion (Merton form).
///
/// Log-jump sizes `J = ln(1+x)` are `Normal(jump_mean, jump_sd^2)`. The
/// log-price carries the martingale compensator `-lam * E(e^J - 1)` so the
/// price stays a (true) martingale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpDiffusion {
    pub s0: f64,
    pub sigma: f64,
    /// Jump intensity per year.
    pub lam: f64,
    pub jump_mean: f64,
    pub jump_sd: f64,
}

impl JumpDiffusion {
    /// Mean relative jump size `E(x) = exp(jump_mean + jump_sd^2/2) - 1`.
    pub fn mean_relative_jump(&self) -> f64 {
        (self.jump_mean + 0.5 * self.jump_sd * self.jump_sd).exp_m1()
    }
}

/// Square-root process in affine form `dX = (a - b X) dt + sigma sqrt(X) dW`.
///
/// Both CIR-type components reduce to this: the volatility-of-volatility
/// variance `w` (with `a = kappa*theta`, `b = kappa`) and the reciprocal
/// `R = 1/v` of the 3/2 variance (with `a = epsilon^2 - q`, `b = p`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirParams {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub x0: f64,
}

impl CirParams {
    /// Dimensionless level `2a / sigma^2`; half the chi-square degrees of
    /// freedom of the transition law. The process stays strictly positive
    /// when this exceeds 1.
    pub fn vbar(&self) -> f64 {
        2.0 * self.a / (self.sigma * self.sigma)
    }
}

impl ThreeHalves {
    /// CIR parameters of the reciprocal `R = 1/v`, which satisfies
    /// `dR = (epsilon^2 - q - p R) dt - epsilon sqrt(R) dW`.
    pub fn reciprocal_cir(&self) -> CirParams {
        CirParams {
            a: self.epsilon * self.epsilon - self.q,
            b: self.p,
            sigma: self.epsilon,
            x0: 1.0 / self.v0,
        }
    }

    /// Moment threshold `vbar = 2(epsilon^2 - q)/epsilon^2` of the
    /// reciprocal square-root process.
    pub fn vbar(&self) -> f64 {
        self.reciprocal_cir().vbar()
    }
}

impl VolOfVol {
    /// CIR parameters of the volatility-of-volatility variance `w`.
    pub fn w_cir(&self) -> CirParams {
        CirParams {
            a: self.kappa * self.theta,
            b: self.kappa,
            sigma: self.eta,
            x0: self.w0,
        }
    }
}

/// Tagged union of the supported model families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    BlackScholes(BlackScholes),
    Cev(Cev),
    VolOfVol(VolOfVol),
    ThreeHalves(ThreeHalves),
    JumpDiffusion(JumpDiffusion),
}

impl ModelSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            ModelSpec::BlackScholes(_) => "black_scholes",
            ModelSpec::Cev(_) => "cev",
            ModelSpec::VolOfVol(_) => "vol_of_vol",
            ModelSpec::ThreeHalves(_) => "three_halves",
            ModelSpec::JumpDiffusion(_) => "jump_diffusion",
        }
    }

    pub fn s0(&self) -> f64 {
        match self {
            ModelSpec::BlackScholes(m) => m.s0,
            ModelSpec::Cev(m) => m.s0,
            ModelSpec::VolOfVol(m) => m.s0,
            ModelSpec::ThreeHalves(m) => m.s0,
            ModelSpec::JumpDiffusion(m) => m.s0,
        }
    }

    /// Whether the price driver `B` is independent of the variance path
    /// (and jumps). Holds for every family except CEV, whose spot variance
    /// `S^{2(alpha-1)}` is a function of the price itself.
    pub fn price_driver_independent(&self) -> bool {
        !matches!(self, ModelSpec::Cev(_))
    }

    /// Per-unit-time log-price drift contributed by the jump compensator.
    pub fn jump_drift(&self) -> f64 {
        match self {
            ModelSpec::JumpDiffusion(m) => m.lam * m.mean_relative_jump(),
            _ => 0.0,
        }
    }

    /// Stable fingerprint of the spec, recorded in batch metadata.
    pub fn fingerprint(&self) -> u64 {
        fnv1a64(format!("{self:?}").as_bytes())
    }

    /// Check every family invariant; returns the spec on success.
    pub fn validate(self) -> Result<ModelSpec> {
        fn finite(name: &str, x: f64) -> Result<()> {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::RangeViolation(format!("{name} must be finite")))
            }
        }
        fn positive(name: &str, x: f64) -> Result<()> {
            finite(name, x)?;
            if x > 0.0 {
                Ok(())
            } else {
                Err(Error::RangeViolation(format!("{name} > 0 required, got {x}")))
            }
        }
        fn nonnegative(name: &str, x: f64) -> Result<()> {
            finite(name, x)?;
            if x >= 0.0 {
                Ok(())
            } else {
                Err(Error::RangeViolation(format!("{name} >= 0 required, got {x}")))
            }
        }

        match &self {
            ModelSpec::BlackScholes(m) => {
                positive("s0", m.s0)?;
                nonnegative("sigma", m.sigma)?;
            }
            ModelSpec::Cev(m) => {
                positive("s0", m.s0)?;
                finite("alpha", m.alpha)?;
                if m.alpha < 1.0 {
                    return Err(Error::RangeViolation(format!(
                        "alpha >= 1 required, got {}",
                        m.alpha
                    )));
                }
            }
            ModelSpec::VolOfVol(m) => {
                positive("s0", m.s0)?;
                positive("v0", m.v0)?;
                positive("w0", m.w0)?;
                positive("kappa", m.kappa)?;
                positive("theta", m.theta)?;
                positive("eta", m.eta)?;
                finite("rho", m.rho)?;
                if !(-1.0..=1.0).contains(&m.rho) {
                    return Err(Error::RangeViolation(format!(
                        "rho in [-1, 1] required, got {}",
                        m.rho
                    )));
                }
                finite("corr_bw", m.corr_bw)?;
                if !(-1.0..=1.0).contains(&m.corr_bw) {
                    return Err(Error::RangeViolation(format!(
                        "corr_bw in [-1, 1] required, got {}",
                        m.corr_bw
                    )));
                }
            }
            ModelSpec::ThreeHalves(m) => {
                positive("s0", m.s0)?;
                positive("v0", m.v0)?;
                finite("p", m.p)?;
                finite("q", m.q)?;
                positive("epsilon", m.epsilon)?;
                if m.q >= 0.5 * m.epsilon * m.epsilon {
                    return Err(Error::RangeViolation(format!(
                        "q < epsilon^2/2 required, got q = {}, epsilon^2/2 = {}",
                        m.q,
                        0.5 * m.epsilon * m.epsilon
                    )));
                }
            }
            ModelSpec::JumpDiffusion(m) => {
                positive("s0", m.s0)?;
                nonnegative("sigma", m.sigma)?;
                nonnegative("lam", m.lam)?;
                finite("jump_mean", m.jump_mean)?;
                nonnegative("jump_sd", m.jump_sd)?;
            }
        }
        Ok(self)
    }
}

/// Build a validated [`ModelSpec`] from a family tag and a flat parameter
/// map, as read from a config block or CLI flags.
///
/// Every family requires its exact key set; missing keys raise
/// [`Error::MissingParameter`], surplus keys [`Error::UnknownParameter`].
pub fn build_model(family: &str, params: &BTreeMap<String, f64>) -> Result<ModelSpec> {
    let (required, optional): (&[&str], &[&str]) = match family {
        "black_scholes" => (&["s0", "sigma"], &[]),
        "cev" => (&["s0", "alpha"], &[]),
        "vol_of_vol" => (&["s0", "v0", "w0", "kappa", "theta", "eta", "rho"], &["corr_bw"]),
        "three_halves" => (&["s0", "v0", "p", "q", "epsilon"], &[]),
        "jump_diffusion" => (&["s0", "sigma", "lam", "jump_mean", "jump_sd"], &[]),
        other => {
            return Err(Error::UnknownParameter(format!("family `{other}`")));
        }
    };
    for key in params.keys() {
        if !required.contains(&key.as_str()) && !optional.contains(&key.as_str()) {
            return Err(Error::UnknownParameter(format!("{key} (family {family})")));
        }
    }
    let get = |key: &str| -> Result<f64> {
        params
            .get(key)
            .copied()
            .ok_or_else(|| Error::MissingParameter(key.to_string()))
    };

    let spec = match family {
        "black_scholes" => ModelSpec::BlackScholes(BlackScholes {
            s0: get("s0")?,
            sigma: get("sigma")?,
        }),
        "cev" => ModelSpec::Cev(Cev {
            s0: get("s0")?,
            alpha: get("alpha")?,
        }),
        "vol_of_vol" => ModelSpec::VolOfVol(VolOfVol {
            s0: get("s0")?,
            v0: get("v0")?,
            w0: get("w0")?,
            kappa: get("kappa")?,
            theta: get("theta")?,
            eta: get("eta")?,
            rho: get("rho")?,
            corr_bw: params.get("corr_bw").copied().unwrap_or(0.0),
        }),
        "three_halves" => ModelSpec::ThreeHalves(ThreeHalves {
            s0: get("s0")?,
            v0: get("v0")?,
            p: get("p")?,
            q: get("q")?,
            epsilon: get("epsilon")?,
        }),
        "jump_diffusion" => ModelSpec::JumpDiffusion(JumpDiffusion {
            s0: get("s0")?,
            sigma: get("sigma")?,
            lam: get("lam")?,
            jump_mean: get("jump_mean")?,
            jump_sd: get("jump_sd")?,
        }),
        _ => unreachable!(),
    };
    spec.validate()
}

/// Whether the CEV price `dS = S^alpha dB` is a true martingale.
///
/// Decided by the integral test: the price is a true martingale iff
/// `int_a^inf x / sigma^2(x) dx = inf`. With `sigma(x) = x^alpha` the
/// integrand is `x^{1-2alpha}`, which diverges iff `1 - 2alpha >= -1`,
/// i.e. iff `alpha <= 1`.
pub fn cev_is_true_martingale(alpha: f64) -> Result<bool> {
    if !alpha.is_finite() || alpha < 1.0 {
        return Err(Error::RangeViolation(format!(
            "alpha >= 1 required, got {alpha}"
        )));
    }
    let integrand_exponent = 1.0 - 2.0 * alpha;
    Ok(integrand_exponent >= -1.0)
}

/// Three-valued finiteness classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Finiteness {
    Finite,
    Infinite,
    Unknown,
}

/// Finiteness of the continuous-approximation and true swap expectations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinitenessVerdict {
    /// Finiteness of the expectation of the quadratic-variation payoff.
    pub ep_continuous: Finiteness,
    /// Finiteness of the expectation of the discretely sampled payoff,
    /// for every number of sampling intervals at the given horizon.
    pub ep_discrete: Finiteness,
    /// Which case of the classification applies.
    pub rationale: String,
    /// Moment explosion time, populated for the vol-of-vol family.
    pub tstar: Option<f64>,
}

/// Classify finiteness of both swap expectations for a horizon `t`.
///
/// The discrete verdict is n-independent: once the discrete payoff is
/// integrable for one sampling count it is integrable for all, so `n`
/// only participates in validation.
pub fn classify_finiteness(spec: &ModelSpec, t: f64, n: usize) -> Result<FinitenessVerdict> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::RangeViolation(format!("horizon > 0 required, got {t}")));
    }
    if n == 0 {
        return Err(Error::RangeViolation("n >= 1 required".into()));
    }

    let verdict = match spec {
        ModelSpec::BlackScholes(_) => FinitenessVerdict {
            ep_continuous: Finiteness::Finite,
            ep_discrete: Finiteness::Finite,
            rationale: "constant volatility: Gaussian log-returns have all moments, \
                        for every n >= 1"
                .into(),
            tstar: None,
        },
        ModelSpec::JumpDiffusion(_) => FinitenessVerdict {
            ep_continuous: Finiteness::Finite,
            ep_discrete: Finiteness::Finite,
            rationale: "constant diffusive volatility and finite-activity Gaussian \
                        log-jumps: both moment conditions hold, for every n >= 1"
                .into(),
            tstar: None,
        },
        ModelSpec::Cev(m) => {
            if m.alpha < 1.25 {
                FinitenessVerdict {
                    ep_continuous: Finiteness::Finite,
                    ep_discrete: Finiteness::Finite,
                    rationale: format!(
                        "CEV alpha = {} in [1, 5/4): the quadratic variation is \
                         square-integrable, so both payoffs are integrable even \
                         though the price is a strict local martingale for alpha > 1",
                        m.alpha
                    ),
                    tstar: None,
                }
            } else {
                FinitenessVerdict {
                    ep_continuous: Finiteness::Unknown,
                    ep_discrete: Finiteness::Unknown,
                    rationale: format!(
                        "CEV alpha = {} >= 5/4 lies outside the analysed range; \
                         no classification is asserted",
                        m.alpha
                    ),
                    tstar: None,
                }
            }
        }
        ModelSpec::ThreeHalves(m) => FinitenessVerdict {
            ep_continuous: Finiteness::Finite,
            ep_discrete: Finiteness::Finite,
            rationale: format!(
                "3/2 model with q = {} < epsilon^2/2: the Laplace transform of the \
                 integrated variance exists near zero, so all its moments are finite \
                 and both payoffs are integrable for every n",
                m.q
            ),
            tstar: None,
        },
        ModelSpec::VolOfVol(m) => {
            let report = closed_form::explosion_time(m.kappa, m.eta, m.rho)?;
            let tstar = report.tstar;
            let ep_discrete = if t > tstar {
                Finiteness::Infinite
            } else if t < tstar {
                Finiteness::Finite
            } else {
                Finiteness::Unknown
            };
            let rationale = if t > tstar {
                format!(
                    "vol-of-vol: horizon {t} exceeds the second-moment explosion \
                     time T* = {tstar}; the continuous approximation stays integrable \
                     (v is a supermartingale) but the discrete payoff has infinite \
                     expectation for every n"
                )
            } else if t < tstar {
                format!(
                    "vol-of-vol: horizon {t} is below the second-moment explosion \
                     time T* = {tstar}; the integrated variance is square-integrable \
                     and both payoffs are integrable"
                )
            } else {
                format!(
                    "vol-of-vol: horizon equals the explosion time T* = {tstar}; \
                     divergence is only established strictly beyond T*, so the \
                     discrete verdict is left open"
                )
            };
            FinitenessVerdict {
                ep_continuous: Finiteness::Finite,
                ep_discrete,
                rationale,
                tstar: Some(tstar),
            }
        }
    };

    debug_assert!(
        !(verdict.ep_continuous == Finiteness::Infinite
            && verdict.ep_discrete == Finiteness::Finite),
        "a finite discrete swap with an infinite continuous approximation is never asserted"
    );
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn three_halves_mean_reverting_case_is_valid() {
        let spec = build_model(
            "three_halves",
            &params(&[("s0", 100.0), ("v0", 0.04), ("p", 0.1), ("q", -1.0), ("epsilon", 1.0)]),
        )
        .unwrap();
        assert_eq!(spec.family_name(), "three_halves");
    }

    #[test]
    fn three_halves_rejects_explosive_drift_slope() {
        let err = build_model(
            "three_halves",
            &params(&[("s0", 100.0), ("v0", 0.04), ("p", 0.1), ("q", 0.6), ("epsilon", 1.0)]),
        )
        .unwrap_err();
        match err {
            Error::RangeViolation(msg) => assert!(msg.contains("epsilon^2/2"), "{msg}"),
            other => panic!("expected RangeViolation, got {other:?}"),
        }
    }

    #[test]
    fn zero_volatility_black_scholes_is_valid() {
        let spec =
            build_model("black_scholes", &params(&[("s0", 100.0), ("sigma", 0.0)])).unwrap();
        assert!(matches!(spec, ModelSpec::BlackScholes(m) if m.sigma == 0.0));
    }

    #[test]
    fn missing_and_unknown_parameters_are_named() {
        let err = build_model("black_scholes", &params(&[("s0", 100.0)])).unwrap_err();
        assert_eq!(err, Error::MissingParameter("sigma".into()));

        let err = build_model(
            "black_scholes",
            &params(&[("s0", 100.0), ("sigma", 0.2), ("beta", 1.0)]),
        )
        .unwrap_err();
        match err {
            Error::UnknownParameter(msg) => assert!(msg.contains("beta")),
            other => panic!("expected UnknownParameter, got {other:?}"),
        }
    }

    #[test]
    fn cev_martingale_boundary() {
        assert!(cev_is_true_martingale(1.0).unwrap());
        assert!(!cev_is_true_martingale(1.25).unwrap());
        // Evaluate the integral test just above the boundary: the integrand
        // exponent 1 - 2*alpha drops below -1, so the integral converges.
        assert!(!cev_is_true_martingale(1.0001).unwrap());
        assert!(cev_is_true_martingale(0.5).is_err());
    }

    #[test]
    fn classify_vol_of_vol_beyond_explosion_time() {
        let spec = ModelSpec::VolOfVol(VolOfVol {
            s0: 100.0,
            v0: 0.04,
            w0: 0.04,
            kappa: 0.5,
            theta: 0.04,
            eta: 1.0,
            rho: 1.0, corr_bw: 0.0,
        })
        .validate()
        .unwrap();
        let verdict = classify_finiteness(&spec, 2.0, 252).unwrap();
        let tstar = verdict.tstar.unwrap();
        assert!((tstar - 2.0 * std::f64::consts::LN_2).abs() < 1e-12, "tstar = {tstar}");
        assert_eq!(verdict.ep_continuous, Finiteness::Finite);
        assert_eq!(verdict.ep_discrete, Finiteness::Infinite);

        let below = classify_finiteness(&spec, 1.0, 252).unwrap();
        assert_eq!(below.ep_discrete, Finiteness::Finite);
    }

    #[test]
    fn classify_black_scholes_and_three_halves() {
        let bs = ModelSpec::BlackScholes(BlackScholes { s0: 100.0, sigma: 0.2 });
        let v = classify_finiteness(&bs, 1.0, 252).unwrap();
        assert_eq!((v.ep_continuous, v.ep_discrete), (Finiteness::Finite, Finiteness::Finite));

        let th = ModelSpec::ThreeHalves(ThreeHalves {
            s0: 100.0,
            v0: 0.04,
            p: 0.1,
            q: -1.0,
            epsilon: 1.0,
        });
        for t in [0.25, 1.0, 10.0] {
            let v = classify_finiteness(&th, t, 4).unwrap();
            assert_eq!(
                (v.ep_continuous, v.ep_discrete),
                (Finiteness::Finite, Finiteness::Finite)
            );
        }
    }

    #[test]
    fn vol_of_vol_rejects_rho_out_of_range() {
        let err = ModelSpec::VolOfVol(VolOfVol {
            s0: 1.0,
            v0: 0.1,
            w0: 0.1,
            kappa: 1.0,
            theta: 0.1,
            eta: 1.0,
            rho: 1.5, corr_bw: 0.0,
        })
        .validate()
        .unwrap_err();
        assert!(matches!(err, Error::RangeViolation(_)));
    }
}
