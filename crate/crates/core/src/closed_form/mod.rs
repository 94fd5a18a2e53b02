//! Analytic oracles: special functions, the 3/2 Laplace transform,
//! square-root-process moments, the moment explosion time, the measure
//! change that repairs it, and exact Black-Scholes error formulas.

mod gamma;
mod kummer;

pub use gamma::{gamma_fn, GAMMA_OVERFLOW_X};
pub use kummer::{kummer_m, KUMMER_Z_CAP};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{CirParams, ModelSpec, ThreeHalves};

/// Mean of the square-root process `dX = (a - bX)dt + sigma sqrt(X) dW`
/// at time `t`: `x0 e^{-bt} + (a/b)(1 - e^{-bt})`.
pub fn cir_mean(cir: &CirParams, t: f64) -> f64 {
    if cir.b == 0.0 {
        cir.x0 + cir.a * t
    } else {
        let ebt = (-cir.b * t).exp();
        cir.x0 * ebt - cir.a / cir.b * (-cir.b * t).exp_m1()
    }
}

/// Variance of the square-root process at time `t`:
/// `x0 sigma^2/b (e^{-bt} - e^{-2bt}) + a sigma^2/(2 b^2) (1 - e^{-bt})^2`.
pub fn cir_variance(cir: &CirParams, t: f64) -> f64 {
    let s2 = cir.sigma * cir.sigma;
    if cir.b == 0.0 {
        cir.x0 * s2 * t + 0.5 * cir.a * s2 * t * t
    } else {
        let ebt = (-cir.b * t).exp();
        let one_m = -(-cir.b * t).exp_m1();
        // e^{-bt} - e^{-2bt} written as e^{-bt}(1 - e^{-bt}) to avoid
        // cancellation for small b; one_m/b is stable in the same limit.
        let ratio = one_m / cir.b;
        cir.x0 * s2 * ebt * ratio + 0.5 * cir.a * s2 * ratio * ratio
    }
}

/// Laplace transform `E(exp(-lambda * int_0^T v_s ds))` of the integrated
/// variance in the 3/2 model:
///
/// ```text
/// Gamma(g - a)/Gamma(g) * (2/(eps^2 y0))^a * M(a, g, -2/(eps^2 y0))
/// y0 = v0 (e^{pT} - 1)/p          (p = 0: y0 = v0 T, analytic limit)
/// a  = -(1/2 - q/eps^2) + sqrt((1/2 - q/eps^2)^2 + 2 lambda/eps^2)
/// g  = 2 (a + 1 - q/eps^2)
/// ```
pub fn laplace_transform_32(lambda: f64, model: &ThreeHalves, t: f64) -> Result<f64> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::DomainError(format!(
            "lambda >= 0 required, got {lambda}"
        )));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::DomainError(format!("horizon > 0 required, got {t}")));
    }
    if lambda == 0.0 {
        return Ok(1.0);
    }
    let eps2 = model.epsilon * model.epsilon;
    let y0 = if model.p == 0.0 {
        model.v0 * t
    } else {
        model.v0 * (model.p * t).exp_m1() / model.p
    };
    let c = 0.5 - model.q / eps2;
    let alpha = -c + (c * c + 2.0 * lambda / eps2).sqrt();
    let gamma = 2.0 * (alpha + 1.0 - model.q / eps2);
    let x = 2.0 / (eps2 * y0);
    let value =
        gamma_fn(gamma - alpha)? / gamma_fn(gamma)? * x.powf(alpha) * kummer_m(alpha, gamma, -x)?;
    Ok(value)
}

/// Finite value or a certified divergence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MomentValue {
    Finite(f64),
    Infinite,
}

impl MomentValue {
    pub fn finite(&self) -> Option<f64> {
        match self {
            MomentValue::Finite(v) => Some(*v),
            MomentValue::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, MomentValue::Infinite)
    }
}

fn dufresne_mu_lambda(cir: &CirParams, t: f64) -> (f64, f64) {
    let s2 = cir.sigma * cir.sigma;
    if cir.b == 0.0 {
        (0.5 * s2 * t, 2.0 * cir.x0 / (s2 * t))
    } else {
        let mu = 0.5 * s2 * (-(-cir.b * t).exp_m1()) / cir.b;
        let lam = 2.0 * cir.b * cir.x0 / (s2 * (cir.b * t).exp_m1());
        (mu, lam)
    }
}

/// Moment `E(X_t^s)` of the square-root process, `s > -vbar`:
///
/// ```text
/// E(X_t^s) = mu_t^s e^{-lam_t} Gamma(vbar + s)/Gamma(vbar) M(vbar + s, vbar, lam_t)
/// mu_t  = sigma^2/2 (1 - e^{-bt})/b
/// lam_t = 2 b x0 / (sigma^2 (e^{bt} - 1))
/// ```
///
/// The second argument of M and the sign convention of `lam_t` follow the
/// noncentral chi-square moment identity; an exact-sampler cross-check in
/// the test suite pins both down (see also
/// [`dufresne_r_moment_as_printed`]). Moments at or below `-vbar` diverge.
pub fn dufresne_r_moment(s: f64, cir: &CirParams, t: f64) -> Result<MomentValue> {
    validate_cir(cir)?;
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::DomainError(format!("time > 0 required, got {t}")));
    }
    if !s.is_finite() {
        return Err(Error::DomainError("moment order must be finite".into()));
    }
    let vbar = cir.vbar();
    if s <= -vbar {
        return Ok(MomentValue::Infinite);
    }
    let (mu, lam) = dufresne_mu_lambda(cir, t);
    let value = mu.powf(s) * (-lam).exp() * gamma_fn(vbar + s)? / gamma_fn(vbar)?
        * kummer_m(vbar + s, vbar, lam)?;
    Ok(MomentValue::Finite(value))
}

/// The moment formula exactly as printed in its source, retained for
/// comparison: second M argument equal to the moment order and
/// `lam_t = 2 b v0 / (sigma^2 (e^{-bt} - 1))` with the model's initial
/// variance `v0 = 1/x0`. The exact-sampler cross-check rejects this
/// variant; [`dufresne_r_moment`] is the supported one.
pub fn dufresne_r_moment_as_printed(s: f64, cir: &CirParams, t: f64) -> Result<f64> {
    validate_cir(cir)?;
    let s2 = cir.sigma * cir.sigma;
    let vbar = cir.vbar();
    let v0 = 1.0 / cir.x0;
    let mu = if cir.b == 0.0 {
        0.5 * s2 * t
    } else {
        0.5 * s2 * (-(-cir.b * t).exp_m1()) / cir.b
    };
    let lam = 2.0 * cir.b * v0 / (s2 * (-cir.b * t).exp_m1());
    Ok(mu.powf(s) * (-lam).exp() * gamma_fn(vbar + s)? / gamma_fn(vbar)? * kummer_m(vbar + s, s, lam)?)
}

/// Moment `E(v_t^p_ord)` of the 3/2 variance, i.e. `E(R_t^{-p_ord})` for
/// the reciprocal square-root process `R`.
///
/// Divergence threshold: infinite exactly when `p_ord >= vbar`. Orders
/// below `-vbar` (equivalently `R` moments above `vbar`) are outside the
/// supported envelope.
pub fn dufresne_moment(p_ord: f64, cir: &CirParams, t: f64) -> Result<MomentValue> {
    validate_cir(cir)?;
    if !p_ord.is_finite() {
        return Err(Error::DomainError("moment order must be finite".into()));
    }
    let vbar = cir.vbar();
    if p_ord < -vbar {
        return Err(Error::DomainError(format!(
            "moment order {p_ord} below -vbar = {}",
            -vbar
        )));
    }
    if p_ord >= vbar {
        return Ok(MomentValue::Infinite);
    }
    dufresne_r_moment(-p_ord, cir, t)
}

fn validate_cir(cir: &CirParams) -> Result<()> {
    if !(cir.a > 0.0 && cir.sigma > 0.0 && cir.x0 > 0.0 && cir.b.is_finite()) {
        return Err(Error::DomainError(format!(
            "square-root process needs a > 0, sigma > 0, x0 > 0; got {cir:?}"
        )));
    }
    Ok(())
}

/// Which case of the explosion-time formula applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExplosionBranch {
    PosDeltaPosChi,
    NegDelta,
    Infinite,
}

/// Second-moment explosion time of the vol-of-vol variance `v`:
/// `T* = sup{t : E(v_t^2) < infinity}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExplosionReport {
    pub chi: f64,
    pub delta: f64,
    pub branch: ExplosionBranch,
    /// `f64::INFINITY` on the non-exploding branch.
    pub tstar: f64,
}

/// Explosion time of `E(v_t^2)` in the vol-of-vol model, with
/// `chi = 2 rho eta - kappa` and `delta = chi^2 - 2 eta^2`:
///
/// ```text
/// T* = 1/sqrt(delta) ln((chi + sqrt(delta))/(chi - sqrt(delta)))   delta >= 0, chi > 0
///      2/sqrt(-delta) (arctan(sqrt(-delta)/chi) + pi 1{chi < 0})   delta < 0
///      +infinity                                                    otherwise
/// ```
///
/// The removable point `delta = 0, chi > 0` returns its analytic limit
/// `2/chi` through an explicit branch.
pub fn explosion_time(kappa: f64, eta: f64, rho: f64) -> Result<ExplosionReport> {
    if !(kappa.is_finite() && kappa > 0.0 && eta.is_finite() && eta > 0.0) {
        return Err(Error::RangeViolation(format!(
            "kappa > 0 and eta > 0 required, got kappa = {kappa}, eta = {eta}"
        )));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::RangeViolation(format!("rho in [-1, 1] required, got {rho}")));
    }
    let chi = 2.0 * rho * eta - kappa;
    let delta = chi * chi - 2.0 * eta * eta;
    let (branch, tstar) = if delta >= 0.0 && chi > 0.0 {
        let t = if delta == 0.0 {
            2.0 / chi
        } else {
            let sd = delta.sqrt();
            (1.0 / sd) * ((chi + sd) / (chi - sd)).ln()
        };
        (ExplosionBranch::PosDeltaPosChi, t)
    } else if delta < 0.0 {
        let sd = (-delta).sqrt();
        // atan2(sd, chi) = arctan(sd/chi) + pi when chi < 0, and handles
        // chi = 0 continuously.
        (ExplosionBranch::NegDelta, 2.0 / sd * sd.atan2(chi))
    } else {
        (ExplosionBranch::Infinite, f64::INFINITY)
    };
    Ok(ExplosionReport { chi, delta, branch, tstar })
}

/// Parameters of the equivalent measure under which the vol-of-vol
/// second moment no longer explodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QTransform {
    pub gamma: f64,
    pub kappa_q: f64,
    pub theta_q: f64,
    pub chi_q: f64,
    pub delta_q: f64,
}

/// Girsanov tilt of the `w` dynamics: with `g = gamma eta sqrt(1 - rho^2)`,
///
/// ```text
/// kappa_q = kappa + g        theta_q = kappa theta / kappa_q
/// chi_q   = chi - g          delta_q = chi_q^2 - 2 eta^2
/// ```
///
/// `gamma` defaults to `max(0, 2 chi / (eta sqrt(1 - rho^2)))`, the least
/// tilt for which `chi_q <= 0`; starting from `delta >= 0, chi > 0` that
/// makes the transformed explosion time infinite.
pub fn q_transform(
    kappa: f64,
    theta: f64,
    eta: f64,
    rho: f64,
    gamma: Option<f64>,
) -> Result<QTransform> {
    if !(kappa.is_finite() && kappa > 0.0 && eta.is_finite() && eta > 0.0) {
        return Err(Error::RangeViolation(format!(
            "kappa > 0 and eta > 0 required, got kappa = {kappa}, eta = {eta}"
        )));
    }
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::RangeViolation(format!("theta > 0 required, got {theta}")));
    }
    if rho.abs() >= 1.0 {
        return Err(Error::DomainError(format!(
            "|rho| < 1 required for the measure change, got {rho}"
        )));
    }
    let ortho = eta * (1.0 - rho * rho).sqrt();
    let chi = 2.0 * rho * eta - kappa;
    let gamma = match gamma {
        Some(g) => {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::DomainError(format!("gamma >= 0 required, got {g}")));
            }
            g
        }
        None => (2.0 * chi / ortho).max(0.0),
    };
    let g = gamma * ortho;
    let kappa_q = kappa + g;
    let chi_q = chi - g;
    Ok(QTransform {
        gamma,
        kappa_q,
        theta_q: kappa * theta / kappa_q,
        chi_q,
        delta_q: chi_q * chi_q - 2.0 * eta * eta,
    })
}

/// Exact discrete-minus-continuous expectation gap for Black-Scholes:
/// `E(P^n(T)) - E(P(T)) = sigma^4 T^2 / (4n)`.
pub fn bs_gap(sigma: f64, t: f64, n: u32) -> f64 {
    assert!(n >= 1, "n >= 1 required");
    let s2 = sigma * sigma;
    s2 * s2 * t * t / (4.0 * n as f64)
}

/// Uniform-in-n bound on `|E(P(T)) - E(P^n(T))|` assembled from the three
/// moment inputs `E(A_T^2)`, `E<M^c,M^c>_T` and `E[N,N]_T`:
///
/// ```text
/// C = E(A_T^2) + 2 sqrt(E<M^c,M^c>_T) sqrt(E(A_T^2)) + 2 sqrt(E[N,N]_T) sqrt(E(A_T^2))
/// ```
///
/// For continuous models `[N,N] = 0` and `A = 1/2 int v ds`. The inputs
/// come from closed forms or Monte Carlo; this function stays pure.
pub fn theorem3_constant(e_a_sq: f64, e_qv_continuous: f64, e_jump_qv: f64) -> Result<f64> {
    for (name, v) in [
        ("E(A_T^2)", e_a_sq),
        ("E<Mc,Mc>_T", e_qv_continuous),
        ("E[N,N]_T", e_jump_qv),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::DomainError(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let root_a = e_a_sq.sqrt();
    Ok(e_a_sq + 2.0 * e_qv_continuous.sqrt() * root_a + 2.0 * e_jump_qv.sqrt() * root_a)
}

/// Outcome of the convergence-theorem moment checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceConditions {
    /// `E(int_0^T sigma_s^4 ds) < infinity`.
    pub sigma4_condition: bool,
    /// Jump-measure integrability of `psi^2 + ln(1+psi)^2` (with `p = 0`
    /// for finite activity).
    pub jump_condition: bool,
    pub satisfied: bool,
    pub detail: String,
}

/// Check the moment conditions under which `E(P^n(T)) -> E(P(T))` at rate
/// `C/n + D/sqrt(n)`, per model family.
pub fn check_theorem4_conditions(spec: &ModelSpec, t: f64) -> Result<ConvergenceConditions> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::RangeViolation(format!("horizon > 0 required, got {t}")));
    }
    let report = match spec {
        ModelSpec::BlackScholes(_) => ConvergenceConditions {
            sigma4_condition: true,
            jump_condition: true,
            satisfied: true,
            detail: "constant volatility; no jumps".into(),
        },
        ModelSpec::JumpDiffusion(_) => ConvergenceConditions {
            sigma4_condition: true,
            jump_condition: true,
            satisfied: true,
            detail: "constant volatility; finite-activity Gaussian log-jumps have \
                     finite psi^2 and ln(1+psi)^2 integrals (p = 0)"
                .into(),
        },
        ModelSpec::Cev(m) => {
            let ok = m.alpha <= 1.25;
            ConvergenceConditions {
                sigma4_condition: ok,
                jump_condition: true,
                satisfied: ok,
                detail: if ok {
                    format!(
                        "E int S^(4(alpha-1)) ds <= T s0^(4(alpha-1)) by the \
                         supermartingale property since 4(alpha-1) = {} <= 1",
                        4.0 * (m.alpha - 1.0)
                    )
                } else {
                    format!(
                        "alpha = {} > 5/4: the fourth-moment bound is not available",
                        m.alpha
                    )
                },
            }
        }
        ModelSpec::ThreeHalves(m) => {
            let ok = m.q < 0.0;
            ConvergenceConditions {
                sigma4_condition: ok,
                jump_condition: true,
                satisfied: ok,
                detail: if ok {
                    format!(
                        "q = {} < 0 gives vbar = {} > 2, so E(v_t^2) is finite and \
                         integrable on [0, T]",
                        m.q,
                        m.vbar()
                    )
                } else {
                    format!(
                        "q = {} >= 0 gives vbar = {} <= 2, so E(v_t^2) = infinity and \
                         the fourth-moment condition fails (convergence is an open \
                         question here)",
                        m.q,
                        m.vbar()
                    )
                },
            }
        }
        ModelSpec::VolOfVol(m) => {
            let explosion = explosion_time(m.kappa, m.eta, m.rho)?;
            let ok = t < explosion.tstar;
            ConvergenceConditions {
                sigma4_condition: ok,
                jump_condition: true,
                satisfied: ok,
                detail: format!(
                    "E int sigma^4 = E int v^2 is finite iff the horizon stays below \
                     the explosion time T* = {}; horizon = {t}",
                    explosion.tstar
                ),
            }
        }
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::VolOfVol;

    fn three_halves() -> ThreeHalves {
        ThreeHalves { s0: 100.0, v0: 0.04, p: 0.1, q: -1.0, epsilon: 1.0 }
    }

    #[test]
    fn laplace_at_zero_is_exactly_one() {
        assert_eq!(laplace_transform_32(0.0, &three_halves(), 1.0).unwrap(), 1.0);
    }

    #[test]
    fn laplace_is_decreasing_and_in_unit_interval() {
        let m = three_halves();
        let grid = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
        let mut prev = 1.0;
        for &lam in &grid {
            let v = laplace_transform_32(lam, &m, 1.0).unwrap();
            assert!(v > 0.0 && v < prev, "lambda = {lam}: {v} vs prev {prev}");
            prev = v;
        }
    }

    #[test]
    fn laplace_handles_zero_drift_level_branch() {
        let m = ThreeHalves { p: 0.0, ..three_halves() };
        let v = laplace_transform_32(1.0, &m, 1.0).unwrap();
        assert!(v > 0.0 && v < 1.0);
        // The p -> 0 limit is continuous.
        let near = ThreeHalves { p: 1e-9, ..three_halves() };
        let vn = laplace_transform_32(1.0, &near, 1.0).unwrap();
        assert!((v - vn).abs() < 1e-8, "{v} vs {vn}");
    }

    #[test]
    fn laplace_rejects_negative_lambda() {
        assert!(matches!(
            laplace_transform_32(-0.1, &three_halves(), 1.0),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn dufresne_threshold_matches_vbar() {
        // q = -1, eps = 1: vbar = 4. E(v^2) finite (2 < 4).
        let cir = three_halves().reciprocal_cir();
        assert_eq!(cir.vbar(), 4.0);
        assert!(dufresne_moment(2.0, &cir, 1.0).unwrap().finite().is_some());
        assert!(dufresne_moment(4.0, &cir, 1.0).unwrap().is_infinite());
        assert!(dufresne_moment(3.999, &cir, 1.0).unwrap().finite().is_some());

        // q = 0.4, eps = 1: vbar = 1.2 <= 2, so E(v^2) = infinity.
        let hot = ThreeHalves { q: 0.4, ..three_halves() }.reciprocal_cir();
        assert!((hot.vbar() - 1.2).abs() < 1e-12);
        assert!(dufresne_moment(2.0, &hot, 1.0).unwrap().is_infinite());

        // Below -vbar is out of the supported envelope.
        assert!(matches!(
            dufresne_moment(-4.5, &cir, 1.0),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn dufresne_zeroth_moment_is_one() {
        let cir = three_halves().reciprocal_cir();
        let v = dufresne_r_moment(0.0, &cir, 1.0).unwrap().finite().unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn dufresne_first_moment_matches_cir_mean() {
        let cir = three_halves().reciprocal_cir();
        for &t in &[0.25, 1.0, 3.0] {
            let formula = dufresne_r_moment(1.0, &cir, t).unwrap().finite().unwrap();
            let mean = cir_mean(&cir, t);
            assert!(
                ((formula - mean) / mean).abs() < 1e-10,
                "t = {t}: {formula} vs {mean}"
            );
        }
    }

    #[test]
    fn dufresne_second_moment_matches_cir_variance() {
        let cir = three_halves().reciprocal_cir();
        let t = 0.7;
        let m2 = dufresne_r_moment(2.0, &cir, t).unwrap().finite().unwrap();
        let mean = cir_mean(&cir, t);
        let want = cir_variance(&cir, t) + mean * mean;
        assert!(((m2 - want) / want).abs() < 1e-10, "{m2} vs {want}");
    }

    #[test]
    fn explosion_positive_delta_branch() {
        let r = explosion_time(0.5, 1.0, 1.0).unwrap();
        assert_eq!(r.branch, ExplosionBranch::PosDeltaPosChi);
        assert!((r.chi - 1.5).abs() < 1e-15);
        assert!((r.delta - 0.25).abs() < 1e-15);
        assert!((r.tstar - 2.0 * std::f64::consts::LN_2).abs() < 1e-12, "{}", r.tstar);
    }

    #[test]
    fn explosion_negative_delta_branch() {
        let r = explosion_time(1.5, 1.0, 1.0).unwrap();
        assert_eq!(r.branch, ExplosionBranch::NegDelta);
        let want = 2.0 / 1.75f64.sqrt() * (1.75f64.sqrt() / 0.5).atan();
        assert!((r.tstar - want).abs() < 1e-12);
        assert!((r.tstar - 1.8285).abs() < 1e-3, "{}", r.tstar);
    }

    #[test]
    fn explosion_infinite_branch() {
        let r = explosion_time(1.0, 0.1, 0.0).unwrap();
        assert_eq!(r.branch, ExplosionBranch::Infinite);
        assert!((r.chi + 1.0).abs() < 1e-15);
        assert!(r.delta >= 0.0);
        assert!(r.tstar.is_infinite());
    }

    #[test]
    fn explosion_negative_chi_negative_delta_adds_pi() {
        // chi < 0, delta < 0: arctan branch needs the +pi correction.
        let r = explosion_time(2.0, 1.0, 0.5).unwrap();
        assert!((r.chi + 1.0).abs() < 1e-15);
        assert!(r.delta < 0.0);
        let sd = (-r.delta).sqrt();
        let want = 2.0 / sd * ((sd / r.chi).atan() + std::f64::consts::PI);
        assert!((r.tstar - want).abs() < 1e-12);
        assert!(r.tstar > 0.0);
    }

    #[test]
    fn q_transform_no_tilt_when_chi_nonpositive() {
        let q = q_transform(1.0, 0.04, 0.1, 0.0, None).unwrap();
        assert_eq!(q.gamma, 0.0);
        assert_eq!(q.kappa_q, 1.0);
        assert_eq!(q.theta_q, 0.04);
    }

    #[test]
    fn q_transform_example_arithmetic() {
        let q = q_transform(0.5, 0.04, 1.0, 0.5, None).unwrap();
        assert!((q.gamma - 2.0 * 0.5 / 0.75f64.sqrt()).abs() < 1e-12);
        assert!((q.chi_q + 0.5).abs() < 1e-12, "chi_q = {}", q.chi_q);
        assert!(q.chi_q <= 0.0);
    }

    #[test]
    fn q_transform_preserves_kappa_theta_product() {
        for gamma in [0.0, 0.5, 1.3, 7.0] {
            let q = q_transform(0.5, 0.04, 1.0, 0.5, Some(gamma)).unwrap();
            assert!((q.kappa_q * q.theta_q - 0.5 * 0.04).abs() < 1e-15);
        }
    }

    #[test]
    fn q_transform_rejects_unit_correlation() {
        assert!(matches!(
            q_transform(0.5, 0.04, 1.0, 1.0, None),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn bs_gap_values_and_scaling() {
        assert_eq!(bs_gap(0.0, 1.0, 10), 0.0);
        let g = bs_gap(0.2, 1.0, 252);
        assert!((g - 1.5873015873015873e-6).abs() < 1e-18, "{g}");
        assert_eq!(bs_gap(0.2, 1.0, 16) / bs_gap(0.2, 1.0, 32), 2.0);
    }

    #[test]
    fn theorem3_constant_black_scholes_inputs() {
        // sigma = 0.2, T = 1: A_T = 0.02, E(A^2) = 4e-4, E<Mc,Mc> = 0.04.
        let c = theorem3_constant(4e-4, 0.04, 0.0).unwrap();
        assert!((c - 0.0084).abs() < 1e-15, "{c}");
        assert_eq!(theorem3_constant(0.0, 0.0, 0.0).unwrap(), 0.0);
        assert!(theorem3_constant(-1.0, 0.0, 0.0).is_err());
        // The uniform bound dominates the exact gap at every n, n = 1 included.
        for n in [1u32, 2, 16, 252] {
            assert!(bs_gap(0.2, 1.0, n) <= c);
        }
    }

    #[test]
    fn theorem4_per_family() {
        let th_ok = ModelSpec::ThreeHalves(three_halves());
        assert!(check_theorem4_conditions(&th_ok, 1.0).unwrap().satisfied);

        let th_bad = ModelSpec::ThreeHalves(ThreeHalves { q: 0.3, ..three_halves() });
        assert!(!check_theorem4_conditions(&th_bad, 1.0).unwrap().satisfied);

        let jd = ModelSpec::JumpDiffusion(crate::models::JumpDiffusion {
            s0: 100.0,
            sigma: 0.2,
            lam: 5.0,
            jump_mean: -0.05,
            jump_sd: 0.1,
        });
        assert!(check_theorem4_conditions(&jd, 1.0).unwrap().satisfied);

        let vov = ModelSpec::VolOfVol(VolOfVol {
            s0: 100.0,
            v0: 0.04,
            w0: 0.04,
            kappa: 0.5,
            theta: 0.04,
            eta: 1.0,
            rho: 1.0, corr_bw: 0.0,
        });
        assert!(check_theorem4_conditions(&vov, 1.0).unwrap().satisfied);
        assert!(!check_theorem4_conditions(&vov, 2.0).unwrap().satisfied);
    }

    #[test]
    fn explosion_branch_continuity_at_zero_delta() {
        // Fix chi > 0 and approach delta = 0 from both sides; both limits
        // must agree with the explicit 2/chi branch.
        let eta = 1.0f64;
        for sign in [1.0, -1.0] {
            let delta = sign * 1e-8;
            let chi = (2.0 * eta * eta + delta).sqrt();
            let kappa = 2.0 * eta - chi; // rho = 1
            let r = explosion_time(kappa, eta, 1.0).unwrap();
            assert!(
                (r.tstar - 2.0 / chi).abs() < 1e-6,
                "delta = {delta}: {} vs {}",
                r.tstar,
                2.0 / chi
            );
        }
        // A pair whose floating-point delta lands exactly on zero, hitting
        // the explicit-limit branch.
        let exact = explosion_time(0.585786437626906, 1.0000000000000018, 1.0).unwrap();
        assert_eq!(exact.delta, 0.0);
        assert_eq!(exact.branch, ExplosionBranch::PosDeltaPosChi);
        assert_eq!(exact.tstar, 2.0 / exact.chi);
    }

    #[test]
    fn cir_moments_zero_reversion_limits() {
        let cir = CirParams { a: 2.0, b: 0.0, sigma: 1.0, x0: 25.0 };
        assert!((cir_mean(&cir, 2.0) - 29.0).abs() < 1e-12);
        let near = CirParams { b: 1e-10, ..cir };
        assert!((cir_variance(&cir, 2.0) - cir_variance(&near, 2.0)).abs() < 1e-6);
    }
}
