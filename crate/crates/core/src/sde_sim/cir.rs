//! Transition sampling for the square-root process
//! `dX = (a - bX) dt + sigma sqrt(X) dW`.
//!
//! The exact transition is noncentral chi-square:
//!
//! ```text
//! X_{t+dt} = Y / (2c),  Y ~ chi2'_nu(lam)
//! c   = 2b / (sigma^2 (1 - e^{-b dt}))      (b = 0: 2/(sigma^2 dt))
//! nu  = 4a / sigma^2
//! lam = 2 c X_t e^{-b dt}
//! ```
//!
//! Sampling of `chi2'_nu(lam)` uses `(Z + sqrt(lam))^2 + chi2_{nu-1}` when
//! `nu > 1` and the Poisson mixture `chi2_{nu + 2K}`, `K ~ Poisson(lam/2)`,
//! otherwise.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use crate::models::CirParams;

/// Precomputed exact-transition stepper for a fixed step size.
#[derive(Debug, Clone)]
pub struct ExactCirStepper {
    nu: f64,
    two_c: f64,
    decay: f64,
    /// chi2_{nu-1} as Gamma((nu-1)/2, 2), reusable when nu > 1.
    residual: Option<Gamma<f64>>,
}

impl ExactCirStepper {
    pub fn new(cir: &CirParams, dt: f64) -> Self {
        assert!(dt > 0.0 && cir.sigma > 0.0 && cir.a > 0.0);
        let s2 = cir.sigma * cir.sigma;
        let decay = (-cir.b * dt).exp();
        let two_c = if cir.b == 0.0 {
            4.0 / (s2 * dt)
        } else {
            -4.0 * cir.b / (s2 * (-cir.b * dt).exp_m1())
        };
        let nu = 4.0 * cir.a / s2;
        let residual = if nu > 1.0 {
            Some(Gamma::new(0.5 * (nu - 1.0), 2.0).expect("valid gamma shape"))
        } else {
            None
        };
        ExactCirStepper { nu, two_c, decay, residual }
    }

    /// Draw `X_{t+dt}` given `X_t = x`.
    pub fn step<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        let lam = self.two_c * x * self.decay;
        let y = match &self.residual {
            Some(residual) => {
                let z: f64 = rng.sample(StandardNormal);
                let zl = z + lam.sqrt();
                zl * zl + residual.sample(rng)
            }
            None => {
                let k = if lam > 0.0 {
                    Poisson::new(0.5 * lam).expect("valid poisson mean").sample(rng)
                } else {
                    0.0
                };
                Gamma::new(0.5 * self.nu + k, 2.0)
                    .expect("valid gamma shape")
                    .sample(rng)
            }
        };
        y / self.two_c
    }
}

/// One exact draw of `X_t` given `X_0 = cir.x0` (single transition to `t`).
pub fn sample_cir_exact<R: Rng + ?Sized>(cir: &CirParams, t: f64, rng: &mut R) -> f64 {
    ExactCirStepper::new(cir, t).step(cir.x0, rng)
}

/// One full-truncation Euler update on the raw (possibly negative) state:
/// drift and diffusion read the truncated value `max(x, 0)`.
#[inline]
pub fn euler_ft_step(x_raw: f64, cir: &CirParams, dt: f64, sqrt_dt: f64, z: f64) -> f64 {
    let xp = x_raw.max(0.0);
    x_raw + (cir.a - cir.b * xp) * dt + cir.sigma * xp.sqrt() * sqrt_dt * z
}
