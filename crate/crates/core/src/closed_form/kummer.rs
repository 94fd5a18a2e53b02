//! Confluent hypergeometric function M(a, b, z) (Kummer's function).

use crate::error::{Error, Result};

/// Largest |z| accepted by [`kummer_m`].
pub const KUMMER_Z_CAP: f64 = 700.0;

/// Hard cap on series terms before giving up.
const MAX_TERMS: usize = 1_000_000;

/// Series is considered converged once |term| / |partial sum| < 1e-16 for
/// this many consecutive terms.
const CONVERGED_STREAK: usize = 3;

/// Direct series gets rejected when cancellation has eaten more than this
/// many orders of magnitude (max |partial sum| / |result|).
const CANCELLATION_LIMIT: f64 = 1e4;

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Power-series evaluation with a cancellation estimate.
fn series(a: f64, b: f64, z: f64) -> Result<(f64, f64)> {
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut max_mag: f64 = 1.0;
    let mut streak = 0;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        term *= (a + nf) / (b + nf) * z / (nf + 1.0);
        sum += term;
        max_mag = max_mag.max(sum.abs()).max(term.abs());
        if term == 0.0 || term.abs() < 1e-16 * sum.abs() {
            streak += 1;
            if streak >= CONVERGED_STREAK {
                return Ok((sum, max_mag / sum.abs().max(f64::MIN_POSITIVE)));
            }
        } else {
            streak = 0;
        }
    }
    Err(Error::NonConvergence(format!(
        "M({a}, {b}, {z}) did not converge within {MAX_TERMS} terms"
    )))
}

/// Kummer's confluent hypergeometric function
/// `M(a, b, z) = sum_n (a)_n / (b)_n z^n / n!`.
///
/// Arguments with `z < -30` go through the Kummer transformation
/// `M(a, b, z) = e^z M(b - a, b, -z)`, whose series has no alternating
/// cancellation. Moderately negative arguments use the direct series but
/// fall back to the transformation when the running cancellation estimate
/// shows the alternating sum has lost too much precision (this happens
/// well before z = -30 when a > b). Relative accuracy target: 1e-10.
pub fn kummer_m(a: f64, b: f64, z: f64) -> Result<f64> {
    if a.is_nan() || b.is_nan() || z.is_nan() {
        return Err(Error::DomainError("kummer_m of NaN".into()));
    }
    if is_nonpositive_integer(b) {
        return Err(Error::PoleError(b));
    }
    if z.abs() > KUMMER_Z_CAP {
        return Err(Error::DomainError(format!(
            "|z| = {} exceeds the argument cap {KUMMER_Z_CAP}",
            z.abs()
        )));
    }
    if z == 0.0 || a == 0.0 {
        return Ok(1.0);
    }
    if z < -30.0 {
        let (sum, _) = series(b - a, b, -z)?;
        return Ok(z.exp() * sum);
    }
    let (sum, cancellation) = series(a, b, z)?;
    if z < 0.0 && cancellation > CANCELLATION_LIMIT {
        let (stable, _) = series(b - a, b, -z)?;
        return Ok(z.exp() * stable);
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sum_and_unit_argument() {
        assert_eq!(kummer_m(0.3, 1.7, 0.0).unwrap(), 1.0);
        assert_eq!(kummer_m(0.0, 1.7, 3.0).unwrap(), 1.0);
        // M(2, 2, z) collapses to the exponential series.
        let e = std::f64::consts::E;
        assert!((kummer_m(2.0, 2.0, 1.0).unwrap() - e).abs() < 1e-12);
        // M(1, 2, z) = (e^z - 1)/z.
        assert!((kummer_m(1.0, 2.0, 1.0).unwrap() - (e - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn pole_and_cap_errors() {
        assert!(matches!(kummer_m(1.0, 0.0, 1.0), Err(Error::PoleError(_))));
        assert!(matches!(kummer_m(1.0, -2.0, 1.0), Err(Error::PoleError(_))));
        assert!(matches!(kummer_m(1.0, 1.0, 701.0), Err(Error::DomainError(_))));
    }

    #[test]
    fn negative_integer_a_terminates() {
        // M(-2, 0.5, z) = 1 - 4z + (4/3) z^2.
        let z = 1.3;
        let want = 1.0 - 4.0 * z + 4.0 / 3.0 * z * z;
        assert!((kummer_m(-2.0, 0.5, z).unwrap() - want).abs() < 1e-12 * want.abs());
    }

    #[test]
    fn transformation_consistency_on_grid() {
        // |M(a,b,z) - e^z M(b-a,b,-z)| / |M(a,b,z)| < 1e-9 for
        // a, b in {0.5, 1, 2.5}, z across [-20, 20].
        let vals = [0.5, 1.0, 2.5];
        for &a in &vals {
            for &b in &vals {
                for iz in -20..=20 {
                    let z = iz as f64;
                    let lhs = kummer_m(a, b, z).unwrap();
                    let rhs = z.exp() * kummer_m(b - a, b, -z).unwrap();
                    let denom = lhs.abs().max(f64::MIN_POSITIVE);
                    assert!(
                        ((lhs - rhs) / denom).abs() < 1e-9,
                        "transformation residual at a={a} b={b} z={z}: {lhs} vs {rhs}"
                    );
                }
            }
        }
    }

    #[test]
    fn cancellation_guard_keeps_accuracy_at_moderately_negative_z() {
        // M(2.5, 0.5, -20) = e^{-20} M(-2, 0.5, 20) with the right side an
        // exact polynomial: 1 - 4*20 + (4/3)*400.
        let want = (-20.0f64).exp() * (1.0 - 80.0 + 4.0 / 3.0 * 400.0);
        let got = kummer_m(2.5, 0.5, -20.0).unwrap();
        assert!(
            ((got - want) / want).abs() < 1e-10,
            "got {got}, want {want}"
        );
    }

    #[test]
    fn large_negative_argument_uses_transformation() {
        // M(1, 3, -50): alternating series is hopeless; the transform gives
        // e^{-50} M(2, 3, 50). Closed form: M(1,3,z) = 2(e^z - 1 - z)/z^2.
        let z = -50.0f64;
        let want = 2.0 * (z.exp() - 1.0 - z) / (z * z);
        let got = kummer_m(1.0, 3.0, z).unwrap();
        assert!(((got - want) / want).abs() < 1e-10, "got {got}, want {want}");
    }
}
