//! Error function, log-gamma and the first two polygamma functions.

use std::f64::consts::PI;

use crate::error::{domain, Result};

/// Error function.
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Complementary error function `1 - erf(x)`, accurate in the upper tail.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
///
/// Uses the Laplace continued fraction for `x ≥ 4`, where `erfc` itself
/// would eventually underflow.
pub fn erfcx(x: f64) -> f64 {
    if x < 4.0 {
        return (x * x).exp() * libm::erfc(x);
    }
    // erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …))))
    let mut tail = x;
    for n in (1..=60).rev() {
        tail = x + 0.5 * n as f64 / tail;
    }
    1.0 / (tail * PI.sqrt())
}

/// Natural log of `erfc(x)`, finite for all finite `x`.
pub fn ln_erfc(x: f64) -> f64 {
    if x < 4.0 {
        libm::erfc(x).ln()
    } else {
        -x * x + erfcx(x).ln()
    }
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal survival function `1 - Φ(x)`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// `ln |Γ(x)|`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || is_nonpositive_integer(x) {
        return domain(format!("log_gamma undefined at {x}"));
    }
    Ok(libm::lgamma_r(x).0)
}

/// Digamma function ψ(x) = Γ'(x)/Γ(x).
pub fn digamma(x: f64) -> Result<f64> {
    if !x.is_finite() || is_nonpositive_integer(x) {
        return domain(format!("digamma has a pole at {x}"));
    }
    if x < 0.0 {
        // ψ(1 - x) - ψ(x) = π cot(πx)
        return Ok(digamma(1.0 - x)? - PI / (PI * x).tan());
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    let series = x2
        * (1.0 / 12.0
            - x2 * (1.0 / 120.0
                - x2 * (1.0 / 252.0
                    - x2 * (1.0 / 240.0 - x2 * (1.0 / 132.0 - x2 * (691.0 / 32760.0 - x2 / 12.0))))));
    Ok(acc + x.ln() - 0.5 / x - series)
}

/// Trigamma function ψ₁(x) = dψ/dx.
pub fn trigamma(x: f64) -> Result<f64> {
    if !x.is_finite() || is_nonpositive_integer(x) {
        return domain(format!("trigamma has a pole at {x}"));
    }
    if x < 0.0 {
        // ψ₁(1 - x) + ψ₁(x) = π² / sin²(πx)
        let s = (PI * x).sin();
        return Ok(PI * PI / (s * s) - trigamma(1.0 - x)?);
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = 1.0 / (x * x);
    let series = x2
        * (1.0 / 6.0
            - x2 * (1.0 / 30.0
                - x2 * (1.0 / 42.0
                    - x2 * (1.0 / 30.0 - x2 * (5.0 / 66.0 - x2 * (691.0 / 2730.0 - x2 * 7.0 / 6.0))))));
    Ok(acc + 1.0 / x + 0.5 * x2 + series / x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    // Reference values from mpmath at 40 digits.
    const DIGAMMA_REF: [(f64, f64, f64); 6] = [
        (0.001, -1000.5755719318103005, 1000001.642533195869),
        (0.5, -1.9635100260214234794, 4.9348022005446793094),
        (1.0, -0.57721566490153286061, 1.6449340668482264365),
        (2.5, 0.70315664064524318723, 0.49035775610023486497),
        (10.0, 2.2517525890667211076, 0.10516633568168574612),
        (1000.0, 6.9072551956488120521, 0.0010005001666666333334),
    ];

    #[test]
    fn polygamma_reference_values() {
        for &(x, dg, tg) in &DIGAMMA_REF {
            assert!(rel(digamma(x).unwrap(), dg) < 1e-13, "digamma({x})");
            assert!(rel(trigamma(x).unwrap(), tg) < 1e-13, "trigamma({x})");
        }
    }

    #[test]
    fn classical_identities() {
        assert!((digamma(1.0).unwrap() + 0.577_215_664_901_532_9).abs() < 1e-15);
        assert!((trigamma(1.0).unwrap() - PI * PI / 6.0).abs() < 1e-14);
        assert_eq!(erf(0.0), 0.0);
    }

    #[test]
    fn recurrences_hold_on_log_grid() {
        let mut x = 1e-3;
        while x < 1e3 {
            let d = digamma(x + 1.0).unwrap() - digamma(x).unwrap() - 1.0 / x;
            let t = trigamma(x).unwrap() - trigamma(x + 1.0).unwrap() - 1.0 / (x * x);
            assert!(d.abs() <= 1e-12 * (1.0 / x).max(1.0), "digamma recurrence at {x}: {d}");
            assert!(t.abs() <= 1e-12 * (1.0 / (x * x)).max(1.0), "trigamma recurrence at {x}: {t}");
            x *= 1.37;
        }
    }

    #[test]
    fn reflection_for_negative_arguments() {
        // ψ(-0.5) = ψ(0.5) + 2
        assert!((digamma(-0.5).unwrap() - (DIGAMMA_REF[1].1 + 2.0)).abs() < 1e-13);
        // ψ₁(-0.5) = ψ₁(0.5) + 4
        assert!((trigamma(-0.5).unwrap() - (DIGAMMA_REF[1].2 + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn poles_are_domain_errors() {
        for x in [0.0, -1.0, -7.0] {
            assert!(digamma(x).is_err());
            assert!(trigamma(x).is_err());
            assert!(log_gamma(x).is_err());
        }
    }

    #[test]
    fn normal_cdf_erf_identity() {
        // F(√2 x) = (1 + erf x)/2
        for x in [-2.0, -0.5, 0.0, 0.5, 1.7] {
            let lhs = norm_cdf(std::f64::consts::SQRT_2 * x);
            assert!((lhs - 0.5 * (1.0 + erf(x))).abs() < 1e-15);
            let lhs = norm_cdf(-std::f64::consts::SQRT_2 * x);
            assert!((lhs - 0.5 * (1.0 - erf(x))).abs() < 1e-15);
        }
    }

    #[test]
    fn ln_erfc_is_continuous_across_switch() {
        let below = ln_erfc(4.0 - 1e-9);
        let above = ln_erfc(4.0);
        assert!((below - above).abs() < 1e-8);
        // Far tail: erfc(30) ≈ 2.5646e-393, only representable in log form.
        let v = ln_erfc(30.0);
        let expect = -900.0 - (30.0 * PI.sqrt()).ln() + (1.0 - 1.0 / 1800.0_f64).ln();
        assert!((v - expect).abs() < 1e-6, "{v} vs {expect}");
    }
}
