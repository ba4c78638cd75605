//! Log-gamma, digamma and log-beta on the positive half line.

use crate::error::{Error, Result};

/// Lanczos coefficients for g = 607/128, 15 terms.
const LANCZOS_C0: f64 = 0.999_999_999_999_997_1;
#[allow(clippy::excessive_precision)]
const LANCZOS_COF: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];
/// g + 1/2.
const LANCZOS_SHIFT: f64 = 671.0 / 128.0;
const SQRT_TWO_PI: f64 = 2.506_628_274_631_000_5;

fn check_positive(op: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(
            op,
            format!("argument must be finite and > 0, got {x}"),
        ))
    }
}

/// `ln Γ(x)` for finite `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    check_positive("log_gamma", x)?;
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    let t = x + LANCZOS_SHIFT;
    let head = (x + 0.5) * t.ln() - t;
    let mut ser = LANCZOS_C0;
    let mut y = x;
    for c in LANCZOS_COF {
        y += 1.0;
        ser += c / y;
    }
    head + (SQRT_TWO_PI * ser / x).ln()
}

/// Digamma `ψ(x) = d/dx ln Γ(x)` for finite `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    check_positive("digamma", x)?;
    Ok(digamma_unchecked(x))
}

pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    // Shift up with ψ(x) = ψ(x+1) − 1/x, then use the asymptotic series.
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Σ B_{2k} / (2k x^{2k}) for k = 1..7
    let tail = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    acc + x.ln() - 0.5 * inv - tail
}

/// `ln B(a, b)`.
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    check_positive("log_beta", a)?;
    check_positive("log_beta", b)?;
    Ok(ln_beta_unchecked(a, b))
}

pub(crate) fn ln_beta_unchecked(a: f64, b: f64) -> f64 {
    // Written symmetrically so that ln B(a,b) == ln B(b,a) bit for bit.
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    ln_gamma_unchecked(lo) + ln_gamma_unchecked(hi) - ln_gamma_unchecked(lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    /// Stirling series after shifting the argument above 20; independent of
    /// the Lanczos path.
    fn ln_gamma_stirling(mut x: f64) -> f64 {
        let mut shift = 0.0;
        while x < 20.0 {
            shift -= x.ln();
            x += 1.0;
        }
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        let series = inv
            * (1.0 / 12.0
                - inv2
                    * (1.0 / 360.0
                        - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
        shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
    }

    #[test]
    fn log_gamma_examples() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-15);
        assert!((log_gamma(5.0).unwrap() - 24f64.ln()).abs() < 1e-13);
        let half = 0.5 * std::f64::consts::PI.ln();
        assert!((log_gamma(0.5).unwrap() - half).abs() < 1e-14);
        assert!((log_gamma(2.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn log_gamma_matches_stirling_oracle() {
        let mut x = 1e-3;
        while x < 1e6 {
            let got = log_gamma(x).unwrap();
            let want = ln_gamma_stirling(x);
            // Absolute 1e-12 below 1e3; relative beyond, where ulp(lnΓ) itself exceeds 1e-12.
            let tol = 1e-12f64.max(4e-15 * want.abs());
            assert!((got - want).abs() <= tol, "x={x} got={got} want={want}");
            x *= 1.137;
        }
    }

    #[test]
    fn log_gamma_large_argument_reference() {
        // mpmath loggamma(1e6) = 12815504.569147611659976971785
        let got = log_gamma(1e6).unwrap();
        assert!(((got - 12_815_504.569_147_61) / got).abs() < 1e-15);
    }

    #[test]
    fn digamma_examples() {
        assert!((digamma(1.0).unwrap() + EULER_GAMMA).abs() < 1e-14);
        assert!((digamma(2.0).unwrap() - (1.0 - EULER_GAMMA)).abs() < 1e-14);
        let want = -EULER_GAMMA - 2.0 * 2f64.ln();
        assert!((digamma(0.5).unwrap() - want).abs() < 1e-14);
        // mpmath digamma(1e-3)
        assert!((digamma(1e-3).unwrap() + 1_000.575_571_931_810_3).abs() < 1e-12);
    }

    #[test]
    fn digamma_recurrence_and_derivative() {
        let mut x = 1e-3;
        while x < 1e6 {
            let lhs = digamma(x + 1.0).unwrap();
            let rhs = digamma(x).unwrap() + 1.0 / x;
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "x={x}");
            x *= 1.31;
        }
        // ψ as the derivative of ln Γ, central differences
        for &x in &[0.7, 1.5, 3.25, 12.0, 150.0] {
            let h = 1e-5 * x;
            let fd = (ln_gamma_stirling(x + h) - ln_gamma_stirling(x - h)) / (2.0 * h);
            assert!((fd - digamma(x).unwrap()).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn log_beta_examples() {
        assert!(log_beta(1.0, 1.0).unwrap().abs() < 1e-15);
        assert!((log_beta(2.0, 3.0).unwrap() - (1.0f64 / 12.0).ln()).abs() < 1e-14);
        assert!((log_beta(0.5, 0.5).unwrap() - std::f64::consts::PI.ln()).abs() < 1e-14);
        assert_eq!(log_beta(3.7, 0.2).unwrap(), log_beta(0.2, 3.7).unwrap());
    }

    #[test]
    fn domain_errors() {
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(log_gamma(bad).is_err());
            assert!(digamma(bad).is_err());
            assert!(log_beta(bad, 1.0).is_err());
            assert!(log_beta(1.0, bad).is_err());
        }
    }
}
