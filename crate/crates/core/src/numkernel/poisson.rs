//! Truncated Poisson weights for noncentral mixtures.

use crate::error::{Error, Result};

/// Default hard cap on the number of mixture terms.
pub const DEFAULT_J_CAP: usize = 1_000_000;

/// Poisson(rate) probabilities for `j = 0..=j_max`, truncated once the
/// retained mass reaches `1 − tail_tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonTruncation {
    pub rate: f64,
    pub weights: Vec<f64>,
    pub j_max: usize,
    /// Probability mass beyond `j_max`.
    pub tail_mass: f64,
}

pub fn poisson_truncate(rate: f64, tail_tol: f64) -> Result<PoissonTruncation> {
    poisson_truncate_capped(rate, tail_tol, DEFAULT_J_CAP)
}

/// As [`poisson_truncate`], failing with [`Error::Truncation`] if more than
/// `j_cap + 1` terms would be needed.
pub fn poisson_truncate_capped(
    rate: f64,
    tail_tol: f64,
    j_cap: usize,
) -> Result<PoissonTruncation> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::domain(
            "poisson_truncate",
            format!("rate must be finite and >= 0, got {rate}"),
        ));
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::domain(
            "poisson_truncate",
            format!("tail_tol must lie in (0,1), got {tail_tol}"),
        ));
    }
    if rate == 0.0 {
        return Ok(PoissonTruncation {
            rate,
            weights: vec![1.0],
            j_max: 0,
            tail_mass: 0.0,
        });
    }

    // w_j = mantissa · exp(log_scale). The recurrence w_{j+1} = w_j·rate/(j+1)
    // runs on the mantissa; the scale absorbs it before it can overflow, and
    // starts at −rate so exp(−rate) never has to be formed when it underflows.
    let mut mantissa = 1.0f64;
    let mut log_scale = -rate;
    let mut weights = Vec::new();
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut j = 0usize;
    loop {
        let w = if log_scale > -700.0 {
            mantissa * log_scale.exp()
        } else {
            (mantissa.ln() + log_scale).exp()
        };
        weights.push(w);
        // Neumaier summation
        let t = sum + w;
        if sum.abs() >= w.abs() {
            comp += (sum - t) + w;
        } else {
            comp += (w - t) + sum;
        }
        sum = t;
        let tail = 1.0 - (sum + comp);
        if tail <= tail_tol {
            return Ok(PoissonTruncation {
                rate,
                weights,
                j_max: j,
                tail_mass: tail.max(0.0),
            });
        }
        if j >= j_cap {
            return Err(Error::Truncation {
                j_cap,
                tail_mass: tail,
                tail_tol,
            });
        }
        mantissa *= rate / (j as f64 + 1.0);
        if mantissa > 1e200 {
            log_scale += mantissa.ln();
            mantissa = 1.0;
        }
        j += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::special::ln_gamma_unchecked;

    /// exp(−rate)·rate^j / j! with the power and factorial formed directly.
    fn pmf_direct(rate: f64, j: usize) -> f64 {
        let fact: f64 = (1..=j).map(|k| k as f64).product();
        (-rate).exp() * rate.powi(j as i32) / fact
    }

    #[test]
    fn degenerate_rate() {
        let t = poisson_truncate(0.0, 1e-12).unwrap();
        assert_eq!(t.weights, vec![1.0]);
        assert_eq!(t.j_max, 0);
        assert_eq!(t.tail_mass, 0.0);
    }

    #[test]
    fn mass_reaches_tolerance() {
        let t = poisson_truncate(0.5, 1e-12).unwrap();
        let mass: f64 = t.weights.iter().sum();
        assert!(mass >= 1.0 - 1e-12);
        assert!(t.tail_mass < 1e-12);
        // minimal: dropping the last term falls short
        let shorter: f64 = t.weights[..t.j_max].iter().sum();
        assert!(shorter < 1.0 - 1e-12);
    }

    #[test]
    fn matches_direct_pmf_at_rate_25() {
        let t = poisson_truncate(25.0, 1e-12).unwrap();
        for (j, &w) in t.weights.iter().enumerate() {
            let want = pmf_direct(25.0, j);
            assert!(
                ((w - want) / want).abs() <= 1e-14,
                "j={j} w={w} want={want}"
            );
        }
    }

    #[test]
    fn large_rate_against_log_pmf() {
        let rate = 5000.0;
        let t = poisson_truncate(rate, 1e-12).unwrap();
        assert!(t.j_max > 5000 && t.j_max < 6000);
        for j in (4500..5500).step_by(37) {
            let logw = -rate + j as f64 * rate.ln() - ln_gamma_unchecked(j as f64 + 1.0);
            let rel = (t.weights[j] / logw.exp() - 1.0).abs();
            assert!(rel < 1e-9, "j={j} rel={rel}");
        }
    }

    #[test]
    fn cap_exceeded_is_reported() {
        let err = poisson_truncate_capped(100.0, 1e-12, 50).unwrap_err();
        assert!(matches!(err, Error::Truncation { j_cap: 50, .. }));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(poisson_truncate(-1.0, 1e-12).is_err());
        assert!(poisson_truncate(1.0, 0.0).is_err());
        assert!(poisson_truncate(1.0, 1.0).is_err());
        assert!(poisson_truncate(f64::NAN, 1e-3).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn weights_nonnegative_unimodal_subunit(rate in 0.0f64..400.0, tol_exp in 8i32..14) {
                let t = poisson_truncate(rate, 10f64.powi(-tol_exp)).unwrap();
                prop_assert!(t.weights.iter().all(|&w| w >= 0.0));
                let total: f64 = t.weights.iter().sum();
                prop_assert!(total <= 1.0 + 1e-15);
                let peak = t.weights.iter().enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
                prop_assert!(t.weights[..=peak].windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-13)));
                prop_assert!(t.weights[peak..].windows(2).all(|w| w[0] * (1.0 + 1e-13) >= w[1]));
            }
        }
    }
}
