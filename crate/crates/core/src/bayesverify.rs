//! Numerical checks that the hierarchical prior yields the simple Bayes
//! estimators.
//!
//! Under `θ | λ, η ~ N(0, (1−λ)/(λη) I_p)` with `λ ∝ λ^a (1−λ)^{n/2−1}` on
//! (0, 1) and `η ∝ η^a`, integrating out `θ` and `η` leaves
//!
//! `m(x, s) = Γ(k)·2^k ∫₀¹ λ^{p/2+a}(1−λ)^{n/2−1}(λ‖x‖²+s)^{−k} dλ`,
//! `k = p/2 + n/2 + a + 1`,
//!
//! which has the closed form `c / (s^{n/2}(‖x‖²+s)^{p/2+a+1})`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{alpha_from_hyper, PriorHyper};
use crate::numkernel::{ln_beta_unchecked, ln_gamma_unchecked, QuadRule, SeedSpec};
use crate::risk::QuadConfig;

pub const RATIO_SPREAD_TOL: f64 = 1e-6;
pub const GRADIENT_TOL: f64 = 1e-8;
pub const POSTERIOR_TOL: f64 = 1e-5;
pub const COMPLETING_SQUARE_TOL: f64 = 1e-12;
pub const CHANGE_OF_VARIABLES_TOL: f64 = 1e-10;
/// Default relative finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalCheck {
    pub points: Vec<(f64, f64)>,
    pub ratios: Vec<f64>,
    pub max_rel_spread: f64,
}

impl MarginalCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_spread <= RATIO_SPREAD_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorCheck {
    pub shrink_numeric: f64,
    pub shrink_closed: f64,
    pub sigma2_numeric: f64,
    pub sigma2_closed: f64,
}

impl PosteriorCheck {
    /// Larger of the two relative disagreements.
    pub fn max_rel_error(&self) -> f64 {
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        rel(self.shrink_numeric, self.shrink_closed)
            .max(rel(self.sigma2_numeric, self.sigma2_closed))
    }
}

fn check_point(op: &'static str, x_sq: f64, s: f64) -> Result<()> {
    if !(x_sq >= 0.0 && x_sq.is_finite()) {
        return Err(Error::domain(op, format!("x_sq must be >= 0, got {x_sq}")));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::domain(op, format!("s must be > 0, got {s}")));
    }
    Ok(())
}

/// `k = p/2 + n/2 + a + 1`, the `η`-integral's gamma shape.
fn total_shape(h: PriorHyper) -> f64 {
    h.shape() + 0.5 * h.dims().nf()
}

fn ln_marginal_numeric(x_sq: f64, s: f64, h: PriorHyper, rule: &QuadRule) -> f64 {
    let k = total_shape(h);
    let w = x_sq / s;
    // (λx+s)^{−k} = s^{−k}(1+λw)^{−k}
    let integral = rule.integrate_beta_kernel(h.shape(), 0.5 * h.dims().nf(), |lam, _| {
        (-k * (lam * w).ln_1p()).exp()
    });
    ln_gamma_unchecked(k) + k * std::f64::consts::LN_2 - k * s.ln() + integral.ln()
}

/// `m(x, s)` from the `λ`-integral by quadrature.
pub fn marginal_numeric(x_sq: f64, s: f64, h: PriorHyper, cfg: &QuadConfig) -> Result<f64> {
    check_point("marginal_numeric", x_sq, s)?;
    let rule = cfg.rule()?;
    Ok(ln_marginal_numeric(x_sq, s, h, &rule).exp())
}

/// `c / (s^{n/2}(‖x‖²+s)^{p/2+a+1})` with
/// `c = Γ(k)·2^k·B(p/2+a+1, n/2)`.
pub fn marginal_closed(x_sq: f64, s: f64, h: PriorHyper) -> Result<f64> {
    check_point("marginal_closed", x_sq, s)?;
    Ok(ln_marginal_closed(x_sq, s, h).exp())
}

fn ln_marginal_closed(x_sq: f64, s: f64, h: PriorHyper) -> f64 {
    let k = total_shape(h);
    let half_n = 0.5 * h.dims().nf();
    let ln_c =
        ln_gamma_unchecked(k) + k * std::f64::consts::LN_2 + ln_beta_unchecked(h.shape(), half_n);
    ln_c - half_n * s.ln() - h.shape() * (x_sq + s).ln()
}

/// Ratio of numeric to closed marginals over `points`.
pub fn marginal_ratio_check(
    points: &[(f64, f64)],
    h: PriorHyper,
    cfg: &QuadConfig,
) -> Result<MarginalCheck> {
    if points.is_empty() {
        return Err(Error::Argument(
            "marginal check needs at least one point".into(),
        ));
    }
    let rule = cfg.rule()?;
    let mut ratios = Vec::with_capacity(points.len());
    for &(x_sq, s) in points {
        check_point("marginal_ratio_check", x_sq, s)?;
        ratios
            .push((ln_marginal_numeric(x_sq, s, h, &rule) - ln_marginal_closed(x_sq, s, h)).exp());
    }
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    Ok(MarginalCheck {
        points: points.to_vec(),
        ratios,
        max_rel_spread: (max - min) / mean,
    })
}

/// `count` seeded points with `x_sq ∈ (0, 10)` and `s ∈ (0.1, 10)`.
pub fn random_points(count: usize, seed: SeedSpec) -> Vec<(f64, f64)> {
    let mut rng = seed.rng();
    (0..count)
        .map(|_| (rng.random_range(0.0..10.0), rng.random_range(0.1..10.0)))
        .collect()
}

/// Relative residual of
/// `‖x−θ‖² + (λ/(1−λ))‖θ‖² = ‖θ−(1−λ)x‖²/(1−λ) + λ‖x‖²`.
pub fn completing_square_residual(x: &[f64], theta: &[f64], lambda: f64) -> Result<f64> {
    if x.len() != theta.len() {
        return Err(Error::Argument("x and theta must have equal length".into()));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::domain(
            "completing_square_residual",
            format!("lambda must lie in (0, 1), got {lambda}"),
        ));
    }
    let sq = |v: &mut dyn Iterator<Item = f64>| v.map(|t| t * t).sum::<f64>();
    let odds = lambda / (1.0 - lambda);
    let x_sq = sq(&mut x.iter().copied());
    let theta_sq = sq(&mut theta.iter().copied());
    let lhs = sq(&mut x.iter().zip(theta).map(|(a, b)| a - b)) + odds * theta_sq;
    let rhs = sq(&mut theta.iter().zip(x).map(|(t, a)| t - (1.0 - lambda) * a)) / (1.0 - lambda)
        + lambda * x_sq;
    Ok((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE))
}

/// Both sides of
/// `∫₀¹ λ^α(1−λ)^β(1+wλ)^{−γ} dλ
///   = (w+1)^{−α−1} ∫₀¹ t^α(1−t)^β {1 − tw/(w+1)}^{−α−β+γ−2} dt`
/// for `α, β > −1` and `w > −1`.
pub fn change_of_variables_sides(
    alpha: f64,
    beta: f64,
    gamma: f64,
    w: f64,
    cfg: &QuadConfig,
) -> Result<(f64, f64)> {
    if !(alpha > -1.0 && beta > -1.0 && w > -1.0 && gamma.is_finite()) {
        return Err(Error::domain(
            "change_of_variables_sides",
            format!("need alpha, beta > -1 and w > -1, got ({alpha}, {beta}, {gamma}, {w})"),
        ));
    }
    let rule = cfg.rule()?;
    let direct = rule.integrate_beta_kernel(alpha + 1.0, beta + 1.0, |lam, _| {
        (-gamma * (w * lam).ln_1p()).exp()
    });
    let power = -alpha - beta + gamma - 2.0;
    // 1 − tw/(w+1) = (1 + w(1−t))/(1+w)
    let substituted = rule.integrate_beta_kernel(alpha + 1.0, beta + 1.0, |_, tc| {
        (power * ((w * tc).ln_1p() - w.ln_1p())).exp()
    });
    Ok((direct, (-(alpha + 1.0) * w.ln_1p()).exp() * substituted))
}

/// Relative discrepancy between the two sides of the change-of-variables identity.
pub fn change_of_variables_check(
    alpha: f64,
    beta: f64,
    gamma: f64,
    w: f64,
    cfg: &QuadConfig,
) -> Result<f64> {
    let (lhs, rhs) = change_of_variables_sides(alpha, beta, gamma, w, cfg)?;
    Ok(((lhs - rhs) / lhs).abs())
}

/// `−2(p/2+a+1)/(‖x‖²+s)`: `∇ₓm = coef·m·x`.
pub fn grad_x_coefficient(x_sq: f64, s: f64, h: PriorHyper) -> f64 {
    -2.0 * h.shape() / (x_sq + s)
}

/// `−((p/2+a+1)/(‖x‖²+s) + (n/2)/s)`: `∂m/∂s = coef·m`.
pub fn ds_coefficient(x_sq: f64, s: f64, h: PriorHyper) -> f64 {
    -(h.shape() / (x_sq + s) + 0.5 * h.dims().nf() / s)
}

/// Central difference `(f(x+h) − f(x−h))/(2h)`, refined by one Richardson
/// step when `accept` rejects the first pass.
fn central_difference(
    f: impl Fn(f64) -> f64,
    x: f64,
    step: f64,
    accept: impl Fn(f64) -> bool,
) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let first = d(step);
    if accept(first) {
        first
    } else {
        (4.0 * d(0.5 * step) - first) / 3.0
    }
}

/// Relative errors of the analytic gradient identities against central
/// differences of the closed-form marginal, along `‖x‖` and along `s`.
/// Steps are `fd_step·‖x‖` and `fd_step·s`.
pub fn gradient_identity_check(x_sq: f64, s: f64, h: PriorHyper, fd_step: f64) -> (f64, f64) {
    let r = x_sq.sqrt();
    let m = ln_marginal_closed(x_sq, s, h).exp();
    let rel = |got: f64, want: f64| {
        if want == 0.0 {
            got.abs()
        } else {
            ((got - want) / want).abs()
        }
    };

    // dm/d‖x‖ = ∇ₓm·x/‖x‖ = coef·m·‖x‖
    let want_r = grad_x_coefficient(x_sq, s, h) * m * r;
    let err_r = if r == 0.0 {
        0.0
    } else {
        let m_of_r = |t: f64| ln_marginal_closed(t * t, s, h).exp();
        let fd = central_difference(m_of_r, r, fd_step * r, |d| rel(d, want_r) <= 1e-7);
        rel(fd, want_r)
    };

    let want_s = ds_coefficient(x_sq, s, h) * m;
    let m_of_s = |t: f64| ln_marginal_closed(x_sq, t, h).exp();
    let fd = central_difference(m_of_s, s, fd_step * s, |d| rel(d, want_s) <= 1e-7);
    (err_r, rel(fd, want_s))
}

/// Posterior shrink factor and variance estimate from finite differences of
/// the numeric marginal, against `1 − α/(α+1+x_sq/s)` and that factor
/// times `s/n`.
///
/// With `∇ₓm = 2x·∂m/∂‖x‖²`, the mean estimate is
/// `x·(1 − ∂_{‖x‖²}m/∂_s m)` and the variance estimate is `m/(−2∂_s m)`.
pub fn posterior_estimates_numeric(
    x_sq: f64,
    s: f64,
    h: PriorHyper,
    cfg: &QuadConfig,
) -> Result<PosteriorCheck> {
    check_point("posterior_estimates_numeric", x_sq, s)?;
    if x_sq == 0.0 {
        return Err(Error::domain(
            "posterior_estimates_numeric",
            "x_sq must be > 0",
        ));
    }
    let rule = cfg.rule()?;
    let alpha = alpha_from_hyper(h)?;
    let lnm = |xs: f64, ss: f64| ln_marginal_numeric(xs, ss, h, &rule);

    // Derivatives of ln m; Richardson-refined central differences.
    let richardson = |f: &dyn Fn(f64) -> f64, at: f64, step: f64| {
        let d = |hh: f64| (f(at + hh) - f(at - hh)) / (2.0 * hh);
        (4.0 * d(0.5 * step) - d(step)) / 3.0
    };
    let d_xsq = richardson(&|t| lnm(t, s), x_sq, 1e-3 * x_sq);
    let d_s = richardson(&|t| lnm(x_sq, t), s, 1e-3 * s);

    let shrink_closed = 1.0 - alpha / (alpha + 1.0 + x_sq / s);
    Ok(PosteriorCheck {
        shrink_numeric: 1.0 - d_xsq / d_s,
        shrink_closed,
        sigma2_numeric: 1.0 / (-2.0 * d_s),
        sigma2_closed: shrink_closed * s / h.dims().nf(),
    })
}

/// Outcome of the full Bayes suite at one `(p, n, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesSuite {
    pub hyper: PriorHyper,
    pub alpha: f64,
    pub marginal: MarginalCheck,
    pub worst_posterior_error: f64,
    pub worst_gradient_error: f64,
    pub worst_completing_square: f64,
    pub worst_change_of_variables: f64,
}

impl BayesSuite {
    pub fn marginal_passed(&self) -> bool {
        self.marginal.passed()
    }

    pub fn posterior_passed(&self) -> bool {
        self.worst_posterior_error <= POSTERIOR_TOL
    }

    pub fn gradient_passed(&self) -> bool {
        self.worst_gradient_error <= GRADIENT_TOL
    }

    pub fn identities_passed(&self) -> bool {
        self.worst_completing_square <= COMPLETING_SQUARE_TOL
            && self.worst_change_of_variables <= CHANGE_OF_VARIABLES_TOL
    }

    pub fn passed(&self) -> bool {
        self.marginal_passed()
            && self.posterior_passed()
            && self.gradient_passed()
            && self.identities_passed()
    }
}

/// Runs every Bayes check: ratio constancy on 20 points, posterior
/// estimates on 10, gradient identities on 10, and 50 random instances of
/// each algebraic identity.
pub fn run_bayes_suite(h: PriorHyper, cfg: &QuadConfig, seed: SeedSpec) -> Result<BayesSuite> {
    let alpha = alpha_from_hyper(h)?;
    let points = random_points(20, seed.with_stream(seed.stream_index.wrapping_add(1)));
    let marginal = marginal_ratio_check(&points, h, cfg)?;

    let mut worst_posterior_error = 0.0f64;
    let mut worst_gradient_error = 0.0f64;
    for &(x_sq, s) in points.iter().take(10) {
        worst_posterior_error = worst_posterior_error
            .max(posterior_estimates_numeric(x_sq, s, h, cfg)?.max_rel_error());
        let (gr, gs) = gradient_identity_check(x_sq, s, h, DEFAULT_FD_STEP);
        worst_gradient_error = worst_gradient_error.max(gr).max(gs);
    }

    let mut rng = seed.with_stream(seed.stream_index.wrapping_add(2)).rng();
    let mut worst_completing_square = 0.0f64;
    let mut worst_change_of_variables = 0.0f64;
    for _ in 0..50 {
        let dim = rng.random_range(1..=12usize);
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
        let theta: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
        let lambda = rng.random_range(0.01..0.99);
        worst_completing_square =
            worst_completing_square.max(completing_square_residual(&x, &theta, lambda)?);

        let (a, b) = (rng.random_range(-0.5..6.0), rng.random_range(-0.5..6.0));
        let (g, w) = (rng.random_range(0.0..12.0), rng.random_range(0.0..20.0));
        worst_change_of_variables =
            worst_change_of_variables.max(change_of_variables_check(a, b, g, w, cfg)?);
    }

    Ok(BayesSuite {
        hyper: h,
        alpha,
        marginal,
        worst_posterior_error,
        worst_gradient_error,
        worst_completing_square,
        worst_change_of_variables,
    })
}
