//! Dominance threshold `α*`, dominance scans, and numerical audits of each
//! inequality in the dominance argument.
//!
//! With `ε = 1/(1+α)` and `W_j = U_j/V` the argument needs:
//!
//! * `log_bound`: `ln(1−x) ≥ −x − x²/(2(1−x))` on (0, 1);
//! * `monotone`: `(1+w)^ε/(α+1+w)` is non-increasing in `w`;
//! * `kj_sign`: `k_j(w)` changes sign once, from + to −;
//! * `kj_moment`: `E[k_j(W_j)] ≥ 0`, through the beta-moment lower bound;
//! * `final_ineq`: `4pε/(n(n+2ε)) − α ≥ 0` for `α ≤ α*`.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Noncentrality, ProblemDims};
use crate::numkernel::{ln_beta_unchecked, SeedSpec};
use crate::risk::{delta_risk, QuadConfig};

pub const DEFAULT_TAU_GRID: [f64; 10] = [0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0, 50.0, 100.0];
pub const DEFAULT_VIOLATION_TOL: f64 = 1e-8;
/// An audit passes when its worst margin is at least `-AUDIT_TOL`.
pub const AUDIT_TOL: f64 = 1e-12;
/// Required agreement between the beta-function and quadrature moments.
pub const MOMENT_QUAD_TOL: f64 = 1e-10;

/// `α* = (−(n+2) + √((n+2)² + 16p)) / (2n)`, evaluated in the
/// cancellation-free form `8p / (n((n+2) + √((n+2)² + 16p)))`.
pub fn alpha_star(dims: ProblemDims) -> f64 {
    let (p, n) = (dims.pf(), dims.nf());
    let root = ((n + 2.0).powi(2) + 16.0 * p).sqrt();
    8.0 * p / (n * (n + 2.0 + root))
}

/// `max_{κ∈(0,1)} min(1/κ − 1, 4pκ/(n(n+2κ)))`, found by bisecting on the
/// crossing of the decreasing and increasing branches.
pub fn alpha_star_maxmin(dims: ProblemDims, opt_tol: f64) -> Result<f64> {
    if !(opt_tol > 0.0 && opt_tol <= 1e-6) {
        return Err(Error::Argument(format!(
            "opt_tol must lie in (0, 1e-6], got {opt_tol}"
        )));
    }
    let (p, n) = (dims.pf(), dims.nf());
    let falling = |k: f64| 1.0 / k - 1.0;
    let rising = |k: f64| 4.0 * p * k / (n * (n + 2.0 * k));
    // falling − rising is +∞ at 0⁺ and negative at 1.
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if falling(mid) > rising(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        // α* lies in [falling(hi), falling(lo)].
        if lo > 0.0 && falling(lo) - falling(hi) <= opt_tol {
            break;
        }
    }
    Ok(0.5 * (falling(lo) + falling(hi)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub tau: f64,
    /// `NaN` when the cell could not be evaluated.
    pub delta_value: f64,
    pub error_bound: f64,
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Dominates,
    Violation,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Dominates => "dominates",
            Verdict::Violation => "violation",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub alpha: f64,
    pub dims: ProblemDims,
    pub cells: Vec<ScanCell>,
    pub min_delta: f64,
    pub argmin_tau: f64,
    pub violation_tol: f64,
    pub verdict: Verdict,
}

/// Evaluates `Δ(τ)` on `tau_grid` and classifies the minimum.
pub fn dominance_scan(
    alpha: f64,
    dims: ProblemDims,
    tau_grid: &[f64],
    cfg: &QuadConfig,
    violation_tol: f64,
) -> Result<ScanReport> {
    if tau_grid.is_empty() {
        return Err(Error::Argument("tau grid must not be empty".into()));
    }
    if tau_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Argument("tau grid must be sorted ascending".into()));
    }
    if !(violation_tol > 0.0) {
        return Err(Error::Argument(format!(
            "violation_tol must be > 0, got {violation_tol}"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(
            "dominance_scan",
            format!("alpha must be > 0, got {alpha}"),
        ));
    }
    cfg.validate()?;
    let taus: Vec<Noncentrality> = tau_grid
        .iter()
        .map(|&t| Noncentrality::new(t))
        .collect::<Result<_>>()?;

    let cells: Vec<ScanCell> = taus
        .par_iter()
        .map(|&tau| match delta_risk(alpha, dims, tau, cfg) {
            Ok(est) => ScanCell {
                tau: tau.tau(),
                delta_value: est.value,
                error_bound: est.error_bound,
                truncated: false,
            },
            Err(Error::Truncation { .. }) => ScanCell {
                tau: tau.tau(),
                delta_value: f64::NAN,
                error_bound: f64::INFINITY,
                truncated: true,
            },
            Err(e) => panic!("delta_risk failed after validation: {e}"),
        })
        .collect();

    let (mut min_delta, mut argmin_tau, mut err_at_min) = (f64::INFINITY, f64::NAN, 0.0);
    for c in cells.iter().filter(|c| !c.truncated) {
        if c.delta_value < min_delta {
            min_delta = c.delta_value;
            argmin_tau = c.tau;
            err_at_min = c.error_bound;
        }
    }
    let any_truncated = cells.iter().any(|c| c.truncated);
    let verdict = if min_delta < -(violation_tol + err_at_min) {
        Verdict::Violation
    } else if !any_truncated && min_delta >= -violation_tol {
        Verdict::Dominates
    } else {
        Verdict::Inconclusive
    };
    if !min_delta.is_finite() {
        min_delta = f64::NAN;
    }
    Ok(ScanReport {
        alpha,
        dims,
        cells,
        min_delta,
        argmin_tau,
        violation_tol,
        verdict,
    })
}

/// `ε = 1/(1+α)`.
pub fn epsilon(alpha: f64) -> f64 {
    1.0 / (1.0 + alpha)
}

/// `k_j(w) = (1+w)^{−ε}·((p+n+2j)/(1+w) − n − (αn/2)/(1+w))`.
pub fn kj_value(j: usize, w: f64, alpha: f64, dims: ProblemDims) -> f64 {
    let (p, n) = (dims.pf(), dims.nf());
    let m = p + n + 2.0 * j as f64;
    let inv = 1.0 / (1.0 + w);
    inv.powf(epsilon(alpha)) * ((m - 0.5 * alpha * n) * inv - n)
}

/// `k_j(0) = p + 2j − αn/2`.
pub fn kj_at_zero(j: usize, alpha: f64, dims: ProblemDims) -> f64 {
    dims.pf() + 2.0 * j as f64 - 0.5 * alpha * dims.nf()
}

/// The unique sign change `w* = (p + 2j − αn/2)/n` of `k_j`, confirmed by
/// bisection to `root_tol`.
pub fn kj_root(j: usize, alpha: f64, dims: ProblemDims, root_tol: f64) -> Result<f64> {
    let k0 = kj_at_zero(j, alpha, dims);
    if !(k0 > 0.0) {
        return Err(Error::NoRoot { k0 });
    }
    if !(root_tol > 0.0) {
        return Err(Error::Argument(format!(
            "root_tol must be > 0, got {root_tol}"
        )));
    }
    let closed = k0 / dims.nf();
    let f = |w: f64| kj_value(j, w, alpha, dims);
    let mut hi = 1.0;
    while f(hi) >= 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > root_tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let bisection = 0.5 * (lo + hi);
    if (bisection - closed).abs() > root_tol.max(1e-12 * closed) {
        return Err(Error::RootMismatch { closed, bisection });
    }
    Ok(closed)
}

/// `E[k_j(W_j)]` by two routes, plus the lower bound used to sign it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KjMoment {
    /// Expectation from beta-function ratios.
    pub closed: f64,
    /// Expectation from direct quadrature of the beta integrals.
    pub quadrature: f64,
    /// `closed · B(p/2+j, n/2)`: the expectation without the beta normaliser.
    pub unnormalized: f64,
    /// `B(p/2+j, n/2+ε)/B(p/2+j, n/2) · n(n+2ε)/(2(p+n+2ε)) · bracket`.
    pub lower_bound: f64,
    /// `4pε/(n(n+2ε)) − α`.
    pub bracket: f64,
}

pub fn kj_moment(j: usize, alpha: f64, dims: ProblemDims, cfg: &QuadConfig) -> Result<KjMoment> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(
            "kj_moment",
            format!("alpha must be > 0, got {alpha}"),
        ));
    }
    let rule = cfg.rule()?;
    let (p, n) = (dims.pf(), dims.nf());
    let eps = epsilon(alpha);
    let a = 0.5 * p + j as f64;
    let b = 0.5 * n;
    let m = p + n + 2.0 * j as f64;
    let coef = m - 0.5 * alpha * n;

    let ln_norm = ln_beta_unchecked(a, b);
    let r0 = (ln_beta_unchecked(a, b + eps) - ln_norm).exp();
    let r1 = (ln_beta_unchecked(a, b + eps + 1.0) - ln_norm).exp();
    let closed = coef * r1 - n * r0;

    // ∫ x^{a−1}(1−x)^{b+ε−1}·(coef·(1−x) − n) dx / ∫ x^{a−1}(1−x)^{b−1} dx
    let num = rule.integrate_beta_kernel(a, b + eps, |_, xc| coef * xc - n);
    let den = rule.integrate_beta_kernel(a, b, |_, _| 1.0);
    let quadrature = num / den;

    let bracket = final_margin(alpha, dims);
    let lower_bound = r0 * n * (n + 2.0 * eps) / (2.0 * (p + n + 2.0 * eps)) * bracket;
    Ok(KjMoment {
        closed,
        quadrature,
        unnormalized: closed * ln_norm.exp(),
        lower_bound,
        bracket,
    })
}

/// `4p/(n(n(α+1)+2)) − α`, equal to `4pε/(n(n+2ε)) − α`.
pub fn final_margin(alpha: f64, dims: ProblemDims) -> f64 {
    let (p, n) = (dims.pf(), dims.nf());
    4.0 * p / (n * (n * (alpha + 1.0) + 2.0)) - alpha
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditStep {
    LogBound,
    Monotone,
    KjSign,
    KjMoment,
    FinalIneq,
}

impl AuditStep {
    pub fn name(&self) -> &'static str {
        match self {
            AuditStep::LogBound => "log_bound",
            AuditStep::Monotone => "monotone",
            AuditStep::KjSign => "kj_sign",
            AuditStep::KjMoment => "kj_moment",
            AuditStep::FinalIneq => "final_ineq",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofAudit {
    pub step: AuditStep,
    pub passed: bool,
    pub worst_margin: f64,
    /// Inputs at which `worst_margin` was attained.
    pub witness: BTreeMap<String, f64>,
}

impl ProofAudit {
    fn from_margin(step: AuditStep, worst_margin: f64, witness: BTreeMap<String, f64>) -> Self {
        Self {
            step,
            passed: worst_margin >= -AUDIT_TOL,
            worst_margin,
            witness,
        }
    }
}

fn witness<const N: usize>(pairs: [(&str, f64); N]) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// `ln(1−x) + x + x²/(2(1−x))`; nonnegative on (0, 1).
pub fn log_bound_margin(x: f64) -> f64 {
    (-x).ln_1p() + x + 0.5 * x * x / (1.0 - x)
}

pub fn audit_log_bound(x_grid: &[f64]) -> Result<ProofAudit> {
    if x_grid.is_empty() || x_grid.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return Err(Error::Argument(
            "log-bound grid must be non-empty and inside (0, 1)".into(),
        ));
    }
    let (x, margin) = x_grid
        .iter()
        .map(|&x| (x, log_bound_margin(x)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    Ok(ProofAudit::from_margin(
        AuditStep::LogBound,
        margin,
        witness([("x", x)]),
    ))
}

/// `d/dw ln[(1+w)^ε/(α+1+w)] = ε/(1+w) − 1/(α+1+w)`.
pub fn monotone_derivative(alpha: f64, w: f64) -> f64 {
    epsilon(alpha) / (1.0 + w) - 1.0 / (alpha + 1.0 + w)
}

/// `−w(1−ε)/((1+w)(α+1+w))`, the simplified form of the same derivative.
pub fn monotone_derivative_simplified(alpha: f64, w: f64) -> f64 {
    -w * (1.0 - epsilon(alpha)) / ((1.0 + w) * (alpha + 1.0 + w))
}

/// Checks the derivative is `≤ 0` on `w_grid`; the analytic form must also
/// match central differences within `1e-6`, otherwise the audit fails with
/// the discrepancy as its (negative) margin.
pub fn audit_monotone(alpha: f64, w_grid: &[f64]) -> Result<ProofAudit> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(
            "audit_monotone",
            format!("alpha must be > 0, got {alpha}"),
        ));
    }
    if w_grid.is_empty() || w_grid.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
        return Err(Error::Argument(
            "monotone grid must be non-empty and >= 0".into(),
        ));
    }
    let eps = epsilon(alpha);
    let log_ratio = |w: f64| eps * w.ln_1p() - (alpha + 1.0 + w).ln();
    let mut worst = f64::INFINITY;
    let mut at = BTreeMap::new();
    for &w in w_grid {
        let d = monotone_derivative(alpha, w);
        let simplified = monotone_derivative_simplified(alpha, w);
        let h = 1e-5 * (1.0 + w);
        let fd = (log_ratio(w + h) - log_ratio(w - h)) / (2.0 * h);
        let mismatch = (fd - d).abs().max((simplified - d).abs());
        let mut margin = -d;
        if mismatch > 1e-6 {
            margin = margin.min(-mismatch);
        }
        if margin < worst {
            worst = margin;
            at = witness([("alpha", alpha), ("w", w), ("fd_mismatch", mismatch)]);
        }
    }
    Ok(ProofAudit::from_margin(AuditStep::Monotone, worst, at))
}

/// A `(j, α, dims)` configuration for the single-crossing audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KjConfig {
    pub j: usize,
    pub alpha: f64,
    pub dims: ProblemDims,
}

/// `count` seeded configurations with `k_j(0) > 0`, `p, n ∈ 1..=20`,
/// `j ∈ 0..=50` and `α ∈ (0, 2α*)`.
pub fn random_kj_configs(count: usize, seed: SeedSpec) -> Vec<KjConfig> {
    let mut rng = seed.rng();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let dims =
            ProblemDims::new(rng.random_range(1..=20), rng.random_range(1..=20)).expect("positive");
        let j = rng.random_range(0..=50usize);
        let alpha = rng.random_range(1e-3..2.0) * alpha_star(dims);
        if kj_at_zero(j, alpha, dims) > 0.0 {
            out.push(KjConfig { j, alpha, dims });
        }
    }
    out
}

/// Sign of `k_j` on 1000 points: positive on `[0, w*)`, negative on
/// `(w*, 100·w*]`. Margins are `k_j` below the root and `−k_j` above.
pub fn audit_kj_sign(configs: &[KjConfig]) -> Result<ProofAudit> {
    const HALF: usize = 500;
    let mut worst = f64::INFINITY;
    let mut at = BTreeMap::new();
    for c in configs {
        let root = match kj_root(c.j, c.alpha, c.dims, 1e-10) {
            Ok(r) => r,
            Err(Error::NoRoot { k0 }) => {
                if k0 < worst {
                    worst = k0;
                    at = kj_witness(c, 0.0);
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let below = (0..HALF).map(|i| root * i as f64 / HALF as f64);
        let above = (1..=HALF).map(|i| root * (1.0 + 99.0 * i as f64 / HALF as f64));
        for (w, sign) in below.map(|w| (w, 1.0)).chain(above.map(|w| (w, -1.0))) {
            let margin = sign * kj_value(c.j, w, c.alpha, c.dims);
            if margin < worst {
                worst = margin;
                at = kj_witness(c, w);
            }
        }
    }
    Ok(ProofAudit::from_margin(AuditStep::KjSign, worst, at))
}

fn kj_witness(c: &KjConfig, w: f64) -> BTreeMap<String, f64> {
    witness([
        ("j", c.j as f64),
        ("alpha", c.alpha),
        ("p", c.dims.pf()),
        ("n", c.dims.nf()),
        ("w", w),
    ])
}

/// For `j ∈ 0..=j_max`: `E[k_j] ≥ lower_bound ≥ 0`, and the closed form
/// agrees with quadrature within [`MOMENT_QUAD_TOL`].
pub fn audit_kj_moment(
    alpha: f64,
    dims: ProblemDims,
    j_max: usize,
    cfg: &QuadConfig,
) -> Result<ProofAudit> {
    let mut worst = f64::INFINITY;
    let mut at = BTreeMap::new();
    for j in 0..=j_max {
        let km = kj_moment(j, alpha, dims, cfg)?;
        let diff = (km.closed - km.quadrature).abs();
        let mut margin = (km.closed - km.lower_bound).min(km.lower_bound);
        if diff > MOMENT_QUAD_TOL {
            margin = margin.min(-diff);
        }
        if margin < worst {
            worst = margin;
            at = witness([
                ("j", j as f64),
                ("alpha", alpha),
                ("p", dims.pf()),
                ("n", dims.nf()),
                ("moment", km.closed),
                ("lower_bound", km.lower_bound),
                ("quad_diff", diff),
            ]);
        }
    }
    Ok(ProofAudit::from_margin(AuditStep::KjMoment, worst, at))
}

/// Margin of the final inequality at `alpha`; the audit additionally
/// requires the margin to turn negative at `1.01·α*`.
pub fn audit_final_inequality(alpha: f64, dims: ProblemDims) -> ProofAudit {
    let star = alpha_star(dims);
    let margin = final_margin(alpha, dims);
    let above = final_margin(1.01 * star, dims);
    let mut audit = ProofAudit::from_margin(
        AuditStep::FinalIneq,
        margin,
        witness([
            ("alpha", alpha),
            ("alpha_star", star),
            ("p", dims.pf()),
            ("n", dims.nf()),
            ("margin_at_1.01_alpha_star", above),
        ]),
    );
    audit.passed &= above < 0.0;
    audit
}

/// Evenly spaced `{0.001, 0.002, …, 0.999}`.
pub fn default_log_grid() -> Vec<f64> {
    (1..1000).map(|i| i as f64 / 1000.0).collect()
}

/// Non-negative grid for the monotonicity audit: 0 plus a log-spaced sweep to 1e4.
pub fn default_w_grid() -> Vec<f64> {
    std::iter::once(0.0)
        .chain((0..=400).map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 400.0)))
        .collect()
}

/// Runs all five audits at `(alpha, dims)`.
///
/// The log-bound grid is extended with the points `x = α/(α+1+w)` at which
/// the bound is applied to the estimator.
pub fn run_proof_audits(
    alpha: f64,
    dims: ProblemDims,
    cfg: &QuadConfig,
    seed: SeedSpec,
) -> Result<Vec<ProofAudit>> {
    let mut log_grid = default_log_grid();
    log_grid.extend(default_w_grid().iter().map(|w| alpha / (alpha + 1.0 + w)));
    let mut configs = random_kj_configs(200, seed);
    // Include the audited cell itself at a few mixture indices.
    configs.extend(
        [0usize, 1, 5, 20]
            .into_iter()
            .map(|j| KjConfig { j, alpha, dims })
            .filter(|c| kj_at_zero(c.j, c.alpha, c.dims) > 0.0 || c.j == 0),
    );
    Ok(vec![
        audit_log_bound(&log_grid)?,
        audit_monotone(alpha, &default_w_grid())?,
        audit_kj_sign(&configs)?,
        audit_kj_moment(alpha, dims, 50, cfg)?,
        audit_final_inequality(alpha, dims),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(p: u32, n: u32) -> ProblemDims {
        ProblemDims::new(p, n).unwrap()
    }

    /// Ternary search on the unimodal min of the two branches.
    fn maxmin_ternary(p: f64, n: f64) -> f64 {
        let g = |k: f64| (1.0 / k - 1.0).min(4.0 * p * k / (n * (n + 2.0 * k)));
        let (mut lo, mut hi) = (1e-12, 1.0);
        for _ in 0..300 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if g(m1) < g(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        g(0.5 * (lo + hi))
    }

    #[test]
    fn alpha_star_examples() {
        assert!((alpha_star(dims(1, 1)) - 1.0).abs() < 1e-15);
        assert!((alpha_star(dims(4, 2)) - (5f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((alpha_star(dims(10, 10)) - 0.271_779_788_708_134_7).abs() < 1e-15);
    }

    #[test]
    fn maxmin_matches_closed_form_on_grid() {
        for p in 1..=12 {
            for n in 1..=12 {
                let d = dims(p, n);
                let closed = alpha_star(d);
                let mm = alpha_star_maxmin(d, 1e-10).unwrap();
                assert!((mm - closed).abs() < 1e-8, "p={p} n={n}");
                assert!((maxmin_ternary(p as f64, n as f64) - closed).abs() < 1e-8);
            }
        }
        assert!(alpha_star_maxmin(dims(1, 1), 1e-3).is_err());
    }

    #[test]
    fn optimal_kappa_is_epsilon_at_alpha_star() {
        let d = dims(7, 3);
        let a = alpha_star(d);
        let k = epsilon(a);
        let rising = 4.0 * 7.0 * k / (3.0 * (3.0 + 2.0 * k));
        assert!((1.0 / k - 1.0 - rising).abs() < 1e-14);
    }

    #[test]
    fn alpha_star_monotone_in_p_and_n() {
        for p in 1..=30 {
            for n in 1..=30 {
                assert!(alpha_star(dims(p + 1, n)) > alpha_star(dims(p, n)));
                assert!(alpha_star(dims(p, n + 1)) < alpha_star(dims(p, n)));
            }
        }
    }

    #[test]
    fn scan_anchor_and_verdicts() {
        let cfg = QuadConfig::default();
        let r = dominance_scan(1.0, dims(4, 2), &[0.0], &cfg, 1e-8).unwrap();
        assert!((r.min_delta - (8.0 * 2f64.ln() - 5.5)).abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::Dominates);

        let grid: Vec<f64> = (0..=100).map(|i| 0.5 * i as f64).collect();
        let star = alpha_star(dims(4, 2));
        for frac in [1.0, 0.5] {
            let r = dominance_scan(frac * star, dims(4, 2), &grid, &cfg, 1e-8).unwrap();
            assert_eq!(r.verdict, Verdict::Dominates, "frac={frac}");
            let min = r
                .cells
                .iter()
                .map(|c| c.delta_value)
                .fold(f64::INFINITY, f64::min);
            assert_eq!(min, r.min_delta);
        }
    }

    #[test]
    fn scan_rejects_bad_grids_and_flags_truncation() {
        let cfg = QuadConfig::default();
        assert!(dominance_scan(1.0, dims(4, 2), &[], &cfg, 1e-8).is_err());
        assert!(dominance_scan(1.0, dims(4, 2), &[2.0, 1.0], &cfg, 1e-8).is_err());
        let capped = QuadConfig { j_cap: 50, ..cfg };
        let r = dominance_scan(1.0, dims(4, 2), &[0.0, 1000.0], &capped, 1e-8).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(r.cells[1].truncated);
    }

    #[test]
    fn kj_examples() {
        let d = dims(4, 2);
        assert!((kj_value(0, 0.0, 1.0, d) - 3.0).abs() < 1e-15);
        let far = kj_value(0, 1e8, 1.0, d);
        assert!(far < 0.0 && far > -1e-3);
        let star = alpha_star(d);
        let k0 = kj_value(0, 0.0, star, d);
        let want = 5.0 - 5f64.sqrt();
        assert!((k0 - want).abs() < 1e-14 && k0 > 0.0);
    }

    #[test]
    fn kj_root_examples() {
        let d = dims(4, 2);
        assert!((kj_root(0, 1.0, d, 1e-12).unwrap() - 1.5).abs() < 1e-15);
        assert!((kj_root(1, 1.0, d, 1e-12).unwrap() - 2.5).abs() < 1e-15);
        for j in 0..3 {
            let r = kj_root(j, 1.0, d, 1e-12).unwrap();
            assert!(kj_value(j, 0.5 * r, 1.0, d) > 0.0);
            assert!(kj_value(j, 2.0 * r, 1.0, d) < 0.0);
        }
        assert!(matches!(
            kj_root(0, 4.0, d, 1e-12),
            Err(Error::NoRoot { .. })
        ));
    }

    #[test]
    fn kj_moment_routes_agree() {
        let cfg = QuadConfig::default();
        let km = kj_moment(0, 1.0, dims(4, 2), &cfg).unwrap();
        assert!((km.closed - km.quadrature).abs() < 1e-10);
        for (p, n) in [(1, 1), (3, 5), (4, 2), (10, 10), (2, 7)] {
            let d = dims(p, n);
            for frac in [0.1, 0.5, 1.0, 1.7] {
                let alpha = frac * alpha_star(d);
                for j in [0, 1, 7, 25, 50] {
                    let km = kj_moment(j, alpha, d, &cfg).unwrap();
                    assert!(
                        (km.closed - km.quadrature).abs() < 1e-10,
                        "p={p} n={n} frac={frac} j={j}: {} vs {}",
                        km.closed,
                        km.quadrature
                    );
                    assert!(km.closed >= km.lower_bound - 1e-12);
                }
            }
        }
    }

    #[test]
    fn kj_moment_nonnegative_and_bracket_tight() {
        let cfg = QuadConfig::default();
        let d = dims(4, 2);
        let star = alpha_star(d);
        for j in 0..=10 {
            let km = kj_moment(j, star, d, &cfg).unwrap();
            assert!(km.closed >= -1e-12);
            assert!(km.bracket.abs() < 1e-12);
            if j == 0 {
                // the bound is attained at j = 0
                assert!((km.closed - km.lower_bound).abs() < 1e-12);
            }
            let b = ln_beta_unchecked(2.0 + j as f64, 1.0).exp();
            assert!((km.unnormalized - km.closed * b).abs() < 1e-15);
        }
    }

    #[test]
    fn log_bound_examples() {
        assert!((log_bound_margin(0.5) - (0.5f64.ln() + 0.75)).abs() < 1e-15);
        // third-order contact: margin ≈ x³/6
        let x = 1e-3;
        assert!((log_bound_margin(x) / x.powi(3) - 1.0 / 6.0).abs() < 1e-2);
        let audit = audit_log_bound(&default_log_grid()).unwrap();
        assert!(audit.passed);
        assert!(audit_log_bound(&[0.0]).is_err());
    }

    #[test]
    fn monotone_examples() {
        assert_eq!(monotone_derivative_simplified(2.0, 0.0), 0.0);
        assert!(monotone_derivative(1.0, 0.0).abs() < 1e-16);
        assert!((monotone_derivative(1.0, 1.0) + 1.0 / 12.0).abs() < 1e-15);
        for alpha in [1e-3, 0.3, 1.0, 7.0, 250.0] {
            assert!(audit_monotone(alpha, &default_w_grid()).unwrap().passed);
        }
    }

    #[test]
    fn final_inequality_examples() {
        let d = dims(4, 2);
        let star = alpha_star(d);
        let at = audit_final_inequality(star, d);
        assert!(at.passed && at.worst_margin.abs() < 1e-12);
        let half = audit_final_inequality(0.5 * star, d);
        assert!(half.passed && half.worst_margin > 0.0);
        let over = audit_final_inequality(1.1 * star, d);
        assert!(!over.passed && over.worst_margin < 0.0);
        // ε form of the same margin
        let alpha = 0.37;
        let eps = epsilon(alpha);
        let eps_form = 16.0 * eps / (2.0 * (2.0 + 2.0 * eps)) - alpha;
        assert!((final_margin(alpha, d) - eps_form).abs() < 1e-15);
    }

    #[test]
    fn kj_single_crossing_random() {
        let configs = random_kj_configs(200, SeedSpec::new(2024, 0));
        assert_eq!(configs.len(), 200);
        assert!(audit_kj_sign(&configs).unwrap().passed);
    }

    #[test]
    fn full_audit_passes_at_alpha_star() {
        let cfg = QuadConfig::default();
        for (p, n) in [(1, 1), (4, 2), (3, 5), (10, 10)] {
            let d = dims(p, n);
            let audits = run_proof_audits(alpha_star(d), d, &cfg, SeedSpec::new(1, 0)).unwrap();
            assert_eq!(audits.len(), 5);
            for a in audits {
                assert!(a.passed, "{p},{n}: {a:?}");
            }
        }
    }
}
