//! Frequentist risk under entropy loss, exact and by simulation.
//!
//! Conditional on the Poisson index `J = j`, `U = ‖X‖²/σ² ~ χ²_{p+2j}` and
//! `V = S/σ² ~ χ²_n`. With `B = U/(U+V) ~ Beta((p+2j)/2, n/2)` and
//! `T = U+V ~ χ²_{p+n+2j}` independent of `B`, we have `W = B/(1−B)` and
//! `V = (1−B)·T`. Every risk term therefore becomes a one-dimensional beta
//! expectation, integrated after the substitution `B = sin²(u)` which makes
//! the beta density analytic for the half-integer shapes that occur here.

use std::f64::consts::{FRAC_PI_2, LN_2};

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{entropy_loss_ratio, EstimatorSpec, Family, Noncentrality, ProblemDims};
use crate::numkernel::{
    digamma_unchecked, ln_beta_unchecked, poisson_truncate_capped, quad_rule, splitmix64, QuadRule,
    SeedSpec,
};

/// Mixture terms whose Poisson weight falls below this are not evaluated;
/// their mass is added to the error bound instead.
const NEGLIGIBLE_WEIGHT: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Quadrature,
    MonteCarlo,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub value: f64,
    /// Poisson truncation bound for quadrature, standard error for Monte Carlo.
    pub error_bound: f64,
    pub method: Method,
    pub j_max_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub order: usize,
    pub tail_tol: f64,
    pub j_cap: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            order: 128,
            tail_tol: 1e-12,
            j_cap: 100_000,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order < 16 || self.order > crate::numkernel::MAX_ORDER {
            return Err(Error::Argument(format!(
                "quadrature order must lie in 16..={}, got {}",
                crate::numkernel::MAX_ORDER,
                self.order
            )));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol <= 1e-8) {
            return Err(Error::Argument(format!(
                "tail_tol must lie in (0, 1e-8], got {}",
                self.tail_tol
            )));
        }
        if self.j_cap < 50 {
            return Err(Error::Argument(format!(
                "j_cap must be >= 50, got {}",
                self.j_cap
            )));
        }
        Ok(())
    }

    pub(crate) fn rule(&self) -> Result<QuadRule> {
        self.validate()?;
        quad_rule(self.order)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: SeedSpec,
    /// Reuse one `(J, U, V)` stream for every estimator.
    pub crn: bool,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 1000 {
            return Err(Error::Argument(format!(
                "samples must be >= 1000, got {}",
                self.samples
            )));
        }
        Ok(())
    }

    /// Seed used for `spec`. Under common random numbers every estimator
    /// shares the configured stream; otherwise the stream index is mixed with
    /// the family so estimators draw independently.
    pub fn seed_for(&self, spec: &EstimatorSpec) -> SeedSpec {
        if self.crn {
            self.seed
        } else {
            let tag = match spec.family() {
                Family::BestEquivariant => 1,
                Family::SteinTruncated => 2,
                Family::SimpleBayesVariance => 3,
            };
            self.seed
                .with_stream(splitmix64(self.seed.stream_index ^ (tag << 56)))
        }
    }
}

/// `E[g(B)]` for `B ~ Beta(a, b)`, integrated over `u` with `B = sin²(u)`.
///
/// `g` receives `(B, 1 − B)`. `breaks` lists points in (0, 1) where `g` is
/// not smooth; the integration is split there.
pub(crate) fn beta_expectation(
    rule: &QuadRule,
    a: f64,
    b: f64,
    breaks: &[f64],
    g: impl Fn(f64, f64) -> f64,
) -> f64 {
    let ln_norm = LN_2 - ln_beta_unchecked(a, b);
    let mut edges = vec![0.0];
    edges.extend(
        breaks
            .iter()
            .filter(|&&x| x > 0.0 && x < 1.0)
            .map(|&x| x.sqrt().asin()),
    );
    edges.push(FRAC_PI_2);
    let mut num = 0.0;
    let mut mass = 0.0;
    for seg in edges.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let width = hi - lo;
        for (x, xc, w) in rule.points() {
            // Evaluate from whichever end is closer so u stays exact near π/2.
            let (s, c) = if x <= 0.5 || hi < FRAC_PI_2 {
                let u = lo + width * x;
                (u.sin(), u.cos())
            } else {
                let v = width * xc;
                (v.cos(), v.sin())
            };
            let density = (ln_norm + (2.0 * a - 1.0) * s.ln() + (2.0 * b - 1.0) * c.ln()).exp();
            let weight = width * w * density;
            mass += weight;
            num += weight * g(s * s, c * c);
        }
    }
    num / mass
}

fn check_mixture(
    tau: Noncentrality,
    cfg: &QuadConfig,
) -> Result<(QuadRule, crate::numkernel::PoissonTruncation)> {
    let rule = cfg.rule()?;
    let trunc = poisson_truncate_capped(tau.poisson_rate(), cfg.tail_tol, cfg.j_cap)?;
    Ok((rule, trunc))
}

/// Sums `Σ_j w_j·term(j)` over the truncated mixture, skipping negligible
/// weights. Returns the value and an error bound covering the skipped and
/// truncated mass.
fn mix(
    trunc: &crate::numkernel::PoissonTruncation,
    mut term: impl FnMut(usize) -> f64,
) -> (f64, f64) {
    let mut value = 0.0;
    let mut skipped = 0.0;
    let mut sup = 0.0f64;
    let mut last = 0.0;
    for (j, &w) in trunc.weights.iter().enumerate() {
        if w < NEGLIGIBLE_WEIGHT {
            skipped += w;
            continue;
        }
        last = term(j);
        sup = sup.max(last.abs());
        value += w * last;
    }
    // Dropped tail terms are bounded by twice the last computed |term|
    // (terms vary at most logarithmically in j).
    let bound = trunc.tail_mass * 2.0 * last.abs().max(1e-300) + skipped * 2.0 * sup;
    (value, bound)
}

/// Exact risk of `spec` at noncentrality `tau` by Poisson-mixture quadrature.
pub fn risk_exact(
    spec: EstimatorSpec,
    dims: ProblemDims,
    tau: Noncentrality,
    cfg: &QuadConfig,
) -> Result<RiskEstimate> {
    let (rule, trunc) = check_mixture(tau, cfg)?;
    let (p, n) = (dims.pf(), dims.nf());
    let half_n = 0.5 * n;
    // E[ln V] with V ~ χ²_n
    let e_ln_v = digamma_unchecked(half_n) + LN_2;
    let breaks: Vec<f64> = spec.kink(dims).map(|w| w / (1.0 + w)).into_iter().collect();

    let (value, error_bound) = mix(&trunc, |j| {
        let a = 0.5 * (p + 2.0 * j as f64);
        let m = p + n + 2.0 * j as f64;
        let e_shrunk_v = beta_expectation(&rule, a, half_n, &breaks, |b, bc| {
            spec.shrink(b / bc, dims) * bc
        });
        let e_ln_shrink = beta_expectation(&rule, a, half_n, &breaks, |b, bc| {
            spec.ln_shrink(b / bc, dims)
        });
        // R_j = (m/n)·E[(1−φ)(1−B)] − E[ln(1−φ)] − E[ln V] + ln n − 1
        (m / n) * e_shrunk_v - e_ln_shrink - e_ln_v + n.ln() - 1.0
    });
    Ok(RiskEstimate {
        value,
        error_bound,
        method: Method::Quadrature,
        j_max_used: trunc.j_max,
    })
}

/// Risk of `spec` estimated from `cfg.samples` simulated `(J, U, V)` triples.
pub fn risk_mc(
    spec: EstimatorSpec,
    dims: ProblemDims,
    tau: Noncentrality,
    cfg: &McConfig,
) -> Result<RiskEstimate> {
    cfg.validate()?;
    let n = dims.nf();
    let mut acc = Welford::default();
    let j_max = simulate(dims, tau, cfg.samples, cfg.seed_for(&spec), |u, v| {
        let ratio = spec.shrink(u / v, dims) * v / n;
        acc.push(entropy_loss_ratio(ratio));
    })?;
    Ok(acc.estimate(j_max))
}

/// Monte Carlo risks of several estimators on one shared `(J, U, V)` stream.
pub fn risk_mc_crn(
    specs: &[EstimatorSpec],
    dims: ProblemDims,
    tau: Noncentrality,
    samples: usize,
    seed: SeedSpec,
) -> Result<Vec<RiskEstimate>> {
    McConfig {
        samples,
        seed,
        crn: true,
    }
    .validate()?;
    let n = dims.nf();
    let mut accs = vec![Welford::default(); specs.len()];
    let j_max = simulate(dims, tau, samples, seed, |u, v| {
        for (spec, acc) in specs.iter().zip(accs.iter_mut()) {
            acc.push(entropy_loss_ratio(spec.shrink(u / v, dims) * v / n));
        }
    })?;
    Ok(accs.iter().map(|a| a.estimate(j_max)).collect())
}

/// Paired Monte Carlo estimate of `R(δ₀) − R(δ̂_α)` under common random
/// numbers.
pub fn delta_mc(
    alpha: f64,
    dims: ProblemDims,
    tau: Noncentrality,
    samples: usize,
    seed: SeedSpec,
) -> Result<RiskEstimate> {
    let spec = EstimatorSpec::simple_bayes(alpha)?;
    let base = EstimatorSpec::best_equivariant();
    McConfig {
        samples,
        seed,
        crn: true,
    }
    .validate()?;
    let n = dims.nf();
    let mut acc = Welford::default();
    let j_max = simulate(dims, tau, samples, seed, |u, v| {
        let w = u / v;
        let l0 = entropy_loss_ratio(base.shrink(w, dims) * v / n);
        let l1 = entropy_loss_ratio(spec.shrink(w, dims) * v / n);
        acc.push(l0 - l1);
    })?;
    Ok(acc.estimate(j_max))
}

/// Draws `(U, V)` pairs for the noncentral model; returns the largest `J` seen.
fn simulate(
    dims: ProblemDims,
    tau: Noncentrality,
    samples: usize,
    seed: SeedSpec,
    mut sink: impl FnMut(f64, f64),
) -> Result<usize> {
    let mut rng = seed.rng();
    let rate = tau.poisson_rate();
    let poisson = if rate > 0.0 {
        Some(Poisson::new(rate).map_err(|e| Error::domain("risk_mc", e.to_string()))?)
    } else {
        None
    };
    let chi_v = ChiSquared::new(dims.nf()).map_err(|e| Error::domain("risk_mc", e.to_string()))?;
    let mut chi_u_cache: Vec<Option<ChiSquared<f64>>> = Vec::new();
    let mut j_max = 0usize;
    for _ in 0..samples {
        let j = match &poisson {
            Some(d) => {
                let x: f64 = d.sample(&mut rng);
                x as usize
            }
            None => 0,
        };
        j_max = j_max.max(j);
        if chi_u_cache.len() <= j {
            chi_u_cache.resize(j + 1, None);
        }
        let chi_u = match chi_u_cache[j] {
            Some(d) => d,
            None => {
                let d = ChiSquared::new(dims.pf() + 2.0 * j as f64)
                    .map_err(|e| Error::domain("risk_mc", e.to_string()))?;
                chi_u_cache[j] = Some(d);
                d
            }
        };
        let u = chi_u.sample(&mut rng);
        let v = sample_positive(&chi_v, &mut rng);
        sink(u, v);
    }
    Ok(j_max)
}

/// `V` enters through `ln V`; redraw the (measure-zero) exact zero.
fn sample_positive<R: Rng>(d: &ChiSquared<f64>, rng: &mut R) -> f64 {
    loop {
        let v = d.sample(rng);
        if v > 0.0 {
            return v;
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    fn estimate(&self, j_max: usize) -> RiskEstimate {
        let n = self.count as f64;
        let var = if self.count > 1 {
            self.m2 / (n - 1.0)
        } else {
            0.0
        };
        RiskEstimate {
            value: self.mean,
            error_bound: (var / n).sqrt(),
            method: Method::MonteCarlo,
            j_max_used: j_max,
        }
    }
}

/// Risk difference `Δ = R(δ₀) − R(δ̂_α)` by the reduced representation
/// `Δ_j = (α/n)·m_j·E[(1−B)²/(α+1−αB)] − E[ln(α+1−αB)]`.
pub fn delta_risk(
    alpha: f64,
    dims: ProblemDims,
    tau: Noncentrality,
    cfg: &QuadConfig,
) -> Result<RiskEstimate> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(
            "delta_risk",
            format!("alpha must be > 0, got {alpha}"),
        ));
    }
    let (rule, trunc) = check_mixture(tau, cfg)?;
    let (p, n) = (dims.pf(), dims.nf());
    let (value, error_bound) = mix(&trunc, |j| delta_term(&rule, alpha, p, n, j));
    Ok(RiskEstimate {
        value,
        error_bound,
        method: Method::Quadrature,
        j_max_used: trunc.j_max,
    })
}

/// `Δ_j`; `α + 1 − αB` is formed as `1 + α(1−B)`.
pub(crate) fn delta_term(rule: &QuadRule, alpha: f64, p: f64, n: f64, j: usize) -> f64 {
    let a = 0.5 * (p + 2.0 * j as f64);
    let m = p + n + 2.0 * j as f64;
    let ratio = beta_expectation(rule, a, 0.5 * n, &[], |_, bc| bc * bc / (1.0 + alpha * bc));
    let log = beta_expectation(rule, a, 0.5 * n, &[], |_, bc| (alpha * bc).ln_1p());
    (alpha / n) * m * ratio - log
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    fn dims(p: u32, n: u32) -> ProblemDims {
        ProblemDims::new(p, n).unwrap()
    }

    fn tau(t: f64) -> Noncentrality {
        Noncentrality::new(t).unwrap()
    }

    /// 8 ln 2 − 11/2: hand-integrated Δ at p=4, n=2, α=1, τ=0.
    fn anchor() -> f64 {
        8.0 * LN_2 - 5.5
    }

    #[test]
    fn best_equivariant_closed_form() {
        let cfg = QuadConfig::default();
        let be = EstimatorSpec::best_equivariant();
        for &t in &[0.0, 3.0, 77.0] {
            let r = risk_exact(be, dims(3, 2), tau(t), &cfg).unwrap();
            assert!((r.value - EULER_GAMMA).abs() < 1e-12, "tau={t} {}", r.value);
            let r = risk_exact(be, dims(5, 4), tau(t), &cfg).unwrap();
            assert!((r.value - (LN_2 - (1.0 - EULER_GAMMA))).abs() < 1e-12);
        }
    }

    #[test]
    fn simple_bayes_anchor() {
        let cfg = QuadConfig::default();
        let sb = EstimatorSpec::simple_bayes(1.0).unwrap();
        let r = risk_exact(sb, dims(4, 2), tau(0.0), &cfg).unwrap();
        assert!((r.value - (EULER_GAMMA - anchor())).abs() < 1e-12);
        let d = delta_risk(1.0, dims(4, 2), tau(0.0), &cfg).unwrap();
        assert!((d.value - anchor()).abs() < 1e-12);
        assert_eq!(d.j_max_used, 0);
    }

    #[test]
    fn delta_vanishes_with_alpha() {
        // Δ = O(α) as α → 0
        for &alpha in &[1e-6, 1e-9, 1e-12] {
            let d = delta_risk(alpha, dims(4, 2), tau(3.0), &QuadConfig::default()).unwrap();
            assert!(
                d.value.abs() < 10.0 * alpha,
                "alpha={alpha} delta={}",
                d.value
            );
        }
    }

    #[test]
    fn delta_matches_risk_difference_at_large_tau() {
        let cfg = QuadConfig::default();
        let d = dims(4, 2);
        let t = tau(100.0);
        let r0 = risk_exact(EstimatorSpec::best_equivariant(), d, t, &cfg).unwrap();
        let r1 = risk_exact(EstimatorSpec::simple_bayes(1.0).unwrap(), d, t, &cfg).unwrap();
        let delta = delta_risk(1.0, d, t, &cfg).unwrap();
        assert!((delta.value - (r0.value - r1.value)).abs() < 1e-8);
    }

    #[test]
    fn log_one_minus_b_quadrature_matches_digamma() {
        // ln(1−B) has a logarithmic endpoint singularity, so quadrature only
        // converges algebraically; the risk engine uses ψ(b) − ψ(a+b) instead.
        let rule = quad_rule(1024).unwrap();
        for &(a, b) in &[
            (0.5, 0.5),
            (2.0, 1.0),
            (1.5, 2.5),
            (30.5, 5.0),
            (101.0, 0.5),
        ] {
            let q = beta_expectation(&rule, a, b, &[], |_, bc| bc.ln());
            let exact = digamma_unchecked(b) - digamma_unchecked(a + b);
            assert!(
                ((q - exact) / exact).abs() < 1e-5,
                "a={a} b={b} {q} vs {exact}"
            );
        }
    }

    #[test]
    fn split_integration_agrees() {
        let rule = quad_rule(128).unwrap();
        for &(a, b) in &[(0.5, 0.5), (2.0, 1.0), (1.5, 2.5), (30.5, 5.0)] {
            let g = |x: f64, xc: f64| x * xc / (1.0 + 0.3 * xc);
            let whole = beta_expectation(&rule, a, b, &[], g);
            let split = beta_expectation(&rule, a, b, &[0.3, 0.77], g);
            assert!((whole - split).abs() < 1e-13);
        }
    }

    #[test]
    fn order_doubling_converges() {
        let d = dims(3, 5);
        let t = tau(7.0);
        let lo = QuadConfig::default();
        let hi = QuadConfig { order: 256, ..lo };
        for spec in [
            EstimatorSpec::stein_truncated(),
            EstimatorSpec::simple_bayes(0.4).unwrap(),
        ] {
            let a = risk_exact(spec, d, t, &lo).unwrap().value;
            let b = risk_exact(spec, d, t, &hi).unwrap().value;
            assert!((a - b).abs() < 1e-10, "{spec}: {a} vs {b}");
        }
    }

    #[test]
    fn truncation_cap_is_an_error() {
        let cfg = QuadConfig {
            j_cap: 50,
            ..QuadConfig::default()
        };
        let err = risk_exact(
            EstimatorSpec::stein_truncated(),
            dims(2, 2),
            tau(400.0),
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
        assert!(delta_risk(1.0, dims(2, 2), tau(400.0), &cfg).is_err());
    }

    #[test]
    fn invalid_configs() {
        let bad = QuadConfig {
            order: 8,
            ..QuadConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = QuadConfig {
            tail_tol: 1e-6,
            ..QuadConfig::default()
        };
        assert!(bad.validate().is_err());
        let mc = McConfig {
            samples: 10,
            seed: SeedSpec::new(0, 0),
            crn: true,
        };
        assert!(risk_mc(EstimatorSpec::best_equivariant(), dims(1, 1), tau(0.0), &mc).is_err());
    }

    #[test]
    fn mc_is_deterministic_and_crn_shares_draws() {
        let cfg = McConfig {
            samples: 5000,
            seed: SeedSpec::new(99, 4),
            crn: true,
        };
        let sb = EstimatorSpec::simple_bayes(0.7).unwrap();
        let a = risk_mc(sb, dims(4, 2), tau(3.0), &cfg).unwrap();
        let b = risk_mc(sb, dims(4, 2), tau(3.0), &cfg).unwrap();
        assert_eq!(a, b);
        let both = risk_mc_crn(
            &[EstimatorSpec::best_equivariant(), sb],
            dims(4, 2),
            tau(3.0),
            5000,
            cfg.seed,
        )
        .unwrap();
        assert_eq!(both[1], a);
        let indep = McConfig { crn: false, ..cfg };
        assert_ne!(
            risk_mc(sb, dims(4, 2), tau(3.0), &indep).unwrap().value,
            a.value
        );
    }

    #[test]
    fn paired_delta_has_small_error() {
        let d = dims(4, 2);
        let est = delta_mc(1.0, d, tau(0.0), 200_000, SeedSpec::new(5, 0)).unwrap();
        assert!((est.value - anchor()).abs() < 4.0 * est.error_bound);
        let unpaired = risk_mc(
            EstimatorSpec::simple_bayes(1.0).unwrap(),
            d,
            tau(0.0),
            &McConfig {
                samples: 200_000,
                seed: SeedSpec::new(5, 0),
                crn: true,
            },
        )
        .unwrap();
        assert!(est.error_bound < unpaired.error_bound);
    }
}
