//! Sampling model, entropy loss and the scale-equivariant estimator families.
//!
//! Every estimator here has the form `(1 − φ(W))·S/n` with `W = ‖X‖²/S`,
//! so the families differ only in `φ`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension `p` of `X` and degrees of freedom `n` of `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProblemDims {
    p: u32,
    n: u32,
}

impl ProblemDims {
    pub fn new(p: u32, n: u32) -> Result<Self> {
        if p == 0 || n == 0 {
            return Err(Error::domain(
                "ProblemDims",
                format!("need p >= 1 and n >= 1, got p={p}, n={n}"),
            ));
        }
        Ok(Self { p, n })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn pf(&self) -> f64 {
        f64::from(self.p)
    }

    pub fn nf(&self) -> f64 {
        f64::from(self.n)
    }
}

impl fmt::Display for ProblemDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(p={}, n={})", self.p, self.n)
    }
}

/// `τ = ‖θ‖²/σ²`, the only functional of `(θ, σ²)` the risk depends on.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Noncentrality(f64);

impl Noncentrality {
    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau >= 0.0 {
            Ok(Self(tau))
        } else {
            Err(Error::domain(
                "Noncentrality",
                format!("tau must be finite and >= 0, got {tau}"),
            ))
        }
    }

    pub fn tau(&self) -> f64 {
        self.0
    }

    /// Rate of the Poisson mixing variable, `τ/2`.
    pub fn poisson_rate(&self) -> f64 {
        0.5 * self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `δ₀ = S/n`, φ ≡ 0.
    BestEquivariant,
    /// Stein's truncated estimator `min(S/n, (‖X‖²+S)/(p+n))`.
    SteinTruncated,
    /// `φ(w) = α/(α+1+w)`.
    SimpleBayesVariance,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::BestEquivariant => "best_equivariant",
            Family::SteinTruncated => "stein_truncated",
            Family::SimpleBayesVariance => "simple_bayes_variance",
        }
    }
}

/// An estimator family together with its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    family: Family,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
}

impl EstimatorSpec {
    pub fn best_equivariant() -> Self {
        Self {
            family: Family::BestEquivariant,
            alpha: None,
        }
    }

    pub fn stein_truncated() -> Self {
        Self {
            family: Family::SteinTruncated,
            alpha: None,
        }
    }

    /// Simple Bayes estimator; `alpha` must be finite and strictly positive.
    pub fn simple_bayes(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::domain(
                "EstimatorSpec",
                format!("alpha must be finite and > 0, got {alpha}"),
            ));
        }
        Ok(Self {
            family: Family::SimpleBayesVariance,
            alpha: Some(alpha),
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// `φ(w)`.
    pub fn phi(&self, w: f64, dims: ProblemDims) -> f64 {
        match (self.family, self.alpha) {
            (Family::BestEquivariant, _) => 0.0,
            (Family::SteinTruncated, _) => {
                let (p, n) = (dims.pf(), dims.nf());
                ((p - n * w) / (p + n)).max(0.0)
            }
            (Family::SimpleBayesVariance, Some(a)) => a / (a + 1.0 + w),
            (Family::SimpleBayesVariance, None) => unreachable!("constructor enforces alpha"),
        }
    }

    /// `1 − φ(w)`, computed without cancellation.
    pub fn shrink(&self, w: f64, dims: ProblemDims) -> f64 {
        match (self.family, self.alpha) {
            (Family::BestEquivariant, _) => 1.0,
            (Family::SteinTruncated, _) => {
                let (p, n) = (dims.pf(), dims.nf());
                (n * (1.0 + w) / (p + n)).min(1.0)
            }
            (Family::SimpleBayesVariance, Some(a)) => (1.0 + w) / (a + 1.0 + w),
            (Family::SimpleBayesVariance, None) => unreachable!("constructor enforces alpha"),
        }
    }

    /// `ln(1 − φ(w))`.
    pub fn ln_shrink(&self, w: f64, dims: ProblemDims) -> f64 {
        (-self.phi(w, dims)).ln_1p()
    }

    /// Point in `w` where `φ` is not smooth, if any.
    pub fn kink(&self, dims: ProblemDims) -> Option<f64> {
        match self.family {
            Family::SteinTruncated => Some(dims.pf() / dims.nf()),
            _ => None,
        }
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.alpha {
            Some(a) => write!(f, "{}(alpha={a})", self.family.name()),
            None => f.write_str(self.family.name()),
        }
    }
}

/// Hyperparameter `a` of the hierarchical prior, tied to its problem dims.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorHyper {
    a: f64,
    dims: ProblemDims,
}

impl PriorHyper {
    /// Requires `p/2 + a + 1 > 0`; at or below that boundary the marginal
    /// diverges.
    pub fn new(a: f64, dims: ProblemDims) -> Result<Self> {
        if !a.is_finite() || 0.5 * dims.pf() + a + 1.0 <= 0.0 {
            return Err(Error::domain(
                "PriorHyper",
                format!("need p/2 + a + 1 > 0, got a={a} with {dims}"),
            ));
        }
        Ok(Self { a, dims })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn dims(&self) -> ProblemDims {
        self.dims
    }

    /// `p/2 + a + 1`.
    pub fn shape(&self) -> f64 {
        0.5 * self.dims.pf() + self.a + 1.0
    }
}

/// `δ/σ² − ln(δ/σ²) − 1`.
pub fn entropy_loss(delta: f64, sigma2: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite() && sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::domain(
            "entropy_loss",
            format!("need delta > 0 and sigma2 > 0, got ({delta}, {sigma2})"),
        ));
    }
    Ok(entropy_loss_ratio(delta / sigma2))
}

/// Loss as a function of the ratio `r = δ/σ²`.
pub(crate) fn entropy_loss_ratio(r: f64) -> f64 {
    let d = r - 1.0;
    d - d.ln_1p()
}

pub fn phi_of(spec: EstimatorSpec, w: f64, dims: ProblemDims) -> f64 {
    spec.phi(w, dims)
}

/// `(1 − φ(x_sq/s))·s/n`.
pub fn estimate_variance(spec: EstimatorSpec, x_sq: f64, s: f64, dims: ProblemDims) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::domain(
            "estimate_variance",
            format!("s must be > 0, got {s}"),
        ));
    }
    if !(x_sq >= 0.0 && x_sq.is_finite()) {
        return Err(Error::domain(
            "estimate_variance",
            format!("x_sq must be >= 0, got {x_sq}"),
        ));
    }
    Ok(spec.shrink(x_sq / s, dims) * s / dims.nf())
}

/// Shrinkage rule for the mean, `(1 − α/(α+1+‖x‖²/s))·x`.
pub fn estimate_mean(x: &[f64], s: f64, alpha: f64) -> Result<Vec<f64>> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::domain(
            "estimate_mean",
            format!("s must be > 0, got {s}"),
        ));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(
            "estimate_mean",
            format!("alpha must be > 0, got {alpha}"),
        ));
    }
    let w = x.iter().map(|v| v * v).sum::<f64>() / s;
    let factor = (1.0 + w) / (alpha + 1.0 + w);
    Ok(x.iter().map(|v| factor * v).collect())
}

/// `α = (p/2 + a + 1)/(n/2)`.
pub fn alpha_from_hyper(h: PriorHyper) -> Result<f64> {
    let alpha = h.shape() / (0.5 * h.dims().nf());
    if alpha > 0.0 && alpha.is_finite() {
        Ok(alpha)
    } else {
        Err(Error::domain(
            "alpha_from_hyper",
            format!("alpha must be > 0, got {alpha}"),
        ))
    }
}
