//! Fixed-order Gauss–Legendre quadrature on the unit interval.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 1024;

/// Gauss–Legendre nodes and weights mapped to (0, 1).
///
/// Weights sum to one, so `integrate` of a constant returns that constant.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    nodes: Vec<f64>,
    /// `1 − node`, kept separately because it cannot be recovered to full
    /// relative precision near the right end.
    complements: Vec<f64>,
    weights: Vec<f64>,
}

/// Builds the `order`-point Gauss–Legendre rule on (0, 1).
pub fn quad_rule(order: usize) -> Result<QuadRule> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::Argument(format!(
            "quadrature order must lie in 1..={MAX_ORDER}, got {order}"
        )));
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut complements = vec![0.0; n];
    let mut weights = vec![0.0; n];
    // Roots of P_n are cos θ_i. Newton runs in θ so that the mapped nodes
    // sin²(θ/2) and cos²(θ/2) are both exact to relative precision.
    for i in 0..n.div_ceil(2) {
        let mut theta = PI * (i as f64 + 0.75) / (n as f64 + 0.5);
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, theta.cos());
            dp = d;
            let step = p / (theta.sin() * d);
            theta += step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, theta.cos());
        if d.is_finite() {
            dp = d;
        }
        let s = theta.sin();
        let w = 1.0 / (s * s * dp * dp);
        let half = 0.5 * theta;
        let lo = half.sin().powi(2);
        let hi = half.cos().powi(2);
        // θ near 0 corresponds to x near +1: the upper node.
        nodes[n - 1 - i] = hi;
        complements[n - 1 - i] = lo;
        weights[n - 1 - i] = w;
        nodes[i] = lo;
        complements[i] = hi;
        weights[i] = w;
    }
    if n % 2 == 1 {
        let mid = n / 2;
        nodes[mid] = 0.5;
        complements[mid] = 0.5;
        let (_, d) = legendre_with_derivative(n, 0.0);
        weights[mid] = 1.0 / (d * d);
    }
    Ok(QuadRule {
        nodes,
        complements,
        weights,
    })
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

impl QuadRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Iterates `(node, 1 − node, weight)`.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.nodes
            .iter()
            .zip(&self.complements)
            .zip(&self.weights)
            .map(|((&x, &c), &w)| (x, c, w))
    }

    /// `∫₀¹ f(x) dx`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points().map(|(x, _, w)| w * f(x)).sum()
    }

    /// `∫_lo^hi f(x) dx`.
    pub fn integrate_over(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let width = hi - lo;
        width
            * self
                .points()
                .map(|(x, _, w)| w * f(lo + width * x))
                .sum::<f64>()
    }

    /// `∫₀¹ x^{a−1} (1−x)^{c−1} h(x, 1−x) dx` for real `a, c > 0` and `h`
    /// smooth on [0, 1].
    ///
    /// The interval is split at 1/2; each half is graded towards its
    /// endpoint (`x = y^k`, `1 − x = z^k`) so the endpoint power becomes
    /// `k·a − 1` (resp. `k·c − 1`). Half-integer exponents use `k = 2`,
    /// which makes the transformed integrand analytic.
    pub fn integrate_beta_kernel(&self, a: f64, c: f64, h: impl Fn(f64, f64) -> f64) -> f64 {
        let ka = grading(a);
        let kc = grading(c);
        let left = self.graded_half(ka, a, c, &h);
        let right = self.graded_half(kc, c, a, |r, rc| h(rc, r));
        left + right
    }

    /// `∫₀^{1/2} t^{e−1} (1−t)^{f−1} g(t, 1−t) dt` with `t = y^k`.
    fn graded_half(&self, k: f64, e: f64, f: f64, g: impl Fn(f64, f64) -> f64) -> f64 {
        let upper = 0.5f64.powf(1.0 / k);
        let power = k * e - 1.0;
        let integrand = |y: f64| {
            let t = y.powf(k);
            let tc = 1.0 - t;
            k * y.powf(power) * tc.powf(f - 1.0) * g(t, tc)
        };
        self.integrate_over(0.0, upper, integrand)
    }
}

fn grading(exponent: f64) -> f64 {
    let twice = 2.0 * exponent;
    if exponent >= 0.5 && twice == twice.round() {
        2.0
    } else {
        (8.0 / exponent).ceil().clamp(8.0, 64.0)
    }
}
