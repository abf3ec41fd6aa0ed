//! Physicists' Hermite polynomials `H_n`, their `L²(dγ)`-normalised
//! versions `h_n = H_n / sqrt(2^n n!)`, tensor products, Gauss-Hermite
//! quadrature against `dγ(x) = π^{-1/2} e^{-x²} dx`, and residual checks
//! for the classical Hermite identities.
//!
//! Evaluation always runs the three-term recurrence
//! `H_{n+1} = 2x H_n - 2n H_{n-1}`. The Rodrigues formula is only used in
//! exact integer arithmetic, by [`rodrigues_coefficients`].

use std::f64::consts::PI;

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};

use crate::combinatorics::{binomial_f64, factorial, MultiIndex};
use crate::error::{check_dim, Error, Result};

/// Degree bound and normalisation of a Hermite family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HermiteBasisSpec {
    pub max_degree: usize,
    pub normalized: bool,
}

impl HermiteBasisSpec {
    /// All values `H_0(x) .. H_max(x)` (or `h_n`).
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        if self.normalized {
            hermite_normalized_all(self.max_degree, x)
        } else {
            hermite_all(self.max_degree, x)
        }
    }
}

/// `sqrt(2^n n!)`, formed exactly before the one rounding to `f64`.
pub fn normalization(n: usize) -> f64 {
    let exact = (BigInt::from(1) << n) * BigInt::from(factorial(n));
    match exact.to_f64() {
        Some(v) if v.is_finite() => v.sqrt(),
        // beyond f64 range: go through logs
        _ => {
            let ln = n as f64 * std::f64::consts::LN_2 + ln_factorial(n);
            (0.5 * ln).exp()
        }
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    match n {
        0 => return 1.0,
        1 => return cur,
        _ => {}
    }
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `H_0(x) ..= H_n(x)`.
pub fn hermite_all(n: usize, x: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(n + 1);
    v.push(1.0);
    if n >= 1 {
        v.push(2.0 * x);
    }
    for k in 1..n {
        let next = 2.0 * x * v[k] - 2.0 * k as f64 * v[k - 1];
        v.push(next);
    }
    v
}

/// `h_n(x)` through the normalised recurrence
/// `h_{n+1} = sqrt(2/(n+1)) x h_n - sqrt(n/(n+1)) h_{n-1}`,
/// which never forms `H_n` or `2^n n!` on their own.
pub fn hermite_normalized(n: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

pub fn hermite_normalized_all(n: usize, x: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(n + 1);
    v.push(1.0);
    let mut prev = 0.0;
    for k in 0..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * v[k] - (kf / (kf + 1.0)).sqrt() * prev;
        prev = v[k];
        v.push(next);
    }
    v
}

/// `H_n'(x) = 2n H_{n-1}(x)`.
pub fn hermite_derivative(n: usize, x: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        2.0 * n as f64 * hermite(n - 1, x)
    }
}

/// `Π_i H_{α_i}(x_i)`, or `Π_i h_{α_i}(x_i)` when `normalized`.
pub fn hermite_multi(alpha: &MultiIndex, x: &[f64], normalized: bool) -> Result<f64> {
    check_dim(alpha.dim(), x.len())?;
    Ok(alpha
        .components()
        .iter()
        .zip(x)
        .map(|(&a, &xi)| if normalized { hermite_normalized(a, xi) } else { hermite(a, xi) })
        .product())
}

/// Gauss-Hermite rule for the probability measure `dγ`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `∫ f dγ`
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Nodes are the roots of `H_order`, found by Newton's method on the
/// normalised recurrence from the classical asymptotic starting guesses;
/// the weight at a node `x` is the Christoffel number `1 / Σ_{k<order} h_k(x)²`.
pub fn gauss_hermite_rule(order: usize) -> Result<QuadratureRule> {
    if order == 0 {
        return Err(Error::Domain("quadrature order must be at least 1".into()));
    }
    let n = order;
    let nf = n as f64;
    let half = n.div_ceil(2);
    let mut positive: Vec<f64> = Vec::with_capacity(half);

    // p_n(x) = h_n(x) in the measure dγ; its derivative is sqrt(2n) h_{n-1}.
    let eval = |x: f64| {
        let mut prev = 0.0;
        let mut cur = 1.0;
        for k in 0..n {
            let kf = k as f64;
            let next = (2.0 / (kf + 1.0)).sqrt() * x * cur - (kf / (kf + 1.0)).sqrt() * prev;
            prev = cur;
            cur = next;
        }
        (cur, (2.0 * nf).sqrt() * prev)
    };

    let mut z = 0.0;
    for i in 0..half {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * positive[0],
            3 => 1.91 * z - 0.91 * positive[1],
            _ => 2.0 * z - positive[i - 2],
        };
        for _ in 0..100 {
            let (p, dp) = eval(z);
            let step = p / dp;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        // one more pass to settle the last bit
        let (p, dp) = eval(z);
        z -= p / dp;
        positive.push(z);
    }

    let mut nodes: Vec<f64> = Vec::with_capacity(n);
    for &p in positive.iter() {
        nodes.push(-p.abs());
    }
    for &p in positive.iter().rev() {
        nodes.push(p.abs());
    }
    if n % 2 == 1 {
        // the middle root is exactly 0; it was produced twice above
        nodes.remove(half - 1);
        nodes[half - 1] = 0.0;
    }
    nodes.sort_by(f64::total_cmp);

    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let s: f64 = hermite_normalized_all(n - 1, x).iter().map(|h| h * h).sum();
            1.0 / s
        })
        .collect();
    // symmetrise exactly
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::NonConvergence(format!(
            "Gauss-Hermite weights of order {order} sum to {total}"
        )));
    }
    Ok(QuadratureRule { nodes, weights })
}

/// `|Σ_{n<=n_trunc} H_n(x) t^n / n! - e^{2tx - t²}|`
pub fn check_generating_function(x: f64, t: f64, n_trunc: usize) -> f64 {
    let hs = hermite_all(n_trunc, x);
    let mut tn_over_fact = 1.0;
    let mut sum = 0.0;
    for (n, h) in hs.iter().enumerate() {
        if n > 0 {
            tn_over_fact *= t / n as f64;
        }
        sum += h * tn_over_fact;
    }
    (sum - (2.0 * t * x - t * t).exp()).abs()
}

/// Relative residual of `H_n(x+y) = Σ_k C(n,k) (2y)^{n-k} H_k(x)`,
/// scaled by `max(1, |H_n(x+y)|)`. The left side is the `f64` recurrence;
/// the expansion is summed in extended precision, since its terms can
/// exceed the result by many orders of magnitude.
pub fn check_binomial_identity(n: usize, x: f64, y: f64) -> f64 {
    let lhs = hermite(n, x + y);
    let (xb, two_y) = (wide(x), wide(2.0 * y));
    let two = wide(2.0);
    let mut hs = vec![wide(1.0), two.clone() * &xb];
    for k in 1..n {
        let next = two.clone() * &xb * &hs[k] - wide((2 * k) as f64) * &hs[k - 1];
        hs.push(next);
    }
    let mut power = wide(1.0);
    let mut rhs = wide(0.0);
    for k in (0..=n).rev() {
        rhs += wide(binomial_f64(n, k)) * &power * &hs[k];
        power *= &two_y;
    }
    let rhs = rhs.to_f64().value();
    (lhs - rhs).abs() / lhs.abs().max(1.0)
}

type Wide = FBig<HalfEven, 2>;

const WIDE_BITS: usize = 192;

fn wide(v: f64) -> Wide {
    Wide::try_from(v).expect("finite input").with_precision(WIDE_BITS).value()
}

/// Evaluates `(-2i)^n e^{x²} π^{-1/2} ∫ ξ^n e^{2ixξ} e^{-ξ²} dξ` with the
/// rule and returns `|value - H_n(x)| / max(1, |H_n(x)|)`.
///
/// Errors if the imaginary part exceeds `1e-10` in the same relative scale
/// or the rule is shorter than `n + 5`.
pub fn check_integral_representation(n: usize, x: f64, rule: &QuadratureRule) -> Result<f64> {
    if rule.order() < n + 5 {
        return Err(Error::Domain(format!(
            "rule order {} too small for degree {n}",
            rule.order()
        )));
    }
    let term = |i: usize| {
        let (xi, w) = (rule.nodes()[i], rule.weights()[i]);
        Complex64::from_polar(w * xi.powi(n as i32), 2.0 * x * xi)
    };
    // nodes are symmetric; summing mirrored pairs first cancels odd parts exactly
    let q = rule.order();
    let integral: Complex64 = (0..q.div_ceil(2))
        .map(|i| if i == q - 1 - i { term(i) } else { term(i) + term(q - 1 - i) })
        .sum();
    let prefactor = Complex64::new(0.0, -2.0).powu(n as u32) * (x * x).exp();
    let value = prefactor * integral;
    let exact = hermite(n, x);
    let scale = exact.abs().max(1.0);
    if value.im.abs() / scale > 1e-10 {
        return Err(Error::NonConvergence(format!(
            "imaginary part {} of the Hermite integral at n={n}, x={x}",
            value.im
        )));
    }
    Ok((value.re - exact).abs() / scale)
}

pub(crate) const CENTRAL_WEIGHTS: [&[f64]; 5] = [
    &[1.0],
    &[-0.5, 0.0, 0.5],
    &[1.0, -2.0, 1.0],
    &[-0.5, 1.0, 0.0, -1.0, 0.5],
    &[1.0, -4.0, 6.0, -4.0, 1.0],
];

/// Central difference of order `order <= 4` with step `h`.
pub(crate) fn central_difference<F: Fn(f64) -> f64>(f: &F, at: f64, order: usize, h: f64) -> f64 {
    let w = CENTRAL_WEIGHTS[order];
    let half = (w.len() / 2) as f64;
    let sum: f64 = w
        .iter()
        .enumerate()
        .map(|(i, wi)| if *wi == 0.0 { 0.0 } else { wi * f(at + (i as f64 - half) * h) })
        .sum();
    sum / h.powi(order as i32)
}

/// Richardson table over steps `h, h/2, …`; central differences have an
/// error expansion in even powers of the step.
pub(crate) fn richardson<F: Fn(f64) -> f64>(f: &F, at: f64, order: usize, h: f64, levels: usize) -> f64 {
    let levels = levels.max(1);
    let mut row: Vec<f64> = (0..levels)
        .map(|l| central_difference(f, at, order, h / (1u32 << l) as f64))
        .collect();
    for j in 1..levels {
        let f4 = 4f64.powi(j as i32);
        row = row.windows(2).map(|p| (f4 * p[1] - p[0]) / (f4 - 1.0)).collect();
    }
    row[0]
}

/// Compares `e^{-(x-t)² + x²} H_N(x - t)` with the Richardson-extrapolated
/// N-th central difference in `t` of `e^{-(x-t)² + x²}` (step `h`, three
/// levels). The stencil runs in extended precision, so only truncation
/// error remains. The deviation is relative to the larger of the two
/// sides' natural scales, `max(|rhs|, e^{-(x-t)² + x²})`, so it stays
/// meaningful where `H_N(x - t)` vanishes.
pub fn check_generating_derivative(order: usize, x: f64, t: f64, h: f64) -> Result<f64> {
    if !(1..=4).contains(&order) {
        return Err(Error::Domain("generating-function derivative check needs 1 <= N <= 4".into()));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain("step must be positive".into()));
    }
    let g = (2.0 * x * t - t * t).exp();
    let rhs = g * hermite(order, x - t);

    let (two_x, tb) = (wide(2.0 * x), wide(t));
    // e^{-(x-s)² + x²} = e^{(2x - s) s}
    let g_wide = |s: Wide| ((two_x.clone() - &s) * s).exp();
    let weights = CENTRAL_WEIGHTS[order];
    let half = (weights.len() / 2) as f64;
    let difference = |step: &Wide| {
        let mut acc = wide(0.0);
        for (i, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                acc += wide(w) * g_wide(tb.clone() + wide(i as f64 - half) * step);
            }
        }
        (0..order).fold(acc, |a, _| a / step)
    };
    let mut row: Vec<Wide> = (0..3).map(|l| difference(&(wide(h) / wide((1u32 << l) as f64)))).collect();
    for j in 1..row.len() {
        let f4 = wide(4f64.powi(j as i32));
        row = row.windows(2).map(|p| (f4.clone() * &p[1] - &p[0]) / (f4.clone() - wide(1.0))).collect();
    }
    let fd = row[0].to_f64().value();
    Ok((fd - rhs).abs() / rhs.abs().max(g))
}

/// Coefficients (ascending powers) of `H_n` from the recurrence, exactly.
pub fn hermite_coefficients(n: usize) -> Vec<BigInt> {
    let mut prev: Vec<BigInt> = vec![BigInt::from(1)];
    if n == 0 {
        return prev;
    }
    let mut cur: Vec<BigInt> = vec![BigInt::zero(), BigInt::from(2)];
    for k in 1..n {
        let mut next = vec![BigInt::zero(); k + 2];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += c * 2;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= c * (2 * k);
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// Coefficients of `(-1)^n e^{x²} ∂^n e^{-x²}`, by differentiating
/// `P(x) e^{-x²}` symbolically: `∂ [P e^{-x²}] = (P' - 2x P) e^{-x²}`.
pub fn rodrigues_coefficients(n: usize) -> Vec<BigInt> {
    let mut p: Vec<BigInt> = vec![BigInt::from(1)];
    for _ in 0..n {
        let mut next = vec![BigInt::zero(); p.len() + 1];
        for (i, c) in p.iter().enumerate() {
            if i > 0 {
                next[i - 1] += c * i;
            }
            next[i + 1] -= c * 2;
        }
        p = next;
    }
    if n % 2 == 1 {
        for c in p.iter_mut() {
            *c = -c.clone();
        }
    }
    p
}

/// The one-dimensional generator `½ p'' - x p'` on a coefficient vector.
pub fn ou_generator_coefficients(p: &[BigInt]) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); p.len()];
    for (i, c) in p.iter().enumerate() {
        if i >= 2 {
            // ½ · i(i-1) is an integer
            out[i - 2] += c * (i * (i - 1) / 2);
        }
        out[i] -= c * i;
    }
    out
}

/// `π^{-1/2}`, the density constant of the one-dimensional Gaussian measure.
pub fn gaussian_density_constant() -> f64 {
    1.0 / PI.sqrt()
}
