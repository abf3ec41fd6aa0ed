//! Closed-form integral kernels of `e^{tL}` and `L^N e^{tL}` with respect to
//! the Gaussian measure `dγ(y) = π^{-d/2} e^{-|y|²} dy`.
//!
//! Notation for one coordinate at time `t`:
//!
//! ```text
//! a² = 1 - e^{-2t},   σ = e^{-t} / a,   β = (e^{-t} x - y) / a
//! M_t(x, y) = a^{-1} exp(y² - β²)
//! ```
//!
//! The derivative kernel is `M_t^N = ∂_t^N M_t`. In one dimension
//!
//! ```text
//! M_t^N(x, y) = M_t(x, y) Σ_{m=0}^{N} Σ_{ℓ=0}^{m}
//!     (-1)^{N+m} S(N, m) C(m, ℓ) 2^{-m} σ^{2m-ℓ} H_ℓ(x) H_{2m-ℓ}(β)
//! ```
//!
//! with `σ > 0` and the Hermite polynomial of index `ℓ` taken at `x`.
//!
//! Derivation. Put `s = e^{-t}`, so `∂_t = -s ∂_s` and
//! `∂_t^N = (-1)^N Σ_m S(N, m) s^m ∂_s^m`. Writing the Mehler kernel as a
//! Fourier integral,
//!
//! ```text
//! M_t(x, y) = π^{-1/2} e^{y²} ∫ e^{-(1-s²) ξ² - 2i(s x - y) ξ} dξ,
//! ```
//!
//! the `s`-dependence of the integrand is `e^{-(x + iξs)² + x²}` times a
//! factor free of `s`, and `∂_s^m e^{-(x+iξs)²+x²} = (-iξ)^m H_m(x + iξs)
//! e^{-(x+iξs)²+x²}`. Expanding `H_m(x + iξs)` with the binomial identity and
//! integrating `ξ^k` against the Gaussian produces
//! `M_t (s/a)^k 2^{-k} H_k(β)` up to the sign `i^{2k}`; collecting the signs
//! gives `(-1)^{N+m}` with a positive `σ`. A printed variant with the
//! opposite sign on odd powers of `σ`, or with `H_ℓ(y)`, fails already for
//! `N = 1` against `∂_t M_t`.
//!
//! In `d` dimensions `L^N = (Σ_i L_i)^N` and the coordinates commute, so
//! `M_t^N(x, y) = Σ_{|n|=N} N!/n! Π_i M_t^{n_i}(x_i, y_i)`.
//!
//! Conditioning: everything is singular as `t ↓ 0`. Times below
//! [`MIN_TIME`] are rejected and `1 - e^{-2t}` is always formed with
//! `expm1`.

pub mod oracle;

use crate::combinatorics::{binomial, compositions, multinomial, stirling2};
use crate::error::{check_dim, Error, Result};
use num_traits::ToPrimitive;

/// Smallest admissible time.
pub const MIN_TIME: f64 = 1e-6;

pub(crate) fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain("t must be positive".into()));
    }
    if t < MIN_TIME {
        return Err(Error::Domain(format!("t must be at least {MIN_TIME:e}")));
    }
    Ok(())
}

fn check_coords(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Domain(format!("{name} must have at least one coordinate")));
    }
    if v.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain(format!("{name} has a non-finite coordinate")));
    }
    Ok(())
}

/// One kernel evaluation: time `t`, derivative order `N`, points `x`, `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelQuery {
    t: f64,
    order: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl KernelQuery {
    pub fn new(t: f64, order: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_time(t)?;
        check_coords("x", &x)?;
        check_coords("y", &y)?;
        check_dim(x.len(), y.len())?;
        Ok(Self { t, order, x, y })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Same points and order at another time.
    pub fn at_time(&self, t: f64) -> Result<Self> {
        Self::new(t, self.order, self.x.clone(), self.y.clone())
    }

    pub fn with_order(&self, order: usize) -> Self {
        Self { order, ..self.clone() }
    }

    /// The query with `x` and `y` exchanged.
    pub fn swapped(&self) -> Self {
        Self { x: self.y.clone(), y: self.x.clone(), ..self.clone() }
    }
}

/// Time-dependent constants shared by every coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeScale {
    pub t: f64,
    /// `e^{-t}`
    pub decay: f64,
    /// `1 - e^{-2t}`
    pub var: f64,
    /// `sqrt(1 - e^{-2t})`
    pub width: f64,
    /// `e^{-t} / sqrt(1 - e^{-2t})`
    pub sigma: f64,
}

impl TimeScale {
    pub fn new(t: f64) -> Self {
        let decay = (-t).exp();
        let var = -(-2.0 * t).exp_m1();
        let width = var.sqrt();
        Self { t, decay, var, width, sigma: decay / width }
    }

    pub fn beta(&self, x: f64, y: f64) -> f64 {
        (self.decay * x - y) / self.width
    }

    /// `ln M_t(x, y)` for a single coordinate.
    pub fn log_mehler_1d(&self, x: f64, y: f64) -> f64 {
        let b = self.beta(x, y);
        y * y - b * b - 0.5 * self.var.ln()
    }
}

#[derive(Clone, Copy, Debug)]
struct BracketTerm {
    /// index of `H_ℓ(x)`
    hx: usize,
    /// index of `H_{2m-ℓ}(β)`, also the power of `σ`
    hb: usize,
    coef: f64,
}

/// The polynomial factor `M_t^N / M_t` of one coordinate, as a list of
/// `(ℓ, 2m-ℓ, (-1)^{N+m} S(N,m) C(m,ℓ) 2^{-m})` terms.
#[derive(Clone, Debug)]
pub struct BracketTable {
    order: usize,
    terms: Vec<BracketTerm>,
}

impl BracketTable {
    pub fn new(order: usize) -> Self {
        let mut terms = Vec::new();
        for m in 0..=order {
            let s = stirling2(order, m);
            if s == 0u32.into() {
                continue;
            }
            let sign = if (order + m) % 2 == 0 { 1.0 } else { -1.0 };
            for l in 0..=m {
                let c = (&s * binomial(m, l)).to_f64().unwrap_or(f64::INFINITY);
                let coef = sign * c * 0.5f64.powi(m as i32);
                terms.push(BracketTerm { hx: l, hb: 2 * m - l, coef });
            }
        }
        Self { order, terms }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Needs `sigma_pows[k] = σ^k` for `k <= 2N`, `hx` up to degree `N`
    /// and `hb` up to `2N`.
    pub fn eval(&self, sigma_pows: &[f64], hx: &[f64], hb: &[f64]) -> f64 {
        self.terms.iter().map(|b| b.coef * sigma_pows[b.hb] * hx[b.hx] * hb[b.hb]).sum()
    }

    /// `∂_x` of the bracket, using `H_n' = 2n H_{n-1}` and `∂_x β = σ`.
    /// Needs `sigma_pows` up to `2N + 1`.
    pub fn eval_dx(&self, sigma_pows: &[f64], hx: &[f64], hb: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|b| {
                let mut v = 0.0;
                if b.hx > 0 {
                    v += 2.0 * b.hx as f64 * hx[b.hx - 1] * hb[b.hb] * sigma_pows[b.hb];
                }
                if b.hb > 0 {
                    v += hx[b.hx] * 2.0 * b.hb as f64 * hb[b.hb - 1] * sigma_pows[b.hb + 1];
                }
                b.coef * v
            })
            .sum()
    }
}

pub(crate) fn fill_hermite(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = 2.0 * x;
    }
    for k in 1..out.len().saturating_sub(1) {
        out[k + 1] = 2.0 * x * out[k] - 2.0 * k as f64 * out[k - 1];
    }
}

pub(crate) fn fill_powers(base: f64, out: &mut [f64]) {
    let mut p = 1.0;
    for v in out.iter_mut() {
        *v = p;
        p *= base;
    }
}

/// Compositions `|n| = N` of a fixed length with their multinomial weights.
#[derive(Clone, Debug)]
pub struct CompositionWeights {
    items: Vec<(Vec<usize>, f64)>,
}

impl CompositionWeights {
    pub fn new(order: usize, d: usize) -> Result<Self> {
        let items = compositions(order, d)?
            .map(|n| {
                let w = multinomial(order, &n).expect("composition sums to N").to_f64().unwrap_or(f64::INFINITY);
                (Vec::from(n), w)
            })
            .collect();
        Ok(Self { items })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.items.iter().map(|(n, w)| (n.as_slice(), *w))
    }

    /// `Σ_{|n|=N} N!/n! Π_i values[i][n_i]`.
    pub fn sum(&self, values: &[Vec<f64>]) -> f64 {
        self.iter()
            .map(|(n, w)| w * n.iter().zip(values).map(|(&ni, v)| v[ni]).product::<f64>())
            .sum()
    }

    /// As [`sum`](Self::sum), with coordinate `j` read from `replaced`.
    pub fn sum_replacing(&self, values: &[Vec<f64>], j: usize, replaced: &[f64]) -> f64 {
        self.iter()
            .map(|(n, w)| {
                w * n
                    .iter()
                    .zip(values)
                    .enumerate()
                    .map(|(i, (&ni, v))| if i == j { replaced[ni] } else { v[ni] })
                    .product::<f64>()
            })
            .sum()
    }
}

/// Brackets of every order `0..=N` at one coordinate, plus their
/// `x`-derivatives when asked for.
pub(crate) struct CoordinateBrackets {
    tables: Vec<BracketTable>,
    sigma_pows: Vec<f64>,
    hx: Vec<f64>,
    hb: Vec<f64>,
}

impl CoordinateBrackets {
    pub(crate) fn new(order: usize, ts: &TimeScale) -> Self {
        let mut sigma_pows = vec![0.0; 2 * order + 2];
        fill_powers(ts.sigma, &mut sigma_pows);
        Self {
            tables: (0..=order).map(BracketTable::new).collect(),
            sigma_pows,
            hx: vec![0.0; order + 1],
            hb: vec![0.0; 2 * order + 1],
        }
    }

    pub(crate) fn set_x(&mut self, x: f64) {
        fill_hermite(x, &mut self.hx);
    }

    pub(crate) fn set_beta(&mut self, beta: f64) {
        fill_hermite(beta, &mut self.hb);
    }

    pub(crate) fn value(&self, n: usize) -> f64 {
        self.tables[n].eval(&self.sigma_pows, &self.hx, &self.hb)
    }

    pub(crate) fn dx(&self, n: usize) -> f64 {
        self.tables[n].eval_dx(&self.sigma_pows, &self.hx, &self.hb)
    }
}

/// `M_t(x, y)`; always positive.
pub fn mehler(t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    log_mehler(t, x, y).map(f64::exp)
}

/// `ln M_t(x, y)`, finite far beyond the range where `M_t` itself is.
pub fn log_mehler(t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let q = KernelQuery::new(t, 0, x.to_vec(), y.to_vec())?;
    Ok(log_mehler_unchecked(&TimeScale::new(q.t), &q.x, &q.y))
}

fn log_mehler_unchecked(ts: &TimeScale, x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(&xi, &yi)| ts.log_mehler_1d(xi, yi)).sum()
}

/// The polynomial factor `M_t^N(x, y) / M_t(x, y)` in one dimension.
pub fn bracket_1d(t: f64, order: usize, x: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    let ts = TimeScale::new(t);
    let mut c = CoordinateBrackets::new(order, &ts);
    c.set_x(x);
    c.set_beta(ts.beta(x, y));
    Ok(c.value(order))
}

pub fn mtn_closed_1d(t: f64, order: usize, x: f64, y: f64) -> Result<f64> {
    Ok(mehler(t, &[x], &[y])? * bracket_1d(t, order, x, y)?)
}

fn brackets_all_orders(ts: &TimeScale, order: usize, x: &[f64], y: &[f64]) -> Vec<Vec<f64>> {
    let mut c = CoordinateBrackets::new(order, ts);
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            c.set_x(xi);
            c.set_beta(ts.beta(xi, yi));
            (0..=order).map(|n| c.value(n)).collect()
        })
        .collect()
}

/// `M_t^N(x, y)`: the `d`-dimensional Mehler factor times the
/// multinomial sum of per-coordinate brackets. For `N = 0` this is
/// exactly [`mehler`].
pub fn mtn_closed(q: &KernelQuery) -> f64 {
    let ts = TimeScale::new(q.t);
    let m = log_mehler_unchecked(&ts, &q.x, &q.y).exp();
    if q.order == 0 {
        return m;
    }
    let values = brackets_all_orders(&ts, q.order, &q.x, &q.y);
    let weights = CompositionWeights::new(q.order, q.dim()).expect("dimension is positive");
    m * weights.sum(&values)
}

/// `Σ_{|n|=N} N!/n! Π_i M_t^{n_i}(x_i, y_i)`, each factor carrying its own
/// one-dimensional Mehler factor. Agrees with [`mtn_closed`] up to rounding.
pub fn mtn_closed_product_form(q: &KernelQuery) -> f64 {
    let ts = TimeScale::new(q.t);
    let values: Vec<Vec<f64>> = brackets_all_orders(&ts, q.order, &q.x, &q.y)
        .into_iter()
        .zip(q.x.iter().zip(&q.y))
        .map(|(b, (&xi, &yi))| {
            let m = ts.log_mehler_1d(xi, yi).exp();
            b.into_iter().map(|v| m * v).collect()
        })
        .collect();
    CompositionWeights::new(q.order, q.dim()).expect("dimension is positive").sum(&values)
}

/// A real number stored as `sign · e^{ln_abs}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedLog {
    pub ln_abs: f64,
    pub sign: f64,
}

impl SignedLog {
    fn from_parts(log_scale: f64, factor: f64) -> Self {
        if factor == 0.0 {
            Self { ln_abs: f64::NEG_INFINITY, sign: 0.0 }
        } else {
            Self { ln_abs: log_scale + factor.abs().ln(), sign: factor.signum() }
        }
    }

    pub fn value(&self) -> f64 {
        self.sign * self.ln_abs.exp()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::Domain("alpha must be a finite number greater than 1".into()));
    }
    Ok(())
}

fn scaled_time(t: f64, alpha: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain("t must be positive".into()));
    }
    check_alpha(alpha)?;
    let s = t * t / alpha;
    check_time(s)?;
    Ok(s)
}

/// `K_{t²,N,α}(x, y) = t^{2N} M^N_{t²/α}(x, y)`, the kernel of
/// `(t² L)^N e^{(t²/α) L}`, in sign/log form.
pub fn log_kernel_k(t: f64, order: usize, alpha: f64, x: &[f64], y: &[f64]) -> Result<SignedLog> {
    let s = scaled_time(t, alpha)?;
    let q = KernelQuery::new(s, order, x.to_vec(), y.to_vec())?;
    let ts = TimeScale::new(s);
    let values = brackets_all_orders(&ts, order, x, y);
    let sum = CompositionWeights::new(order, q.dim())?.sum(&values);
    let log_scale = 2.0 * order as f64 * t.ln() + log_mehler_unchecked(&ts, x, y);
    Ok(SignedLog::from_parts(log_scale, sum))
}

pub fn kernel_k(t: f64, order: usize, alpha: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let s = scaled_time(t, alpha)?;
    let q = KernelQuery::new(s, order, x.to_vec(), y.to_vec())?;
    Ok(t.powi(2 * order as i32) * mtn_closed(&q))
}

/// `K̃_{t²,N,α,j} = t ∂_{x_j} K_{t²,N,α}` (coordinate `j` is 0-based), in
/// sign/log form. Uses `∂_x M_s = -2σβ M_s` on the `j`-th factor.
pub fn log_kernel_k_tilde(t: f64, order: usize, alpha: f64, j: usize, x: &[f64], y: &[f64]) -> Result<SignedLog> {
    let s = scaled_time(t, alpha)?;
    let q = KernelQuery::new(s, order, x.to_vec(), y.to_vec())?;
    if j >= q.dim() {
        return Err(Error::Domain(format!("coordinate index {j} out of range for dimension {}", q.dim())));
    }
    let ts = TimeScale::new(s);
    let mut c = CoordinateBrackets::new(order, &ts);
    let mut values = Vec::with_capacity(q.dim());
    let mut derivs = Vec::new();
    for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
        let beta = ts.beta(xi, yi);
        c.set_x(xi);
        c.set_beta(beta);
        let v: Vec<f64> = (0..=order).map(|n| c.value(n)).collect();
        if i == j {
            derivs = (0..=order).map(|n| c.dx(n) - 2.0 * ts.sigma * beta * v[n]).collect();
        }
        values.push(v);
    }
    let sum = CompositionWeights::new(order, q.dim())?.sum_replacing(&values, j, &derivs);
    let log_scale = (2 * order + 1) as f64 * t.ln() + log_mehler_unchecked(&ts, x, y);
    Ok(SignedLog::from_parts(log_scale, sum))
}

pub fn kernel_k_tilde(t: f64, order: usize, alpha: f64, j: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    log_kernel_k_tilde(t, order, alpha, j, x, y).map(|v| v.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn q(t: f64, n: usize, x: &[f64], y: &[f64]) -> KernelQuery {
        KernelQuery::new(t, n, x.to_vec(), y.to_vec()).unwrap()
    }

    #[test]
    fn query_validation() {
        assert_eq!(
            KernelQuery::new(0.0, 0, vec![0.0], vec![0.0]).unwrap_err(),
            Error::Domain("t must be positive".into())
        );
        assert!(KernelQuery::new(-1.0, 0, vec![0.0], vec![0.0]).is_err());
        assert!(KernelQuery::new(f64::NAN, 0, vec![0.0], vec![0.0]).is_err());
        assert!(KernelQuery::new(1e-7, 0, vec![0.0], vec![0.0]).is_err());
        assert!(KernelQuery::new(1.0, 0, vec![], vec![]).is_err());
        assert_eq!(
            KernelQuery::new(1.0, 0, vec![0.0, 1.0], vec![0.0]).unwrap_err(),
            Error::DimensionMismatch { expected: 2, got: 1 }
        );
    }

    #[test]
    fn mehler_at_origin() {
        let want = (1.0 - (-2f64).exp()).powf(-0.5);
        assert!(rel(mehler(1.0, &[0.0], &[0.0]).unwrap(), want) < 1e-15);
    }

    #[test]
    fn mehler_direct_formula() {
        let (t, x, y) = (0.5, [1.0, 0.0], [0.0, 1.0]);
        let e = (-t as f64).exp();
        let a2 = 1.0 - e * e;
        let dist2: f64 = x.iter().zip(&y).map(|(xi, yi)| (e * xi - yi).powi(2)).sum();
        let ny2: f64 = y.iter().map(|v| v * v).sum();
        let want = a2.powf(-1.0) * (-dist2 / a2).exp() * ny2.exp();
        assert!(rel(mehler(t, &x, &y).unwrap(), want) < 1e-14);
    }

    #[test]
    fn first_order_at_origin() {
        for t in [0.1, 1.0, 2.5] {
            let a2 = -(-2.0 * t as f64).exp_m1();
            let want = -(-2.0 * t as f64).exp() * a2.powf(-1.5);
            assert!(rel(mtn_closed_1d(t, 1, 0.0, 0.0).unwrap(), want) < 1e-14);
        }
    }

    // ∂_t M_t / M_t written out by hand in one dimension.
    #[test]
    fn first_order_matches_hand_derivative() {
        for &(t, x, y) in &[(0.3, 1.2, -0.7), (1.0, -2.0, 0.5), (2.0, 0.4, 3.0)] {
            let ts = TimeScale::new(t);
            let b = ts.beta(x, y);
            let e = ts.decay;
            let a = ts.width;
            let want = -e * e / (a * a) + 2.0 * b * x * e / a + 2.0 * b * b * e * e / (a * a);
            assert!(rel(bracket_1d(t, 1, x, y).unwrap(), want) < 1e-13, "{t} {x} {y}");
        }
    }

    // The printed alternatives (σ < 0, or H_ℓ at y) disagree at N = 1.
    #[test]
    fn sign_alternatives_fail_at_first_order() {
        let (t, x, y) = (0.7, 1.1, -0.4);
        let ts = TimeScale::new(t);
        let b = ts.beta(x, y);
        let good = bracket_1d(t, 1, x, y).unwrap();
        let s = ts.sigma;
        // m = 1: ℓ = 0 and ℓ = 1 terms with σ replaced by -σ
        let neg_sigma = 0.5 * (s * s * crate::hermite::hermite(2, b) - s * 2.0 * x * 2.0 * b);
        let y_arg = 0.5 * (s * s * crate::hermite::hermite(2, b) + s * 2.0 * y * 2.0 * b);
        assert!(rel(neg_sigma, good) > 0.1);
        assert!(rel(y_arg, good) > 0.1);
    }

    #[test]
    fn zeroth_order_is_mehler_bit_for_bit() {
        for &(t, x, y) in &[(0.1, [1.0, -3.0], [2.0, 0.5]), (2.0, [0.0, 0.0], [0.0, 0.0])] {
            assert_eq!(mtn_closed(&q(t, 0, &x, &y)), mehler(t, &x, &y).unwrap());
        }
        assert_eq!(bracket_1d(0.4, 0, 1.0, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn one_dimension_is_the_single_composition() {
        for n in 0..=4 {
            let a = mtn_closed(&q(0.7, n, &[1.1], &[-0.4]));
            let b = mtn_closed_1d(0.7, n, 1.1, -0.4).unwrap();
            assert!(rel(a, b) < 1e-15);
        }
    }

    #[test]
    fn bracket_derivative_matches_difference_quotient() {
        let ts = TimeScale::new(0.45);
        let (x, y) = (0.8, -1.3);
        for n in 0..=4 {
            let f = |xx: f64| {
                let mut c = CoordinateBrackets::new(n, &ts);
                c.set_x(xx);
                c.set_beta(ts.beta(xx, y));
                c.value(n)
            };
            let mut c = CoordinateBrackets::new(n, &ts);
            c.set_x(x);
            c.set_beta(ts.beta(x, y));
            let fd = crate::hermite::richardson(&f, x, 1, 1e-3, 3);
            let an = c.dx(n);
            assert!((fd - an).abs() <= 1e-8 * an.abs().max(1.0), "n={n}: {fd} vs {an}");
        }
    }

    #[test]
    fn kernel_k_examples() {
        let s = 0.5;
        let a2 = -(-2.0 * s as f64).exp_m1();
        let d_origin = -(-2.0 * s as f64).exp() * a2.powf(-1.5);
        assert!(rel(kernel_k(1.0, 1, 2.0, &[0.0], &[0.0]).unwrap(), d_origin) < 1e-14);
        let m = mehler(0.36 / 4.0, &[0.3, -1.0], &[1.0, 0.2]).unwrap();
        assert!(rel(kernel_k(0.6, 0, 4.0, &[0.3, -1.0], &[1.0, 0.2]).unwrap(), m) < 1e-15);
        assert!(kernel_k(1.0, 1, 1.0, &[0.0], &[0.0]).is_err());
        assert!(kernel_k(0.0, 1, 2.0, &[0.0], &[0.0]).is_err());
        let l = log_kernel_k(0.6, 2, 4.0, &[0.3, -1.0], &[1.0, 0.2]).unwrap();
        let v = kernel_k(0.6, 2, 4.0, &[0.3, -1.0], &[1.0, 0.2]).unwrap();
        assert!(rel(l.value(), v) < 1e-13);
    }

    #[test]
    fn kernel_k_tilde_vanishes_at_origin_for_order_zero() {
        assert_eq!(kernel_k_tilde(1.0, 0, 2.0, 0, &[0.0], &[0.0]).unwrap(), 0.0);
        assert!(kernel_k_tilde(1.0, 0, 2.0, 1, &[0.0], &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn assemblies_agree(
            t in 0.1f64..2.0,
            n in 0usize..=4,
            pts in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..=3),
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let query = q(t, n, &x, &y);
            let a = mtn_closed(&query);
            let b = mtn_closed_product_form(&query);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()) + f64::MIN_POSITIVE);
        }

        #[test]
        fn mehler_positive(
            t in 1e-3f64..10.0,
            pts in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..=3),
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            prop_assert!(mehler(t, &x, &y).unwrap() > 0.0);
        }
    }
}
