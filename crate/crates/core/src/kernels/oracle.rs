//! Two reference evaluations of `M_t^N` that share no code with the closed
//! form.
//!
//! * [`SpectralOracle`] sums the eigenfunction expansion
//!   `Σ_α (-|α|)^N e^{-t|α|} h_α(x) h_α(y)` in multiprecision. In one
//!   coordinate the terms reach `e^{(x²+y²)/2}` in size while the sum can
//!   be as small as `1e-50`, so double precision is useless here. Each
//!   coordinate series is truncated by an explicit tail bound and summed at
//!   a working precision chosen from its observed cancellation. The
//!   `d`-dimensional sum is assembled through `|α|^N = Σ_{|n|=N} N!/n! Π
//!   α_i^{n_i}`, which turns it into products of coordinate series.
//! * [`DifferenceOracle`] differentiates the Mehler kernel `N` times in `t`
//!   with central differences and Richardson extrapolation, evaluating the
//!   kernel at 320 bits so the tiny default step costs nothing in rounding.
//!
//! [`mtn_spectral_simplex`] is a plain double-precision sum over the
//! simplex `|α| <= trunc`. It cross-checks the factorised assembly on
//! well-conditioned points.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use dashu_float::ops::SquareRoot;
use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;

use num_bigint::BigUint;

use super::{check_time, KernelQuery};
use crate::combinatorics::{compositions, multinomial};
use crate::error::{check_dim, Error, Result};
use crate::hermite::{hermite_normalized_all, CENTRAL_WEIGHTS};

type F = FBig<HalfEven, 2>;

/// Numerical controls of the oracles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleControls {
    /// Fixed truncation of each coordinate series (`m <= trunc`). `None`
    /// picks it from the tail bound.
    pub trunc: Option<usize>,
    pub fd_step: f64,
    pub fd_richardson_levels: usize,
}

impl Default for OracleControls {
    fn default() -> Self {
        Self { trunc: None, fd_step: 1e-6, fd_richardson_levels: 3 }
    }
}

impl OracleControls {
    pub fn with_trunc(trunc: usize) -> Self {
        Self { trunc: Some(trunc), ..Self::default() }
    }

    pub fn validate(&self, order: usize) -> Result<()> {
        if let Some(k) = self.trunc {
            if k < order + 5 {
                return Err(Error::Domain(format!("trunc must be at least N + 5 = {}", order + 5)));
            }
        }
        if !(self.fd_step > 0.0) || !self.fd_step.is_finite() {
            return Err(Error::Domain("fd_step must be positive".into()));
        }
        if !(1..=8).contains(&self.fd_richardson_levels) {
            return Err(Error::Domain("fd_richardson_levels must be between 1 and 8".into()));
        }
        Ok(())
    }
}

fn big(v: f64, prec: usize) -> F {
    F::try_from(v).expect("finite input").with_precision(prec).value()
}

fn int(v: usize, prec: usize) -> F {
    F::from(v as u64).with_precision(prec).value()
}

/// Exact conversion; precision stays unlimited.
fn from_biguint(v: &BigUint) -> F {
    v.to_u32_digits().iter().rev().fold(F::ZERO, |acc, &d| acc * F::from(1u64 << 32) + F::from(d))
}

/// Upper estimate of `log2 |v|`; `-inf` for zero.
fn log2_abs(v: &F) -> f64 {
    let r = v.repr();
    if r.is_zero() {
        f64::NEG_INFINITY
    } else {
        (r.exponent() + r.digits() as isize) as f64
    }
}

// Cramér's inequality: |h_n(x)| <= CRAMER e^{x²/2}.
const CRAMER: f64 = 1.086_435;

/// `log2` of an upper bound on `Σ_{m>k} m^n |e^{-tm} h_m(x) h_m(y)|`.
fn log2_tail(t: f64, n: usize, k: usize, x: f64, y: f64) -> f64 {
    let k1 = (k + 1) as f64;
    let ln_rho = n as f64 * ((k1 + 1.0) / k1).ln() - t;
    if ln_rho >= 0.0 {
        return f64::INFINITY;
    }
    let ln_b = 2.0 * CRAMER.ln() + 0.5 * (x * x + y * y);
    let ln_tail = ln_b + n as f64 * k1.ln() - t * k1 - (-ln_rho.exp_m1()).ln();
    ln_tail / std::f64::consts::LN_2
}

fn truncation_for(t: f64, n: usize, x: f64, y: f64, log2_target: f64) -> usize {
    let ok = |k: usize| log2_tail(t, n, k, x, y) <= log2_target;
    let mut hi = 8usize;
    while !ok(hi) {
        hi *= 2;
        if hi > 1 << 24 {
            return hi;
        }
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

const MAX_TERMS: usize = 1 << 20;
const MAX_PRECISION: usize = 1 << 15;

/// The series `S^{(n)} = Σ_{m<=k} (-m)^n e^{-tm} h_m(x) h_m(y)` for
/// `n = 0..=n_max`, with the largest term magnitude of each.
fn coordinate_pass(t: f64, x: f64, y: f64, n_max: usize, k: usize, prec: usize) -> (Vec<F>, Vec<f64>) {
    let decay = (-big(t, prec)).exp();
    let (bx, by) = (big(x, prec), big(y, prec));
    let two = int(2, prec);
    let (bx2, by2) = (&two * &bx, &two * &by);
    let zero = F::ZERO.with_precision(prec).value();
    let one = F::ONE.with_precision(prec).value();
    // H_m grow like sqrt(2^m m!); the weight e^{-tm}/(2^m m!) is carried
    // separately so nothing is ever square-rooted.
    let (mut hx_prev, mut hx) = (zero.clone(), one.clone());
    let (mut hy_prev, mut hy) = (zero.clone(), one.clone());
    let mut weight = one;
    let mut sums = vec![zero; n_max + 1];
    let mut peaks = vec![f64::NEG_INFINITY; n_max + 1];
    for m in 0..=k {
        let mut term = &weight * &hx * &hy;
        for (n, (s, p)) in sums.iter_mut().zip(peaks.iter_mut()).enumerate() {
            if n > 0 {
                term = -(term * int(m, prec));
            }
            *p = p.max(log2_abs(&term));
            *s += &term;
        }
        let m2 = int(2 * m, prec);
        let hx_next = &bx2 * &hx - &m2 * &hx_prev;
        let hy_next = &by2 * &hy - &m2 * &hy_prev;
        hx_prev = std::mem::replace(&mut hx, hx_next);
        hy_prev = std::mem::replace(&mut hy, hy_next);
        weight = &weight * &decay / int(2 * (m + 1), prec);
    }
    (sums, peaks)
}

#[derive(Clone, Debug)]
struct CoordinateSeries {
    values: Vec<F>,
    /// relative accuracy, in bits, guaranteed for every entry
    bits: usize,
}

fn coordinate_series(t: f64, x: f64, y: f64, n_max: usize, bits: usize, trunc: Option<usize>) -> Result<CoordinateSeries> {
    let guard = 16;
    let mut prec = bits + 64;
    let mut k = match trunc {
        Some(k) => k,
        None => (0..=n_max)
            .map(|n| truncation_for(t, n, x, y, -((bits + guard) as f64)))
            .max()
            .unwrap_or(8),
    };
    loop {
        if k > MAX_TERMS || prec > MAX_PRECISION {
            return Err(Error::NonConvergence(format!(
                "spectral series at t={t}, x={x}, y={y} needs more than {MAX_TERMS} terms or {MAX_PRECISION} bits"
            )));
        }
        let (values, peaks) = coordinate_pass(t, x, y, n_max, k, prec);
        let mut need_prec = prec;
        let mut need_k = k;
        for (n, (v, peak)) in values.iter().zip(&peaks).enumerate() {
            let lv = log2_abs(v);
            if !lv.is_finite() {
                // all terms zero
                if *peak == f64::NEG_INFINITY {
                    continue;
                }
                need_prec = need_prec.max(prec * 2);
                continue;
            }
            let cancellation = (peak - lv).max(0.0);
            let rounding = bits as f64 + guard as f64 + cancellation + 2.0 * ((k + 1) as f64).log2();
            need_prec = need_prec.max(rounding.ceil() as usize);
            if trunc.is_none() {
                let target = lv - (bits + guard) as f64;
                if log2_tail(t, n, k, x, y) > target {
                    need_k = need_k.max(truncation_for(t, n, x, y, target));
                }
            }
        }
        if need_prec <= prec && need_k <= k {
            return Ok(CoordinateSeries { values, bits });
        }
        prec = need_prec.max(prec);
        k = need_k;
    }
}

type SeriesKey = (u64, u64, u64);

/// Multiprecision eigenfunction-expansion oracle with a per-coordinate
/// cache. Safe to share between threads.
#[derive(Debug, Default)]
pub struct SpectralOracle {
    controls: OracleControls,
    cache: Mutex<HashMap<SeriesKey, Arc<CoordinateSeries>>>,
}

impl SpectralOracle {
    pub fn new(controls: OracleControls) -> Self {
        Self { controls, cache: Mutex::new(HashMap::new()) }
    }

    pub fn controls(&self) -> &OracleControls {
        &self.controls
    }

    fn series(&self, t: f64, x: f64, y: f64, n_max: usize, bits: usize) -> Result<Arc<CoordinateSeries>> {
        let key = (t.to_bits(), x.to_bits(), y.to_bits());
        if let Some(s) = self.cache.lock().expect("cache lock").get(&key) {
            if s.values.len() > n_max && s.bits >= bits {
                return Ok(s.clone());
            }
        }
        // the whole n-range is almost free once the series is summed
        let n_max = n_max.max(4);
        let s = Arc::new(coordinate_series(t, x, y, n_max, bits, self.controls.trunc)?);
        self.cache.lock().expect("cache lock").insert(key, s.clone());
        Ok(s)
    }

    fn assemble(&self, q: &KernelQuery, bits: usize) -> Result<(F, f64)> {
        let n = q.order();
        let series: Vec<Arc<CoordinateSeries>> = q
            .x()
            .iter()
            .zip(q.y())
            .map(|(&xi, &yi)| self.series(q.t(), xi, yi, n, bits))
            .collect::<Result<_>>()?;
        let mut total = F::ZERO;
        let mut peak = f64::NEG_INFINITY;
        for parts in compositions(n, q.dim())? {
            let w = from_biguint(&multinomial(n, &parts)?);
            let term = parts
                .components()
                .iter()
                .zip(&series)
                .fold(w, |acc, (&ni, s)| acc * &s.values[ni]);
            peak = peak.max(log2_abs(&term));
            total += term;
        }
        Ok((total, peak))
    }

    /// `M_t^N(x, y)` from the eigenfunction expansion.
    pub fn mtn(&self, q: &KernelQuery) -> Result<f64> {
        self.controls.validate(q.order())?;
        let target = 60usize;
        let mut bits = 96usize;
        loop {
            let (total, peak) = self.assemble(q, bits)?;
            let lv = log2_abs(&total);
            let cancellation = if lv.is_finite() { (peak - lv).max(0.0) } else { f64::INFINITY };
            let slack = bits as f64 - cancellation - (q.dim() as f64).log2() - 8.0;
            if slack >= target as f64 {
                return Ok(total.to_f64().value());
            }
            if bits > MAX_PRECISION {
                return Err(Error::NonConvergence(format!(
                    "spectral assembly at t={} cancels beyond {MAX_PRECISION} bits",
                    q.t()
                )));
            }
            bits = if cancellation.is_finite() { bits + cancellation.ceil() as usize + 16 } else { bits * 2 };
        }
    }

    /// `M_t(x, y)` from the eigenfunction expansion.
    pub fn mehler(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        self.mtn(&KernelQuery::new(t, 0, x.to_vec(), y.to_vec())?)
    }
}

/// `M_t(x, y) = Σ_α e^{-t|α|} h_α(x) h_α(y)`.
pub fn mehler_spectral(t: f64, x: &[f64], y: &[f64], c: &OracleControls) -> Result<f64> {
    SpectralOracle::new(*c).mehler(t, x, y)
}

/// `M_t^N(x, y) = Σ_α (-|α|)^N e^{-t|α|} h_α(x) h_α(y)`.
pub fn mtn_spectral(q: &KernelQuery, c: &OracleControls) -> Result<f64> {
    SpectralOracle::new(*c).mtn(q)
}

/// Literal double-precision sum over `|α| <= trunc`, grouped by `|α|`.
/// Only trustworthy where the terms do not cancel, i.e. moderate
/// coordinates and `t` not small.
pub fn mtn_spectral_simplex(q: &KernelQuery, trunc: usize) -> f64 {
    // by_total[k] = Σ_{|α|=k} Π_i h_{α_i}(x_i) h_{α_i}(y_i)
    let mut by_total = vec![0.0; trunc + 1];
    by_total[0] = 1.0;
    for (&xi, &yi) in q.x().iter().zip(q.y()) {
        let hx = hermite_normalized_all(trunc, xi);
        let hy = hermite_normalized_all(trunc, yi);
        let g: Vec<f64> = hx.iter().zip(&hy).map(|(a, b)| a * b).collect();
        let mut next = vec![0.0; trunc + 1];
        for (k, bk) in by_total.iter().enumerate() {
            for (m, gm) in g.iter().enumerate().take(trunc + 1 - k) {
                next[k + m] += bk * gm;
            }
        }
        by_total = next;
    }
    by_total
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let kf = k as f64;
            (-kf).powi(q.order() as i32) * (-q.t() * kf).exp() * p
        })
        .sum()
}

type StencilKey = (u64, u64, i32, u64, u64);

/// Central differences in `t` of the Mehler kernel evaluated at 320 bits,
/// Richardson-extrapolated over the steps `h, h/2, …`.
#[derive(Debug)]
pub struct DifferenceOracle {
    controls: OracleControls,
    precision: usize,
    cache: Mutex<HashMap<StencilKey, F>>,
}

impl Default for DifferenceOracle {
    fn default() -> Self {
        Self::new(OracleControls::default())
    }
}

impl DifferenceOracle {
    pub fn new(controls: OracleControls) -> Self {
        Self { controls, precision: 320, cache: Mutex::new(HashMap::new()) }
    }

    pub fn controls(&self) -> &OracleControls {
        &self.controls
    }

    fn mehler_1d(&self, t: f64, h: f64, k: i32, x: f64, y: f64) -> F {
        let key = (t.to_bits(), h.to_bits(), k, x.to_bits(), y.to_bits());
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return v.clone();
        }
        let p = self.precision;
        let tt = big(t, p) + big(h, p) * F::from(k);
        let decay = (-tt).exp();
        let var = F::ONE.with_precision(p).value() - &decay * &decay;
        let (bx, by) = (big(x, p), big(y, p));
        let diff = &decay * &bx - &by;
        let v = (&by * &by - &diff * &diff / &var).exp() / var.sqrt();
        self.cache.lock().expect("cache lock").insert(key, v.clone());
        v
    }

    fn difference(&self, q: &KernelQuery, h: f64) -> F {
        let w = CENTRAL_WEIGHTS[q.order()];
        let half = (w.len() / 2) as i32;
        let mut acc = F::ZERO.with_precision(self.precision).value();
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            let k = i as i32 - half;
            let m = q
                .x()
                .iter()
                .zip(q.y())
                .fold(F::ONE.with_precision(self.precision).value(), |acc, (&xi, &yi)| {
                    acc * self.mehler_1d(q.t(), h, k, xi, yi)
                });
            acc += big(wi, self.precision) * m;
        }
        let hn = (0..q.order()).fold(F::ONE.with_precision(self.precision).value(), |acc, _| {
            acc * big(h, self.precision)
        });
        acc / hn
    }

    /// `∂_t^N M_t(x, y)` for `N <= 4`; needs `t > N · fd_step`.
    pub fn mtn(&self, q: &KernelQuery) -> Result<f64> {
        let c = &self.controls;
        c.validate(q.order())?;
        if q.order() > 4 {
            return Err(Error::Domain("finite-difference oracle supports N <= 4".into()));
        }
        if q.order() > 0 && q.t() <= q.order() as f64 * c.fd_step {
            return Err(Error::Domain("finite-difference stencil leaves t > 0".into()));
        }
        let mut row: Vec<F> =
            (0..c.fd_richardson_levels).map(|l| self.difference(q, c.fd_step / (1u64 << l) as f64)).collect();
        if q.order() > 0 {
            for j in 1..c.fd_richardson_levels {
                let f4 = int(1usize << (2 * j), self.precision);
                let den = &f4 - F::ONE;
                row = row.windows(2).map(|p| (&f4 * &p[1] - &p[0]) / &den).collect();
            }
        }
        Ok(row[0].to_f64().value())
    }
}

/// The N-th central difference in `t` of the Mehler kernel.
pub fn mtn_finite_difference(q: &KernelQuery, c: &OracleControls) -> Result<f64> {
    DifferenceOracle::new(*c).mtn(q)
}

/// `t ∂_{x_j} K` by Richardson-extrapolated central differences of
/// [`kernel_k`](super::kernel_k) in `x_j` (0-based `j`).
pub fn kernel_k_tilde_fd(
    t: f64,
    order: usize,
    alpha: f64,
    j: usize,
    x: &[f64],
    y: &[f64],
    h: f64,
) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    if j >= x.len() {
        return Err(Error::Domain(format!("coordinate index {j} out of range for dimension {}", x.len())));
    }
    if !(t > 0.0) {
        return Err(Error::Domain("t must be positive".into()));
    }
    check_time(t * t / alpha.max(1.0))?;
    super::kernel_k(t, order, alpha, x, y)?;
    let f = |xj: f64| {
        let mut xs = x.to_vec();
        xs[j] = xj;
        super::kernel_k(t, order, alpha, &xs, y).unwrap_or(f64::NAN)
    };
    Ok(t * crate::hermite::richardson(&f, x[j], 1, h, 3))
}

#[cfg(test)]
mod tests {
    use super::super::{mtn_closed, mtn_closed_1d};
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn q(t: f64, n: usize, x: &[f64], y: &[f64]) -> KernelQuery {
        KernelQuery::new(t, n, x.to_vec(), y.to_vec()).unwrap()
    }

    fn d_origin(t: f64) -> f64 {
        -(-2.0 * t).exp() * (-(-2.0 * t).exp_m1()).powf(-1.5)
    }

    #[test]
    fn controls_validation() {
        assert!(OracleControls::with_trunc(5).validate(1).is_err());
        assert!(OracleControls::with_trunc(6).validate(1).is_ok());
        assert!(OracleControls { fd_step: 0.0, ..Default::default() }.validate(0).is_err());
    }

    #[test]
    fn spectral_mehler_examples() {
        let c = OracleControls::default();
        let m = mehler_spectral(0.5, &[1.0, 0.0], &[0.0, 1.0], &c).unwrap();
        let want = crate::kernels::mehler(0.5, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(rel(m, want) < 1e-14);
        let m = mehler_spectral(3.0, &[2.0], &[-1.0], &c).unwrap();
        assert!(rel(m, crate::kernels::mehler(3.0, &[2.0], &[-1.0]).unwrap()) < 1e-14);
        let far = mehler_spectral(40.0, &[0.0], &[0.0], &c).unwrap();
        assert!((far - 1.0).abs() < 1e-15);
        let fixed = mehler_spectral(1.0, &[1.0], &[1.0], &OracleControls::with_trunc(200)).unwrap();
        assert!(rel(fixed, crate::kernels::mehler(1.0, &[1.0], &[1.0]).unwrap()) < 1e-14);
    }

    #[test]
    fn spectral_first_order_at_origin() {
        let v = mtn_spectral(&q(1.0, 1, &[0.0], &[0.0]), &OracleControls::with_trunc(200)).unwrap();
        assert!(rel(v, d_origin(1.0)) < 1e-14);
    }

    #[test]
    fn spectral_handles_heavy_cancellation() {
        // the value is about 1e-49 while single terms reach 1e3
        let v = mtn_spectral(&q(0.1, 2, &[-3.0], &[2.0]), &OracleControls::default()).unwrap();
        let want = mtn_closed_1d(0.1, 2, -3.0, 2.0).unwrap();
        assert!(want.abs() < 1e-40);
        assert!(rel(v, want) < 1e-12);
    }

    #[test]
    fn cache_is_reused_across_orders() {
        let o = SpectralOracle::new(OracleControls::default());
        for n in 0..=4 {
            let qq = q(0.8, n, &[1.0, 0.0], &[0.0, 1.0]);
            assert!(rel(o.mtn(&qq).unwrap(), mtn_closed(&qq)) < 1e-12);
        }
        assert_eq!(o.cache.lock().unwrap().len(), 2);
    }

    #[test]
    fn difference_oracle_examples() {
        let c = OracleControls::default();
        let v = mtn_finite_difference(&q(1.0, 1, &[0.0], &[0.0]), &c).unwrap();
        assert!(rel(v, d_origin(1.0)) < 1e-7);
        let v0 = mtn_finite_difference(&q(0.7, 0, &[1.0], &[0.5]), &c).unwrap();
        assert!(rel(v0, crate::kernels::mehler(0.7, &[1.0], &[0.5]).unwrap()) < 1e-15);
        let s = mtn_spectral(&q(1.5, 3, &[1.0], &[-0.5]), &c).unwrap();
        let f = mtn_finite_difference(&q(1.5, 3, &[1.0], &[-0.5]), &c).unwrap();
        assert!(rel(f, s) < 1e-5);
        let s = mtn_spectral(&q(0.8, 2, &[1.0, 0.0], &[0.0, 1.0]), &OracleControls::with_trunc(150)).unwrap();
        let f = mtn_finite_difference(&q(0.8, 2, &[1.0, 0.0], &[0.0, 1.0]), &c).unwrap();
        assert!(rel(f, s) < 1e-6);
    }

    #[test]
    fn difference_oracle_preconditions() {
        let c = OracleControls { fd_step: 0.1, ..Default::default() };
        assert!(mtn_finite_difference(&q(0.2, 2, &[0.0], &[0.0]), &c).is_err());
        assert!(mtn_finite_difference(&q(1.0, 5, &[0.0], &[0.0]), &OracleControls::default()).is_err());
    }

    #[test]
    fn simplex_sum_matches_factorised_assembly() {
        for &(t, n, x, y) in &[
            (1.0, 2, [0.5, -0.5, 0.3], [1.0, 1.0, -0.2]),
            (0.7, 3, [0.2, 0.0, -0.4], [0.1, 0.6, 0.0]),
        ] {
            let qq = q(t, n, &x, &y);
            let a = mtn_spectral_simplex(&qq, 160);
            let b = mtn_spectral(&qq, &OracleControls::default()).unwrap();
            assert!(rel(a, b) < 1e-10, "{a} vs {b}");
        }
        let qq = q(0.3, 0, &[0.5, -0.5], &[1.0, 1.0]);
        let a = mtn_spectral_simplex(&qq, 120);
        assert!(rel(a, crate::kernels::mehler(0.3, &[0.5, -0.5], &[1.0, 1.0]).unwrap()) < 1e-9);
    }

    #[test]
    fn tilde_difference_matches_closed_form() {
        let a = crate::kernels::kernel_k_tilde(0.8, 1, 3.0, 0, &[1.0], &[0.5]).unwrap();
        let f = kernel_k_tilde_fd(0.8, 1, 3.0, 0, &[1.0], &[0.5], 1e-4).unwrap();
        assert!(rel(f, a) < 1e-6);
        let a = crate::kernels::kernel_k_tilde(0.9, 2, 2.5, 1, &[0.3, -0.8], &[1.1, 0.4]).unwrap();
        let f = kernel_k_tilde_fd(0.9, 2, 2.5, 1, &[0.3, -0.8], &[1.1, 0.4], 1e-4).unwrap();
        assert!(rel(f, a) < 1e-6);
    }
}
