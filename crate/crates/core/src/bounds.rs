//! Numerical checks of the Gaussian kernel bounds used for the scaled
//! kernels
//!
//! ```text
//! K_{t²,N,α}(x, y)     = t^{2N} M^N_{t²/α}(x, y)
//! K̃_{t²,N,α,j}(x, y)  = t ∂_{x_j} K_{t²,N,α}(x, y)
//! ```
//!
//! * [`comparison_slacks`]: the two elementary inequalities comparing the
//!   Mehler exponent at time `t/α` with the one at time `t`.
//! * [`kernel_bound_sweep`]: the ratio
//!   `|K| / (α e^{αC²/2} M_{t²}(x, y) exp(-α/(8e^{2T}) |e^{-t²}x - y|² / (1 - e^{-2t²})))`
//!   over a grid with `t|x| <= C`, evaluated in log space. The bound holds
//!   up to a constant depending on `T` and `N` only; the sweep exhibits
//!   that constant.
//! * [`calderon_constant`]: the constant `C = 1/I` of the reproducing
//!   formula, with `I = ∫_0^∞ (t²n)^{N+1} e^{-t²n/α} dt/t = α^{N+1} N!/2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::factorial;
use crate::error::{Error, Result};
use crate::kernels::{CompositionWeights, CoordinateBrackets, TimeScale};
use num_traits::ToPrimitive;

/// Gaps of the two comparison inequalities, each divided by the size of
/// the quantities compared so they read as relative slacks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSlacks {
    /// `|e^{-t/α}x - y|² / (1 - e^{-2t/α})` minus
    /// `(α/2) e^{-2t} |e^{-t}x - y|² / (1 - e^{-2t}) - t² min(|x|², |y|²) / (1 - e^{-2t/α})`,
    /// over `max(1, |lhs|, |rhs|)`.
    pub distance: f64,
    /// Smaller gap in `α e^{-2t} <= (1 - e^{-2t}) / (1 - e^{-2t/α}) <= α`,
    /// over `max(1, α)`.
    pub ratio: f64,
}

impl ComparisonSlacks {
    pub fn min(&self) -> f64 {
        self.distance.min(self.ratio)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::Domain("alpha must be a finite number greater than 1".into()));
    }
    Ok(())
}

pub fn comparison_slacks(alpha: f64, t: f64, x: &[f64], y: &[f64]) -> Result<ComparisonSlacks> {
    check_alpha(alpha)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain("t must be positive".into()));
    }
    crate::error::check_dim(x.len(), y.len())?;
    let norm2 = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>();
    let dist2 = |s: f64| x.iter().zip(y).map(|(xi, yi)| (s * xi - yi).powi(2)).sum::<f64>();
    let var_a = -(-2.0 * t / alpha).exp_m1();
    let var_1 = -(-2.0 * t).exp_m1();
    let lhs = dist2((-t / alpha).exp()) / var_a;
    let rhs = 0.5 * alpha * (-2.0 * t).exp() * dist2((-t).exp()) / var_1 - t * t * norm2(x).min(norm2(y)) / var_a;
    let distance = (lhs - rhs) / lhs.abs().max(rhs.abs()).max(1.0);
    let q = var_1 / var_a;
    let ratio = (q - alpha * (-2.0 * t).exp()).min(alpha - q) / alpha;
    Ok(ComparisonSlacks { distance, ratio })
}

/// `steps` equally spaced points from `min` to `max` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, steps: usize) -> Self {
        Self { min, max, steps }
    }

    pub fn point(&self, i: usize) -> f64 {
        if self.steps == 1 {
            self.min
        } else {
            self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.steps).map(|i| self.point(i)).collect()
    }

    /// Halves the spacing, keeping every old point.
    pub fn refined(&self) -> Self {
        Self { steps: 2 * self.steps.max(1) - 1, ..*self }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::EmptyGrid);
        }
        if !self.min.is_finite() || !self.max.is_finite() || self.min > self.max {
            return Err(Error::Domain(format!("{name} range must be finite with min <= max")));
        }
        Ok(())
    }
}

/// Parameters of a kernel-bound sweep. The `x` and `y` axes are used for
/// every coordinate, so `d > 1` sweeps the tensor grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSweepSpec {
    #[serde(rename = "N")]
    pub order: usize,
    pub alpha: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "T")]
    pub time_cap: f64,
    pub dim: usize,
    pub t_grid: GridAxis,
    pub x_grid: GridAxis,
    pub y_grid: GridAxis,
    /// coordinate differentiated in `K̃` (0-based); `None` for `K`
    pub j: Option<usize>,
    /// ratios above this count as violations
    pub ratio_cap: f64,
}

impl BoundSweepSpec {
    /// One-dimensional sweep over `t ∈ [0.05, 0.95]`, `x, y ∈ [-3, 3]`.
    pub fn new(order: usize, alpha: f64, c: f64, time_cap: f64) -> Self {
        Self {
            order,
            alpha,
            c,
            time_cap,
            dim: 1,
            t_grid: GridAxis::new(0.05, 0.95, 73),
            x_grid: GridAxis::new(-3.0, 3.0, 241),
            y_grid: GridAxis::new(-3.0, 3.0, 241),
            j: None,
            ratio_cap: 1.0,
        }
    }

    /// Every axis refined twofold.
    pub fn refined(&self) -> Self {
        Self {
            t_grid: self.t_grid.refined(),
            x_grid: self.x_grid.refined(),
            y_grid: self.y_grid.refined(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::Domain("C must be positive".into()));
        }
        if !(self.time_cap > 0.0) || !self.time_cap.is_finite() {
            return Err(Error::Domain("T must be positive".into()));
        }
        if self.dim == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        if let Some(j) = self.j {
            if j >= self.dim {
                return Err(Error::Domain(format!("coordinate index {j} out of range for dimension {}", self.dim)));
            }
        }
        self.t_grid.validate("t")?;
        self.x_grid.validate("x")?;
        self.y_grid.validate("y")?;
        if !(self.t_grid.min > 0.0) || !(self.t_grid.max < self.time_cap) {
            return Err(Error::Domain("t range must lie inside (0, T)".into()));
        }
        if !(self.ratio_cap > 0.0) {
            return Err(Error::Domain("ratio cap must be positive".into()));
        }
        Ok(())
    }

    /// The two largeness conditions on `α`:
    /// `1 - α/(4e^{2T}) <= -α/(8e^{2T})`, i.e. `α >= 8e^{2T}`, and
    /// `1 - e^{-2t²/α} >= t²/α` at every grid time.
    pub fn check_hypothesis(&self) -> Result<()> {
        let threshold = 8.0 * (2.0 * self.time_cap).exp();
        if self.alpha < threshold {
            return Err(Error::OutOfHypothesis(format!(
                "alpha below largeness threshold: alpha = {} but 8 e^(2T) = {threshold}",
                self.alpha
            )));
        }
        for t in self.t_grid.points() {
            let u = t * t / self.alpha;
            if -(-2.0 * u).exp_m1() < u {
                return Err(Error::OutOfHypothesis(format!(
                    "alpha below largeness threshold: 1 - exp(-2t^2/alpha) < t^2/alpha at t = {t}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    K,
    /// `K̃` differentiated in the given 0-based coordinate.
    KTilde(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub max_ratio: f64,
    pub argmax: SweepPoint,
    pub samples: u64,
    pub params: BoundSweepSpec,
    pub violations: u64,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.max_ratio.is_finite()
    }
}

// Best point of a slice of the grid. Indices are (t, x, y) with x and y
// flattened row-major over coordinates, so comparing them compares grid
// positions lexicographically.
#[derive(Clone, Copy, Debug)]
struct Partial {
    max_ratio: f64,
    at: (usize, usize, usize),
    samples: u64,
    violations: u64,
}

impl Partial {
    const EMPTY: Partial = Partial { max_ratio: f64::NEG_INFINITY, at: (usize::MAX, 0, 0), samples: 0, violations: 0 };

    fn merge(self, other: Partial) -> Partial {
        let keep_self = self.max_ratio > other.max_ratio
            || (self.max_ratio == other.max_ratio && self.at <= other.at)
            || other.samples == 0;
        let best = if keep_self && self.samples > 0 { self } else { other };
        Partial {
            max_ratio: best.max_ratio,
            at: best.at,
            samples: self.samples + other.samples,
            violations: self.violations + other.violations,
        }
    }
}

fn unflatten(mut idx: usize, steps: usize, dim: usize, axis: &GridAxis) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for slot in v.iter_mut().rev() {
        *slot = axis.point(idx % steps);
        idx /= steps;
    }
    v
}

fn sweep_time(spec: &BoundSweepSpec, which: KernelKind, ti: usize, weights: &CompositionWeights) -> Partial {
    let t = spec.t_grid.point(ti);
    let n = spec.order;
    let d = spec.dim;
    let s = t * t / spec.alpha;
    let ts = TimeScale::new(s);
    let tb = TimeScale::new(t * t);
    let decay = spec.alpha / (8.0 * (2.0 * spec.time_cap).exp());
    let (t_power, j) = match which {
        KernelKind::K => (2 * n, None),
        KernelKind::KTilde(j) => (2 * n + 1, Some(j)),
    };
    let log_const = t_power as f64 * t.ln() - spec.alpha.ln() - 0.5 * spec.alpha * spec.c * spec.c;

    let xs = spec.x_grid.steps;
    let ys = spec.y_grid.steps;
    let x_count = xs.pow(d as u32);
    let y_count = ys.pow(d as u32);
    let mut coords: Vec<CoordinateBrackets> = (0..d).map(|_| CoordinateBrackets::new(n, &ts)).collect();
    let mut values = vec![vec![0.0; n + 1]; d];
    let mut derivs = vec![0.0; n + 1];
    let mut acc = Partial::EMPTY;
    for xi in 0..x_count {
        let x = unflatten(xi, xs, d, &spec.x_grid);
        if t * x.iter().map(|c| c * c).sum::<f64>().sqrt() > spec.c {
            continue;
        }
        for (c, &xc) in coords.iter_mut().zip(&x) {
            c.set_x(xc);
        }
        for yi in 0..y_count {
            let y = unflatten(yi, ys, d, &spec.y_grid);
            // ln|K| - ln(bound), with the common e^{|y|²} left out
            let mut log_ratio = log_const;
            for i in 0..d {
                let bs = ts.beta(x[i], y[i]);
                let bb = tb.beta(x[i], y[i]);
                log_ratio += -bs * bs - 0.5 * ts.var.ln();
                log_ratio -= -(1.0 + decay) * bb * bb - 0.5 * tb.var.ln();
                coords[i].set_beta(bs);
                for (k, v) in values[i].iter_mut().enumerate() {
                    *v = coords[i].value(k);
                }
                if j == Some(i) {
                    for (k, dv) in derivs.iter_mut().enumerate() {
                        *dv = coords[i].dx(k) - 2.0 * ts.sigma * bs * values[i][k];
                    }
                }
            }
            let sum = match j {
                None => weights.sum(&values),
                Some(j) => weights.sum_replacing(&values, j, &derivs),
            };
            let ratio = if sum == 0.0 { 0.0 } else { (log_ratio + sum.abs().ln()).exp() };
            acc.samples += 1;
            if !ratio.is_finite() || ratio > spec.ratio_cap {
                acc.violations += 1;
            }
            let here = (ti, xi, yi);
            if ratio > acc.max_ratio || !ratio.is_finite() && acc.max_ratio.is_finite() {
                acc.max_ratio = ratio;
                acc.at = here;
            }
        }
    }
    acc
}

/// Sweeps the bound ratio for `K` or `K̃` over the grid of `spec`.
/// Rejects parameters outside the largeness hypotheses, and reports
/// [`Error::EmptyGrid`] when the constraint `t|x| <= C` leaves no point.
/// Ties in the maximum go to the first point in lexicographic grid order.
pub fn kernel_bound_sweep(spec: &BoundSweepSpec, which: KernelKind) -> Result<BoundReport> {
    let mut spec = spec.clone();
    spec.j = match which {
        KernelKind::K => None,
        KernelKind::KTilde(j) => Some(j),
    };
    spec.validate()?;
    spec.check_hypothesis()?;
    let weights = CompositionWeights::new(spec.order, spec.dim)?;
    let best = (0..spec.t_grid.steps)
        .into_par_iter()
        .map(|ti| sweep_time(&spec, which, ti, &weights))
        .reduce(|| Partial::EMPTY, Partial::merge);
    if best.samples == 0 {
        return Err(Error::EmptyGrid);
    }
    let (ti, xi, yi) = best.at;
    let argmax = SweepPoint {
        t: spec.t_grid.point(ti),
        x: unflatten(xi, spec.x_grid.steps, spec.dim, &spec.x_grid),
        y: unflatten(yi, spec.y_grid.steps, spec.dim, &spec.y_grid),
    };
    Ok(BoundReport { max_ratio: best.max_ratio, argmax, samples: best.samples, params: spec, violations: best.violations })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalderonReport {
    /// `1 / I(n_0)` for the first eigenvalue in the list.
    pub constant: f64,
    /// `(n, I(n))` per eigenvalue
    pub integrals: Vec<(u64, f64)>,
    /// `max_n |I(n) - I(n_0)| / I(n_0)`
    pub deviation: f64,
    /// `α^{N+1} N! / 2`
    pub closed_form: f64,
    /// `max_n |I(n) - closed_form| / closed_form`
    pub closed_form_error: f64,
}

// Trapezoid rule in u = ln t over a window covering the integrand down to
// e^{-45} of its peak on both sides. The integrand decays exponentially
// to the left and doubly exponentially to the right, so the rule converges
// geometrically in the number of points.
fn calderon_integral(order: usize, alpha: f64, n: f64, points: usize) -> f64 {
    let k = (order + 1) as f64;
    let ln_na = (n / alpha).ln();
    // in v = ln(t² n / α) the integrand is α^{N+1} e^{kv - e^v} / 2
    let v_lo = (k * k.ln() - k - 45.0) / k;
    let v_hi = (k + 45.0 + 2.0 * k * (k + 45.0).ln()).ln();
    let (u_lo, u_hi) = (0.5 * (v_lo - ln_na), 0.5 * (v_hi - ln_na));
    let h = (u_hi - u_lo) / (points - 1) as f64;
    let f = |u: f64| {
        let s = n * (2.0 * u).exp();
        (k * s.ln() - s / alpha).exp()
    };
    let interior: f64 = (1..points - 1).map(|i| f(u_lo + i as f64 * h)).sum();
    h * (interior + 0.5 * (f(u_lo) + f(u_hi)))
}

/// Evaluates `I(n)` by quadrature for every `n` in `n_list`, checks that it
/// does not depend on `n` and compares it with `α^{N+1} N!/2`.
/// `quad_points` is the size of the base rule; a rule with twice the
/// resolution must agree to `1e-13` or the result is rejected.
pub fn calderon_constant(order: usize, alpha: f64, n_list: &[u64], quad_points: usize) -> Result<CalderonReport> {
    check_alpha(alpha)?;
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Error::Domain("eigenvalues must be a non-empty list of positive integers".into()));
    }
    if quad_points < 16 {
        return Err(Error::Domain("quad_points must be at least 16".into()));
    }
    let mut integrals = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let coarse = calderon_integral(order, alpha, n as f64, quad_points);
        let fine = calderon_integral(order, alpha, n as f64, 2 * quad_points - 1);
        if !fine.is_finite() || (coarse - fine).abs() > 1e-13 * fine.abs() {
            return Err(Error::NonConvergence(format!(
                "Calderon integral for n={n}: {coarse} with {quad_points} points, {fine} with {}",
                2 * quad_points - 1
            )));
        }
        integrals.push((n, fine));
    }
    let i0 = integrals[0].1;
    let deviation = integrals.iter().map(|(_, v)| (v - i0).abs() / i0).fold(0.0, f64::max);
    let closed_form = alpha.powi(order as i32 + 1) * factorial(order).to_f64().unwrap_or(f64::INFINITY) / 2.0;
    let closed_form_error = integrals.iter().map(|(_, v)| (v - closed_form).abs() / closed_form).fold(0.0, f64::max);
    Ok(CalderonReport { constant: 1.0 / i0, integrals, deviation, closed_form, closed_form_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel_k, kernel_k_tilde, mehler};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn slacks_examples() {
        let z = comparison_slacks(2.0, 1.0, &[0.0], &[0.0]).unwrap();
        assert_eq!(z.distance, 0.0);
        let s = comparison_slacks(2.0, 1.0, &[1.0], &[1.0]).unwrap();
        assert!(s.min() >= 0.0);
        let s = comparison_slacks(8.0, 0.01, &[3.0, 3.0], &[-3.0, -3.0]).unwrap();
        assert!(s.min() >= 0.0);
        assert!(comparison_slacks(1.0, 1.0, &[0.0], &[0.0]).is_err());
        assert!(comparison_slacks(2.0, 0.0, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn slacks_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20_000 {
            let d = rng.gen_range(1..=3);
            let alpha = rng.gen_range(1.0..100.0) + 1e-9;
            let t = rng.gen_range(1e-9..5.0);
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
            assert!(comparison_slacks(alpha, t, &x, &y).unwrap().min() >= -1e-12);
        }
    }

    fn small_spec(order: usize, alpha: f64) -> BoundSweepSpec {
        BoundSweepSpec {
            t_grid: GridAxis::new(0.05, 0.95, 7),
            x_grid: GridAxis::new(-3.0, 3.0, 13),
            y_grid: GridAxis::new(-3.0, 3.0, 13),
            ..BoundSweepSpec::new(order, alpha, 1.0, 1.0)
        }
    }

    // The sweep's log-space ratio against a direct evaluation.
    #[test]
    fn sweep_ratio_matches_direct_evaluation() {
        let spec = small_spec(1, 64.0);
        for which in [KernelKind::K, KernelKind::KTilde(0)] {
            let r = kernel_bound_sweep(&spec, which).unwrap();
            let p = &r.argmax;
            let k = match which {
                KernelKind::K => kernel_k(p.t, 1, 64.0, &p.x, &p.y).unwrap(),
                KernelKind::KTilde(j) => kernel_k_tilde(p.t, 1, 64.0, j, &p.x, &p.y).unwrap(),
            };
            let tt = p.t * p.t;
            let e = (-tt).exp();
            let q = (e * p.x[0] - p.y[0]).powi(2) / -(-2.0 * tt).exp_m1();
            let bound = 64.0 * 32f64.exp() * mehler(tt, &p.x, &p.y).unwrap() * (-64.0 / (8.0 * 2f64.exp()) * q).exp();
            let direct = k.abs() / bound;
            assert!((direct - r.max_ratio).abs() <= 1e-10 * direct, "{direct} vs {}", r.max_ratio);
        }
    }

    #[test]
    fn sweep_rejects_small_alpha_and_empty_grids() {
        let spec = small_spec(1, 1.5);
        assert!(matches!(kernel_bound_sweep(&spec, KernelKind::K), Err(Error::OutOfHypothesis(_))));
        let mut spec = small_spec(1, 64.0);
        spec.c = 1e-3;
        spec.x_grid = GridAxis::new(1.0, 3.0, 5);
        assert_eq!(kernel_bound_sweep(&spec, KernelKind::K).unwrap_err(), Error::EmptyGrid);
        let mut spec = small_spec(1, 64.0);
        spec.t_grid = GridAxis::new(0.05, 1.0, 5);
        assert!(matches!(kernel_bound_sweep(&spec, KernelKind::K), Err(Error::Domain(_))));
        assert!(matches!(kernel_bound_sweep(&small_spec(1, 64.0), KernelKind::KTilde(1)), Err(Error::Domain(_))));
    }

    #[test]
    fn sweep_is_deterministic_and_two_dimensional_works() {
        let spec = small_spec(2, 128.0);
        let a = kernel_bound_sweep(&spec, KernelKind::KTilde(0)).unwrap();
        let b = kernel_bound_sweep(&spec, KernelKind::KTilde(0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.params.j, Some(0));
        let mut spec2 = small_spec(1, 64.0);
        spec2.dim = 2;
        spec2.x_grid = GridAxis::new(-2.0, 2.0, 5);
        spec2.y_grid = GridAxis::new(-2.0, 2.0, 5);
        let r = kernel_bound_sweep(&spec2, KernelKind::KTilde(1)).unwrap();
        assert!(r.passed());
        assert_eq!(r.argmax.x.len(), 2);
    }

    #[test]
    fn order_zero_sweep_is_finite() {
        let r = kernel_bound_sweep(&small_spec(0, 64.0), KernelKind::K).unwrap();
        assert!(r.max_ratio.is_finite() && r.passed());
    }

    #[test]
    fn refinement_keeps_old_points() {
        let a = GridAxis::new(-3.0, 3.0, 5);
        let r = a.refined();
        assert_eq!(r.steps, 9);
        for i in 0..5 {
            assert_eq!(a.point(i), r.point(2 * i));
        }
    }

    #[test]
    fn calderon_examples() {
        let r = calderon_constant(0, 2.0, &[1], 400).unwrap();
        assert!((r.constant - 1.0).abs() < 1e-12);
        let r = calderon_constant(2, 3.0, &[1, 5, 40], 400).unwrap();
        assert!((r.constant - 1.0 / 27.0).abs() < 1e-12 / 27.0);
        assert!(r.deviation < 1e-10 && r.closed_form_error < 1e-10);
        assert!(calderon_constant(2, 3.0, &[0], 400).is_err());
        assert!(matches!(calderon_constant(5, 10.0, &[1], 16), Err(Error::NonConvergence(_))));
    }
}
