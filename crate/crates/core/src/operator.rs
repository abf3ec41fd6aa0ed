//! `L^N e^{tL} u(x) = ∫ M_t^N(x, y) u(y) dγ(y)` by Gauss-Hermite quadrature.
//!
//! Substituting `y_i = e^{-t} x_i + sqrt(1 - e^{-2t}) z_i` turns
//! `M_t(x, y) dγ(y)` into `dγ(z)` exactly, and `β_i` into `-z_i`. What is
//! left under the integral is the polynomial bracket of degree `2N` in `z`
//! times `u`, so polynomial `u` of degree `p` is integrated exactly by any
//! rule with `2 · order - 1 >= p + 2N`. The factor `e^{|y|²}` of the kernel
//! is never formed.

use std::fmt;

use crate::combinatorics::{compositions, multinomial, MultiIndex};
use crate::error::{check_dim, Error, Result};
use crate::hermite::{hermite_multi, hermite_normalized, QuadratureRule};
use crate::kernels::{check_time, mtn_closed, CompositionWeights, CoordinateBrackets, KernelQuery, TimeScale};
use num_traits::ToPrimitive;

type Evaluator = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A deterministic function on `ℝ^d`, assumed to grow at most
/// polynomially so that integrals against `dγ` exist and quadrature
/// converges.
pub struct SampledFunction {
    evaluator: Box<Evaluator>,
    d: usize,
}

impl fmt::Debug for SampledFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledFunction").field("d", &self.d).finish_non_exhaustive()
    }
}

impl SampledFunction {
    pub fn new<F>(d: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if d == 0 {
            return Err(Error::Domain("a sampled function needs d >= 1".into()));
        }
        Ok(Self { evaluator: Box::new(f), d })
    }

    pub fn constant(d: usize, c: f64) -> Result<Self> {
        Self::new(d, move |_| c)
    }

    /// `h_α(x) = Π_i h_{α_i}(x_i)`.
    pub fn hermite(alpha: &MultiIndex) -> Self {
        let a = alpha.components().to_vec();
        Self {
            d: a.len(),
            evaluator: Box::new(move |x: &[f64]| a.iter().zip(x).map(|(&n, &xi)| hermite_normalized(n, xi)).product()),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.evaluator)(x)
    }
}

/// Tensor-grid quadrature of `∫ M_t^N(x, y) u(y) dγ(y)`.
pub fn apply_semigroup_derivative(
    u: &SampledFunction,
    t: f64,
    order: usize,
    x: &[f64],
    rule: &QuadratureRule,
) -> Result<f64> {
    check_time(t)?;
    check_dim(u.dim(), x.len())?;
    let d = x.len();
    let ts = TimeScale::new(t);
    let weights = CompositionWeights::new(order, d)?;
    let mut brackets = CoordinateBrackets::new(order, &ts);

    // bracket values of every order at every node, per coordinate
    let per_coord: Vec<Vec<Vec<f64>>> = x
        .iter()
        .map(|&xi| {
            brackets.set_x(xi);
            rule.nodes()
                .iter()
                .map(|&z| {
                    brackets.set_beta(-z);
                    (0..=order).map(|n| brackets.value(n)).collect()
                })
                .collect()
        })
        .collect();

    let q = rule.order();
    let mut idx = vec![0usize; d];
    let mut y = vec![0.0; d];
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); d];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for i in 0..d {
            let z = rule.nodes()[idx[i]];
            w *= rule.weights()[idx[i]];
            y[i] = ts.decay * x[i] + ts.width * z;
            values[i].clone_from(&per_coord[i][idx[i]]);
        }
        total += w * weights.sum(&values) * u.eval(&y);
        // odometer over the tensor grid
        let mut i = 0;
        loop {
            if i == d {
                return Ok(total);
            }
            idx[i] += 1;
            if idx[i] < q {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// `|∫ M_s^N(x, z) M_t^M(z, y) dγ(z) - M_{s+t}^{N+M}(x, y)|` relative to
/// `max(1, |M_{s+t}^{N+M}(x, y)|)`.
///
/// The quadrature absorbs the kernel with the smaller time, the narrower
/// Gaussian in `z`; the other kernel is then wide on the quadrature scale.
/// Both kernels are symmetric, so either may play that role.
pub fn semigroup_composition_residual(
    s: f64,
    t: f64,
    n: usize,
    m: usize,
    x: &[f64],
    y: &[f64],
    rule: &QuadratureRule,
) -> Result<f64> {
    let target = mtn_closed(&KernelQuery::new(s + t, n + m, x.to_vec(), y.to_vec())?);
    // (quadrature time, order, centre), (other time, order, fixed point)
    let ((tq, nq, centre), (to, no, fixed)) = if s <= t { ((s, n, x), (t, m, y)) } else { ((t, m, y), (s, n, x)) };
    let fixed = fixed.to_vec();
    KernelQuery::new(to, no, fixed.clone(), fixed.clone())?;
    let u = SampledFunction::new(fixed.len(), move |z: &[f64]| {
        KernelQuery::new(to, no, z.to_vec(), fixed.clone()).map(|q| mtn_closed(&q)).unwrap_or(f64::NAN)
    })?;
    let got = apply_semigroup_derivative(&u, tq, nq, centre, rule)?;
    Ok((got - target).abs() / target.abs().max(1.0))
}

/// Largest deviation of the quadrature from `(-|α|)^N e^{-t|α|} h_α(x)`
/// over `x_points`, each relative to `max(1, |h_α(x)|)`.
pub fn eigenfunction_check(
    alpha: &MultiIndex,
    t: f64,
    order: usize,
    x_points: &[Vec<f64>],
    rule: &QuadratureRule,
) -> Result<f64> {
    let u = SampledFunction::hermite(alpha);
    let k = alpha.order() as f64;
    let eigen = (-k).powi(order as i32) * (-t * k).exp();
    let mut worst: f64 = 0.0;
    for x in x_points {
        let h = hermite_multi(alpha, x, true)?;
        let got = apply_semigroup_derivative(&u, t, order, x, rule)?;
        worst = worst.max((got - eigen * h).abs() / h.abs().max(1.0));
    }
    Ok(worst)
}

/// Relative gap between `|α|^N e^{-t|α|} Π h_{α_i}(x_i)` and its
/// multinomial expansion `Σ_{|n|=N} N!/n! Π α_i^{n_i} e^{-tα_i} h_{α_i}(x_i)`.
pub fn multinomial_reduction_check(alpha: &MultiIndex, t: f64, order: usize, x: &[f64]) -> Result<f64> {
    check_time(t)?;
    check_dim(alpha.dim(), x.len())?;
    if alpha.dim() < 2 {
        return Err(Error::Domain("the multinomial reduction needs d >= 2".into()));
    }
    let a = alpha.components();
    let factors: Vec<f64> = a.iter().zip(x).map(|(&ai, &xi)| (-t * ai as f64).exp() * hermite_normalized(ai, xi)).collect();
    let lhs = (alpha.order() as f64).powi(order as i32) * factors.iter().product::<f64>();
    let mut rhs = 0.0;
    for n in compositions(order, a.len())? {
        let w = multinomial(order, &n)?.to_f64().unwrap_or(f64::INFINITY);
        let prod: f64 = n
            .components()
            .iter()
            .zip(a)
            .zip(&factors)
            .map(|((&ni, &ai), f)| (ai as f64).powi(ni as i32) * f)
            .product();
        rhs += w * prod;
    }
    let scale = lhs.abs().max(rhs.abs());
    Ok(if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale })
}
