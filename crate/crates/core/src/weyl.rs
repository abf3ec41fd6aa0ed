//! The Weyl algebra `F<x, y>` with `xy - yx = -1`.
//!
//! Elements are stored in normal order (every `x` to the left of every `y`)
//! as a sparse map `(m, n) -> c` for the monomials `c x^m y^n`, with exact
//! rational coefficients and no zero entries, so two elements are equal
//! exactly when their maps are equal.
//!
//! A faithful model is `x ↦ (multiplication by t)`, `y ↦ d/dt` acting on
//! polynomials in `t`; [`WeylElement::act_on_polynomial`] implements it.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::combinatorics::{binomial, factorial, stirling2};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WeylElement {
    terms: BTreeMap<(usize, usize), BigRational>,
}

/// Weighted degree of a non-zero element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightedDegree {
    Homogeneous(i64),
    NonHomogeneous,
}

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

impl WeylElement {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::monomial(0, 0, BigRational::one())
    }

    pub fn scalar(c: BigRational) -> Self {
        Self::monomial(0, 0, c)
    }

    pub fn x() -> Self {
        Self::monomial(1, 0, BigRational::one())
    }

    pub fn y() -> Self {
        Self::monomial(0, 1, BigRational::one())
    }

    /// `D = xy`
    pub fn d() -> Self {
        Self::monomial(1, 1, BigRational::one())
    }

    /// `c x^m y^n`
    pub fn monomial(m: usize, n: usize, c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((m, n), c);
        }
        Self { terms }
    }

    /// `Σ_k coeffs[k] D^k` with `D = xy`.
    pub fn d_polynomial(coeffs: &[BigRational]) -> Self {
        let d = Self::d();
        let mut acc = Self::zero();
        let mut pow = Self::one();
        for c in coeffs {
            acc = acc + pow.scale(c);
            pow = pow.multiply(&d);
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of `x^m y^n` in normal order.
    pub fn coefficient(&self, m: usize, n: usize) -> BigRational {
        self.terms.get(&(m, n)).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Non-zero terms `((m, n), c)` in ascending exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (&(usize, usize), &BigRational)> {
        self.terms.iter()
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(k, v)| (*k, v * c)).collect(),
        }
    }

    fn add_term(&mut self, key: (usize, usize), c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(key).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    /// Normal-ordered product.
    ///
    /// For monomials, `x^a y^b · x^c y^d = x^a (y^b x^c) y^d` and pushing
    /// each `y` through the `x`s with `yx = xy + 1` gives
    /// `y^b x^c = Σ_k C(b,k) C(c,k) k! x^(c-k) y^(b-k)`.
    pub fn multiply(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (&(a, b), ca) in &self.terms {
            for (&(c, d), cb) in &other.terms {
                let coef = ca * cb;
                for k in 0..=b.min(c) {
                    let w = binomial(b, k) * binomial(c, k) * factorial(k);
                    let w = BigRational::from_integer(BigInt::from(w));
                    out.add_term((a + c - k, b + d - k), &coef * w);
                }
            }
        }
        out
    }

    /// `self^k`; `self^0` is the unit.
    pub fn power(&self, k: usize) -> Self {
        let mut result = Self::one();
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = result.multiply(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.multiply(&base);
            }
        }
        result
    }

    /// `m - n` shared by every monomial `x^m y^n`, if there is one.
    pub fn weighted_degree(&self) -> Result<WeightedDegree> {
        let mut degrees = self.terms.keys().map(|&(m, n)| m as i64 - n as i64);
        let first = degrees
            .next()
            .ok_or_else(|| Error::Domain("weighted degree of the zero element is undefined".into()))?;
        if degrees.all(|g| g == first) {
            Ok(WeightedDegree::Homogeneous(first))
        } else {
            Ok(WeightedDegree::NonHomogeneous)
        }
    }

    /// Membership in `F_0`: every monomial is balanced, `x^n y^n`.
    /// These are exactly the elements whose left multiplication maps each
    /// weighted-degree class into itself.
    pub fn is_homogeneity_preserving(&self) -> bool {
        self.terms.keys().all(|&(m, n)| m == n)
    }

    /// Apply the element to a polynomial `Σ p[j] t^j` in the model
    /// `x ↦ t·`, `y ↦ d/dt`.
    pub fn act_on_polynomial(&self, p: &[BigRational]) -> Vec<BigRational> {
        let mut out: Vec<BigRational> = Vec::new();
        for (&(m, n), c) in &self.terms {
            if n >= p.len() {
                continue;
            }
            for (j, pj) in p.iter().enumerate().skip(n) {
                if pj.is_zero() {
                    continue;
                }
                // d^n/dt^n t^j = (j)_n t^(j-n), then shift by t^m
                let ff: BigInt = ((j - n + 1)..=j).map(BigInt::from).product();
                let idx = j - n + m;
                if out.len() <= idx {
                    out.resize(idx + 1, BigRational::zero());
                }
                out[idx] += c * pj * BigRational::from_integer(ff);
            }
        }
        while out.last().is_some_and(Zero::is_zero) {
            out.pop();
        }
        out
    }
}

impl Add for WeylElement {
    type Output = WeylElement;
    fn add(mut self, rhs: WeylElement) -> WeylElement {
        for (k, v) in rhs.terms {
            self.add_term(k, v);
        }
        self
    }
}

impl Neg for WeylElement {
    type Output = WeylElement;
    fn neg(self) -> WeylElement {
        Self {
            terms: self.terms.into_iter().map(|(k, v)| (k, -v)).collect(),
        }
    }
}

impl Sub for WeylElement {
    type Output = WeylElement;
    fn sub(self, rhs: WeylElement) -> WeylElement {
        self + (-rhs)
    }
}

impl Mul for &WeylElement {
    type Output = WeylElement;
    fn mul(self, rhs: &WeylElement) -> WeylElement {
        self.multiply(rhs)
    }
}

fn fmt_power(f: &mut fmt::Formatter<'_>, var: &str, e: usize) -> fmt::Result {
    match e {
        0 => Ok(()),
        1 => write!(f, "{var}"),
        _ => write!(f, "{var}^{e}"),
    }
}

/// Normal-form string, highest total degree first: `x^2 y^2 + x y`.
impl fmt::Display for WeylElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut keys: Vec<&(usize, usize)> = self.terms.keys().collect();
        keys.sort_by(|a, b| (b.0 + b.1, b.0).cmp(&(a.0 + a.1, a.0)));
        for (i, key) in keys.into_iter().enumerate() {
            let c = &self.terms[key];
            let negative = c.is_negative();
            match (i, negative) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let mag = c.abs();
            let (m, n) = *key;
            let constant = m == 0 && n == 0;
            if !mag.is_one() || constant {
                write!(f, "{mag}")?;
                if !constant {
                    write!(f, " ")?;
                }
            }
            fmt_power(f, "x", m)?;
            if m > 0 && n > 0 {
                write!(f, " ")?;
            }
            fmt_power(f, "y", n)?;
        }
        Ok(())
    }
}

/// Exact check of `(xy)^m = Σ_i S(m, i) x^i y^i` for `1 <= m <= m_max`.
pub fn normal_order_xy_power_check(m_max: usize) -> bool {
    let d = WeylElement::d();
    let mut pow = WeylElement::one();
    (1..=m_max).all(|m| {
        pow = pow.multiply(&d);
        let expected = (1..=m).fold(WeylElement::zero(), |acc, i| {
            acc + WeylElement::monomial(i, i, BigRational::from_integer(stirling2(m, i).into()))
        });
        pow == expected
    })
}

/// Outcome of one named identity in [`commutation_report`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdentityCheck {
    pub name: String,
    pub passed: bool,
}

/// Test polynomials in `D` of degree at most four.
pub fn test_d_polynomials() -> Vec<Vec<BigRational>> {
    let r = |n: i64, d: i64| BigRational::new(n.into(), d.into());
    vec![
        vec![rat(1)],
        vec![rat(0), rat(1)],
        vec![rat(0), rat(0), rat(1)],
        vec![rat(0), rat(0), rat(0), rat(1)],
        vec![rat(0), rat(0), rat(0), rat(0), rat(1)],
        vec![r(3, 2), rat(-1), rat(0), r(2, 3), rat(1)],
        vec![rat(-7), r(1, 5), rat(4), r(-11, 3), r(5, 7)],
    ]
}

// p(D + shift) as an element, expanded through the algebra itself.
fn shifted_d_polynomial(coeffs: &[BigRational], shift: i64) -> WeylElement {
    let base = WeylElement::d() + WeylElement::scalar(rat(shift));
    let mut acc = WeylElement::zero();
    let mut pow = WeylElement::one();
    for c in coeffs {
        acc = acc + pow.scale(c);
        pow = pow.multiply(&base);
    }
    acc
}

/// The commuting and product identities for `D = xy`:
///
/// * `D x^m = x^m D + m x^m`, `D y^m = y^m D - m y^m`
/// * `p(D) x^m = x^m p(D + m)`, `p(D) y^m = y^m p(D - m)`
/// * `x^m y^m = Π_{i<m} (D - i)`, `y^m x^m = Π_{i=1..m} (D + i)`
///
/// plus the homogeneity characterisation: left multiplication by a
/// balanced monomial keeps every weighted degree, left multiplication by
/// `x^i y^j` with `i != j` moves it.
pub fn commutation_report(m_max: usize) -> Vec<IdentityCheck> {
    let x = WeylElement::x();
    let y = WeylElement::y();
    let d = WeylElement::d();
    let polys = test_d_polynomials();
    let mut out = Vec::new();
    let mut push = |name: String, passed: bool| out.push(IdentityCheck { name, passed });

    for m in 1..=m_max {
        let xm = x.power(m);
        let ym = y.power(m);
        let mi = m as i64;
        push(
            format!("D x^{m} = x^{m} D + {m} x^{m}"),
            d.multiply(&xm) == xm.multiply(&d) + xm.scale(&rat(mi)),
        );
        push(
            format!("D y^{m} = y^{m} D - {m} y^{m}"),
            d.multiply(&ym) == ym.multiply(&d) - ym.scale(&rat(mi)),
        );
        let all_p_x = polys.iter().all(|p| {
            WeylElement::d_polynomial(p).multiply(&xm) == xm.multiply(&shifted_d_polynomial(p, mi))
        });
        push(format!("p(D) x^{m} = x^{m} p(D+{m})"), all_p_x);
        let all_p_y = polys.iter().all(|p| {
            WeylElement::d_polynomial(p).multiply(&ym) == ym.multiply(&shifted_d_polynomial(p, -mi))
        });
        push(format!("p(D) y^{m} = y^{m} p(D-{m})"), all_p_y);
        let falling = (0..mi).fold(WeylElement::one(), |acc, i| {
            acc.multiply(&(d.clone() - WeylElement::scalar(rat(i))))
        });
        push(format!("x^{m} y^{m} = prod (D - i)"), xm.multiply(&ym) == falling);
        let rising = (1..=mi).fold(WeylElement::one(), |acc, i| {
            acc.multiply(&(d.clone() + WeylElement::scalar(rat(i))))
        });
        push(format!("y^{m} x^{m} = prod (D + i)"), ym.multiply(&xm) == rising);
    }

    // Homogeneity: sample monomials x^a y^b with a, b <= m_max.
    let probe = m_max.min(6);
    let mut balanced_ok = true;
    let mut unbalanced_moves = true;
    for k in 0..=probe {
        let left = WeylElement::monomial(k, k, rat(1));
        for a in 0..=probe {
            for b in 0..=probe {
                let target = WeylElement::monomial(a, b, rat(1));
                let deg = a as i64 - b as i64;
                let prod = left.multiply(&target);
                balanced_ok &= prod.weighted_degree() == Ok(WeightedDegree::Homogeneous(deg));
            }
        }
    }
    for i in 0..=probe {
        for j in 0..=probe {
            if i == j {
                continue;
            }
            let left = WeylElement::monomial(i, j, rat(1));
            for n in 0..=probe {
                let prod = left.multiply(&WeylElement::monomial(n, n, rat(1)));
                let moved = prod.weighted_degree() == Ok(WeightedDegree::Homogeneous(i as i64 - j as i64));
                unbalanced_moves &= moved && !prod.is_homogeneity_preserving();
            }
        }
    }
    push("x^k y^k preserves weighted degree".into(), balanced_ok);
    push("x^i y^j (i != j) shifts weighted degree".into(), unbalanced_moves);
    let powers_balanced = (0..=m_max).all(|k| d.power(k).is_homogeneity_preserving());
    push("(xy)^k lies in F_0".into(), powers_balanced);
    out
}

pub fn check_commutation_identities(m_max: usize) -> bool {
    commutation_report(m_max).iter().all(|c| c.passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64) -> BigRational {
        rat(n)
    }

    // Independent normal ordering: expand a word in x, y by literally
    // rewriting the leftmost "yx" into "xy" + "" until no "yx" remains.
    fn rewrite_word(word: &str) -> WeylElement {
        let mut pending: Vec<(String, i64)> = vec![(word.to_string(), 1)];
        let mut out = WeylElement::zero();
        while let Some((w, c)) = pending.pop() {
            match w.find("yx") {
                Some(i) => {
                    pending.push((format!("{}xy{}", &w[..i], &w[i + 2..]), c));
                    pending.push((format!("{}{}", &w[..i], &w[i + 2..]), c));
                }
                None => {
                    let m = w.chars().filter(|&ch| ch == 'x').count();
                    let n = w.len() - m;
                    out = out + WeylElement::monomial(m, n, r(c));
                }
            }
        }
        out
    }

    fn word_element(word: &str) -> WeylElement {
        word.chars().fold(WeylElement::one(), |acc, ch| {
            acc.multiply(&if ch == 'x' { WeylElement::x() } else { WeylElement::y() })
        })
    }

    #[test]
    fn commutator_rewrite() {
        let x = WeylElement::x();
        let y = WeylElement::y();
        assert_eq!(y.multiply(&x), WeylElement::d() + WeylElement::one());
        assert_eq!(x.multiply(&y) - y.multiply(&x), WeylElement::scalar(r(-1)));
        assert_eq!(y.multiply(&x).to_string(), "x y + 1");
    }

    #[test]
    fn documented_products() {
        let d = WeylElement::d();
        assert_eq!(d.multiply(&d).to_string(), "x^2 y^2 + x y");
        let x2y2 = WeylElement::monomial(2, 2, r(1));
        assert_eq!(x2y2.multiply(&WeylElement::x()).to_string(), "x^3 y^2 + 2 x^2 y");
        assert_eq!(d.power(3).to_string(), "x^3 y^3 + 3 x^2 y^2 + x y");
        assert_eq!(d.power(1), d);
        assert_eq!(d.power(0), WeylElement::one());
    }

    #[test]
    fn multiply_matches_word_rewriting() {
        let words = ["yx", "yyxx", "xyxy", "yxyxyx", "yyyxxx", "xyyxxyyx", "yyxxyxyx", "yxxxyyy"];
        for w in words {
            assert_eq!(word_element(w), rewrite_word(w), "word {w}");
        }
    }

    #[test]
    fn xy_powers_are_stirling() {
        assert!(normal_order_xy_power_check(1));
        assert!(normal_order_xy_power_check(8));
        assert!(normal_order_xy_power_check(12));
    }

    #[test]
    fn commutation_identities_hold() {
        assert!(check_commutation_identities(1));
        assert!(check_commutation_identities(6));
        let report = commutation_report(10);
        for c in &report {
            assert!(c.passed, "{}", c.name);
        }
    }

    #[test]
    fn p_of_d_squared_shift() {
        let p = vec![r(0), r(0), r(1)];
        for m in 1..=6 {
            let xm = WeylElement::x().power(m);
            assert_eq!(
                WeylElement::d_polynomial(&p).multiply(&xm),
                xm.multiply(&shifted_d_polynomial(&p, m as i64))
            );
        }
    }

    #[test]
    fn weighted_degrees() {
        assert_eq!(
            WeylElement::monomial(3, 3, r(1)).weighted_degree(),
            Ok(WeightedDegree::Homogeneous(0))
        );
        assert_eq!(
            WeylElement::monomial(2, 5, r(1)).weighted_degree(),
            Ok(WeightedDegree::Homogeneous(-3))
        );
        let mixed = WeylElement::monomial(2, 1, r(1)) + WeylElement::monomial(1, 2, r(1));
        assert_eq!(mixed.weighted_degree(), Ok(WeightedDegree::NonHomogeneous));
        assert!(WeylElement::zero().weighted_degree().is_err());
    }

    #[test]
    fn homogeneity_preservation() {
        let e = WeylElement::d() + WeylElement::monomial(3, 3, r(5));
        assert!(e.is_homogeneity_preserving());
        assert!(!WeylElement::monomial(2, 1, r(1)).is_homogeneity_preserving());
        assert!(WeylElement::d().power(7).is_homogeneity_preserving());
    }

    #[test]
    fn canonical_form_drops_zeros() {
        let d = WeylElement::d();
        assert!((d.clone() - d).is_zero());
        assert!(WeylElement::monomial(4, 1, r(0)).is_zero());
    }

    #[test]
    fn display_signs_and_fractions() {
        let e = WeylElement::monomial(1, 0, BigRational::new(3.into(), 2.into()))
            - WeylElement::monomial(0, 2, r(1))
            - WeylElement::one();
        assert_eq!(e.to_string(), "-y^2 + 3/2 x - 1");
        assert_eq!(WeylElement::zero().to_string(), "0");
    }

    // (t d/dt)^N on t^j gives j^N t^j; the normal form Σ S(N,n) t^n d^n
    // gives Σ S(N,n) (j)_n t^j. Both routes through the model must agree.
    #[test]
    fn polynomial_model_reproduces_euler_operator_expansion() {
        for big_n in 0..=8usize {
            let normal = WeylElement::d().power(big_n);
            for j in 0..=8usize {
                let mut tj = vec![r(0); j + 1];
                tj[j] = r(1);
                let mut seq = tj.clone();
                for _ in 0..big_n {
                    seq = WeylElement::y().act_on_polynomial(&seq);
                    seq = WeylElement::x().act_on_polynomial(&seq);
                }
                assert_eq!(normal.act_on_polynomial(&tj), seq, "N={big_n} j={j}");
                let constant = seq.get(j).cloned().unwrap_or_else(BigRational::zero);
                assert_eq!(constant, r((j as i64).pow(big_n as u32)));
            }
        }
    }

    // Apply the factors of each identity one after another in the model
    // and compare with the normal form, on t^j for j <= 8.
    #[test]
    fn polynomial_model_reproduces_commutation_identities() {
        let apply_seq = |factors: &[WeylElement], p: &[BigRational]| {
            factors.iter().rev().fold(p.to_vec(), |acc, f| f.act_on_polynomial(&acc))
        };
        let x = WeylElement::x();
        let y = WeylElement::y();
        let d = WeylElement::d();
        for m in 1..=5usize {
            let xs = vec![x.clone(); m];
            let ys = vec![y.clone(); m];
            for j in 0..=8usize {
                let mut tj = vec![r(0); j + 1];
                tj[j] = r(1);
                let falling = (0..m as i64).fold(WeylElement::one(), |acc, i| {
                    acc.multiply(&(d.clone() - WeylElement::scalar(r(i))))
                });
                let mut word = xs.clone();
                word.extend(ys.iter().cloned());
                assert_eq!(apply_seq(&word, &tj), falling.act_on_polynomial(&tj));
                let mut dx = vec![x.clone(), y.clone()];
                dx.append(&mut xs.clone());
                let rhs = x.power(m).multiply(&d) + x.power(m).scale(&r(m as i64));
                assert_eq!(apply_seq(&dx, &tj), rhs.act_on_polynomial(&tj));
            }
        }
    }

    // Constant-term extraction: replacing x^i y^i by (j)_i in the
    // expansion of (xy)^k reproduces j^k.
    #[test]
    fn constant_term_extraction() {
        use crate::combinatorics::falling_factorial;
        for k in 0..=10usize {
            let e = WeylElement::d().power(k);
            for j in 0..=12usize {
                let sum: BigRational = e
                    .terms()
                    .map(|(&(i, _), c)| c * BigRational::from_integer(falling_factorial(j, i).into()))
                    .sum();
                assert_eq!(sum, r((j as i64).pow(k as u32)));
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn element() -> impl Strategy<Value = WeylElement> {
            proptest::collection::vec((0usize..=6, 0usize..=6, -5i64..=5, 1i64..=4), 0..5).prop_map(|ts| {
                ts.into_iter().fold(WeylElement::zero(), |acc, (m, n, p, q)| {
                    acc + WeylElement::monomial(m, n, BigRational::new(p.into(), q.into()))
                })
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn associative(a in element(), b in element(), c in element()) {
                prop_assert_eq!(a.multiply(&b).multiply(&c), a.multiply(&b.multiply(&c)));
            }

            #[test]
            fn distributive(a in element(), b in element(), c in element()) {
                prop_assert_eq!(a.multiply(&(b.clone() + c.clone())), a.multiply(&b) + a.multiply(&c));
                prop_assert_eq!((a.clone() + b.clone()).multiply(&c), a.multiply(&c) + b.multiply(&c));
            }

            #[test]
            fn model_is_a_representation(a in element(), b in element(), j in 0usize..8) {
                let mut tj = vec![BigRational::zero(); j + 1];
                tj[j] = BigRational::one();
                let seq = a.act_on_polynomial(&b.act_on_polynomial(&tj));
                prop_assert_eq!(a.multiply(&b).act_on_polynomial(&tj), seq);
            }
        }
    }
}
