//! Exact integer combinatorics: Stirling numbers of the second kind,
//! falling factorials, multinomial coefficients and compositions of an
//! integer into a fixed number of ordered parts.
//!
//! Everything here is arbitrary precision: `21!` and `S(40, 20)` already
//! overflow 64-bit words, and the identity checks are only meaningful when
//! they are exact.
//!
//! Stirling numbers obey `S(N, n) = n S(N-1, n) + S(N-1, n-1)`. The factor
//! is the block count `n`, not the set size `N`; with `N` the table would no
//! longer count set partitions (e.g. it would give `S(2, 1) = 2`).

use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A d-tuple of non-negative integers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(components: Vec<usize>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Domain("multi-index must have at least one component".into()));
        }
        Ok(Self(components))
    }

    /// The all-zero index in dimension `dim`.
    pub fn zero(dim: usize) -> Result<Self> {
        Self::new(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[usize] {
        &self.0
    }

    /// `|α| = α_1 + … + α_d`
    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }

    /// `α! = α_1! ⋯ α_d!`
    pub fn factorial(&self) -> BigUint {
        self.0.iter().map(|&a| factorial(a)).product()
    }
}

impl From<MultiIndex> for Vec<usize> {
    fn from(m: MultiIndex) -> Self {
        m.0
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Triangular table of `S(N, n)` for `0 <= n <= N <= n_max`.
///
/// Immutable once built; share it freely between threads.
#[derive(Clone, Debug)]
pub struct StirlingTable {
    n_max: usize,
    rows: Vec<Vec<BigUint>>,
}

impl StirlingTable {
    pub fn new(n_max: usize) -> Self {
        let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(n_max + 1);
        rows.push(vec![BigUint::one()]);
        for big_n in 1..=n_max {
            let prev = &rows[big_n - 1];
            let mut row = vec![BigUint::zero(); big_n + 1];
            for n in 1..=big_n {
                let stay = if n < big_n { &prev[n] * n } else { BigUint::zero() };
                row[n] = stay + &prev[n - 1];
            }
            rows.push(row);
        }
        Self { n_max, rows }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// `S(big_n, n)`, or `None` when `big_n` lies outside the table.
    pub fn get(&self, big_n: usize, n: usize) -> Option<BigUint> {
        let row = self.rows.get(big_n)?;
        Some(row.get(n).cloned().unwrap_or_default())
    }

    pub fn row(&self, big_n: usize) -> Option<&[BigUint]> {
        self.rows.get(big_n).map(Vec::as_slice)
    }
}

fn shared_table(min_n: usize) -> Arc<StirlingTable> {
    static CACHE: OnceLock<RwLock<Arc<StirlingTable>>> = OnceLock::new();
    let lock = CACHE.get_or_init(|| RwLock::new(Arc::new(StirlingTable::new(32))));
    {
        let t = lock.read().expect("stirling cache poisoned");
        if t.n_max() >= min_n {
            return Arc::clone(&t);
        }
    }
    let mut w = lock.write().expect("stirling cache poisoned");
    if w.n_max() < min_n {
        *w = Arc::new(StirlingTable::new(min_n.next_power_of_two()));
    }
    Arc::clone(&w)
}

/// Stirling number of the second kind `S(big_n, n)`: the number of
/// partitions of a `big_n`-element set into `n` non-empty blocks.
/// Zero when `n > big_n`.
pub fn stirling2(big_n: usize, n: usize) -> BigUint {
    if n > big_n {
        return BigUint::zero();
    }
    shared_table(big_n).get(big_n, n).unwrap_or_default()
}

/// `S(big_n, n)` as a float, for the kernel hot paths where `big_n` is small.
pub fn stirling2_f64(big_n: usize, n: usize) -> f64 {
    stirling2(big_n, n).to_f64().unwrap_or(f64::INFINITY)
}

pub fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

/// `(j)_n = j (j-1) ⋯ (j-n+1)`; 1 for `n = 0` and 0 for `n > j`.
pub fn falling_factorial(j: usize, n: usize) -> BigUint {
    if n > j {
        return BigUint::zero();
    }
    (j - n + 1..=j).fold(BigUint::one(), |acc, k| acc * k)
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    // Each partial product is itself a binomial coefficient, so the division is exact.
    (0..k).fold(BigUint::one(), |acc, i| acc * (n - i) / (i + 1))
}

pub fn binomial_f64(n: usize, k: usize) -> f64 {
    binomial(n, k).to_f64().unwrap_or(f64::INFINITY)
}

/// `N! / (n_1! ⋯ n_d!)`. Rejects `parts` whose order is not `big_n`.
pub fn multinomial(big_n: usize, parts: &MultiIndex) -> Result<BigUint> {
    if parts.order() != big_n {
        return Err(Error::Domain(format!(
            "multinomial parts {parts} sum to {} but N = {big_n}",
            parts.order()
        )));
    }
    // Product of binomials avoids the large intermediate N!.
    let mut acc = BigUint::one();
    let mut seen = 0;
    for &p in parts.components() {
        seen += p;
        acc *= binomial(seen, p);
    }
    Ok(acc)
}

/// Iterator over all d-tuples of non-negative integers summing to `total`,
/// in ascending lexicographic order.
#[derive(Clone, Debug)]
pub struct Compositions {
    current: Option<Vec<usize>>,
    total: usize,
}

impl Iterator for Compositions {
    type Item = MultiIndex;

    fn next(&mut self) -> Option<MultiIndex> {
        let out = self.current.clone()?;
        self.current = successor(&out, self.total);
        Some(MultiIndex(out))
    }
}

// Next composition in lexicographic order: bump the rightmost position
// that still has room, put everything left over into the last slot.
fn successor(c: &[usize], total: usize) -> Option<Vec<usize>> {
    let d = c.len();
    if d == 1 {
        return None;
    }
    let mut prefix_sum: usize = c[..d - 1].iter().sum();
    for i in (0..d - 1).rev() {
        if prefix_sum < total {
            let mut next = c.to_vec();
            next[i] += 1;
            for v in next.iter_mut().skip(i + 1) {
                *v = 0;
            }
            let used: usize = next[..d - 1].iter().sum();
            next[d - 1] = total - used;
            return Some(next);
        }
        prefix_sum -= c[i];
    }
    None
}

/// All compositions of `total` into `d >= 1` ordered non-negative parts.
/// There are `binomial(total + d - 1, d - 1)` of them.
pub fn compositions(total: usize, d: usize) -> Result<Compositions> {
    if d == 0 {
        return Err(Error::Domain("compositions need d >= 1".into()));
    }
    let mut first = vec![0; d];
    first[d - 1] = total;
    Ok(Compositions { current: Some(first), total })
}

/// Exact check of `j^N = Σ_n S(N, n) (j)_n` for all `N <= n_max`, `j <= j_max`.
pub fn check_stirling_generating(n_max: usize, j_max: usize) -> bool {
    let table = shared_table(n_max);
    (0..=n_max).all(|big_n| {
        let row = table.row(big_n).expect("table covers n_max");
        (0..=j_max).all(|j| {
            let lhs = BigUint::from(j).pow(big_n as u32);
            let rhs: BigUint = row
                .iter()
                .enumerate()
                .map(|(n, s)| s * falling_factorial(j, n))
                .sum();
            lhs == rhs
        })
    })
}

/// Number of partitions of `{1..n}` into `k` blocks for every `k`, by
/// brute-force enumeration of restricted-growth strings (each set
/// partition appears exactly once). Exponential in `n`; meant as an
/// independent check of the Stirling table for small `n`.
pub fn set_partition_counts(n: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n + 1];
    if n == 0 {
        counts[0] = 1;
        return counts;
    }
    fn rec(pos: usize, n: usize, max_block: usize, counts: &mut [u64]) {
        if pos == n {
            counts[max_block] += 1;
            return;
        }
        for b in 0..=max_block {
            rec(pos + 1, n, max_block.max(b + 1), counts);
        }
    }
    // the first element always opens block 1
    rec(1, n, 1, &mut counts);
    counts
}

/// Stirling table against [`set_partition_counts`] for every `N <= n_max`.
pub fn check_partition_enumeration(n_max: usize) -> bool {
    (0..=n_max).all(|n| {
        set_partition_counts(n).iter().enumerate().all(|(k, &c)| stirling2(n, k) == BigUint::from(c))
    })
}

/// `S(N, n) = n S(N-1, n) + S(N-1, n-1)` and the boundary values, exactly,
/// for `N <= n_max`.
pub fn check_stirling_recursion(n_max: usize) -> bool {
    let t = shared_table(n_max);
    let get = |a: usize, b: usize| t.get(a, b).expect("table covers n_max");
    get(0, 0).is_one()
        && (1..=n_max).all(|big_n| {
            get(big_n, big_n).is_one()
                && get(big_n, 0).is_zero()
                && (1..=big_n).all(|n| get(big_n, n) == get(big_n - 1, n) * n + get(big_n - 1, n - 1))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_values() {
        assert_eq!(stirling2(5, 5), BigUint::from(1u8));
        assert_eq!(stirling2(3, 2), BigUint::from(3u8));
        assert_eq!(stirling2(4, 2), BigUint::from(7u8));
        assert_eq!(stirling2(0, 0), BigUint::from(1u8));
        assert_eq!(stirling2(4, 0), BigUint::zero());
        assert_eq!(stirling2(3, 4), BigUint::zero());
    }

    #[test]
    fn matches_partition_enumeration() {
        for n in 0..=10 {
            let counts = set_partition_counts(n);
            for (k, &c) in counts.iter().enumerate() {
                assert_eq!(stirling2(n, k), BigUint::from(c), "S({n},{k})");
            }
            let bell: u64 = counts.iter().sum();
            let row_sum: BigUint = (0..=n).map(|k| stirling2(n, k)).sum();
            assert_eq!(row_sum, BigUint::from(bell), "Bell({n})");
        }
    }

    #[test]
    fn public_checks() {
        assert!(check_partition_enumeration(10));
        assert!(check_stirling_recursion(30));
    }

    #[test]
    fn recursion_with_block_factor() {
        let t = StirlingTable::new(30);
        for big_n in 1..=30 {
            assert_eq!(t.get(big_n, big_n), Some(BigUint::one()));
            assert_eq!(t.get(big_n, 0), Some(BigUint::zero()));
            for n in 1..=big_n {
                let rhs = t.get(big_n - 1, n).unwrap() * n + t.get(big_n - 1, n - 1).unwrap();
                assert_eq!(t.get(big_n, n).unwrap(), rhs);
            }
        }
        // factor N instead of n already disagrees at S(2,1)
        assert_ne!(BigUint::from(2u8) * stirling2(1, 1) + stirling2(1, 0), stirling2(2, 1));
    }

    #[test]
    fn large_entries_are_exact() {
        assert_eq!(stirling2(25, 12), BigUint::from(362_262_620_784_874_680u64));
        assert!(stirling2(40, 20) > BigUint::from(u64::MAX));
        assert!(factorial(21) > BigUint::from(u64::MAX));
    }

    #[test]
    fn falling_factorials() {
        assert_eq!(falling_factorial(5, 0), BigUint::one());
        assert_eq!(falling_factorial(5, 2), BigUint::from(20u8));
        assert_eq!(falling_factorial(3, 4), BigUint::zero());
        assert_eq!(falling_factorial(0, 0), BigUint::one());
        assert_eq!(falling_factorial(6, 6), factorial(6));
    }

    #[test]
    fn multinomials() {
        let mi = |v: Vec<usize>| MultiIndex::new(v).unwrap();
        assert_eq!(multinomial(3, &mi(vec![3])).unwrap(), BigUint::one());
        assert_eq!(multinomial(3, &mi(vec![1, 1, 1])).unwrap(), BigUint::from(6u8));
        assert_eq!(multinomial(4, &mi(vec![2, 2])).unwrap(), BigUint::from(6u8));
        assert!(multinomial(4, &mi(vec![2, 1])).is_err());
        assert!(MultiIndex::new(vec![]).is_err());
    }

    #[test]
    fn multi_index_values() {
        let a = MultiIndex::new(vec![3, 0, 2]).unwrap();
        assert_eq!(a.order(), 5);
        assert_eq!(a.factorial(), BigUint::from(12u8));
        assert_eq!(a.to_string(), "(3,0,2)");
    }

    #[test]
    fn composition_order_and_count() {
        let c: Vec<Vec<usize>> = compositions(2, 2).unwrap().map(Vec::from).collect();
        assert_eq!(c, vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
        let z: Vec<Vec<usize>> = compositions(0, 3).unwrap().map(Vec::from).collect();
        assert_eq!(z, vec![vec![0, 0, 0]]);
        assert_eq!(compositions(3, 2).unwrap().count(), 4);
        assert_eq!(compositions(5, 1).unwrap().count(), 1);
        assert!(compositions(2, 0).is_err());
    }

    #[test]
    fn generating_identity() {
        assert!(check_stirling_generating(0, 5));
        assert!(check_stirling_generating(10, 10));
        assert!(check_stirling_generating(20, 20));
    }

    #[test]
    fn shared_table_is_usable_across_threads() {
        let handles: Vec<_> = (0..4)
            .map(|i| std::thread::spawn(move || stirling2(40 + 10 * i, 7)))
            .collect();
        let got: Vec<BigUint> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        for (i, g) in got.iter().enumerate() {
            assert_eq!(*g, StirlingTable::new(40 + 10 * i).get(40 + 10 * i, 7).unwrap());
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn compositions_are_distinct_and_sum(total in 0usize..9, d in 1usize..5) {
                let all: Vec<MultiIndex> = compositions(total, d).unwrap().collect();
                prop_assert_eq!(BigUint::from(all.len()), binomial(total + d - 1, d - 1));
                for w in all.windows(2) {
                    prop_assert!(w[0] < w[1]);
                }
                for c in &all {
                    prop_assert_eq!(c.order(), total);
                    prop_assert_eq!(c.dim(), d);
                }
            }

            #[test]
            fn multinomial_matches_factorial_ratio(parts in proptest::collection::vec(0usize..7, 1..5)) {
                let mi = MultiIndex::new(parts).unwrap();
                let n = mi.order();
                prop_assert_eq!(multinomial(n, &mi).unwrap() * mi.factorial(), factorial(n));
            }
        }
    }
}
