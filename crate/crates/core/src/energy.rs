//! Exact additive energies `T_m(H)` via representation counts, the
//! interval-subgroup count `J(N, H)`, and the moment identity
//! `sum_mu |S_mu(H)|^{2m} = p T_m(H)` as an independent floating route.

use rayon::prelude::*;
use serde::Serialize;

use crate::accum::CompensatedSum;
use crate::bounds;
use crate::error::{Error, Result};
use crate::expsum::{Interval, SumTable};
use crate::field::mul_mod;
use crate::subgroup::Subgroup;

/// Default ceiling on `p * H * (m - 1)` convolution steps.
pub const DEFAULT_CONVOLUTION_BUDGET: u64 = 50_000_000_000;

/// Ceiling on `N * H` for [`j_count`].
pub const DEFAULT_PRODUCT_BUDGET: u64 = 2_000_000_000;

/// Ceiling on the literal tuple enumeration of [`brute_force_t`].
pub const BRUTE_FORCE_LIMIT: u128 = 100_000_000;

/// `r_m(lambda) = #{(h_1..h_m) in H^m : h_1 + ... + h_m = lambda}` for every
/// `lambda`, and `T_m = sum r_m(lambda)^2`.
#[derive(Debug, Clone)]
pub struct EnergyProfile {
    p: u64,
    m: u32,
    order: u64,
    counts: Vec<u64>,
    energy: u128,
}

impl EnergyProfile {
    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    #[inline]
    pub fn count(&self, lambda: u64) -> u64 {
        self.counts[(lambda % self.p) as usize]
    }

    /// `T_m(H)`.
    pub fn energy(&self) -> u128 {
        self.energy
    }

    /// `sum_lambda r_m(lambda)`, which must equal `H^m`.
    pub fn total(&self) -> u128 {
        self.counts.iter().map(|&c| c as u128).sum()
    }

    /// `r_m(h lambda) = r_m(lambda)` for all `h in H` and all `lambda`.
    pub fn is_multiplicatively_invariant(&self, s: &Subgroup) -> bool {
        let p = self.p;
        (0..p).into_par_iter().all(|lambda| {
            let c = self.counts[lambda as usize];
            s.elements()
                .iter()
                .all(|&h| self.counts[mul_mod(h, lambda, p) as usize] == c)
        })
    }
}

fn checked_power(base: u64, exp: u32) -> Option<u128> {
    (base as u128).checked_pow(exp)
}

/// Exact `r_m` by `m - 1` passes of the cyclic convolution
/// `r_k(lambda) = sum_{h in H} r_{k-1}(lambda - h)`, seeded with the indicator.
pub fn representation_counts(s: &Subgroup, m: u32) -> Result<EnergyProfile> {
    representation_counts_with_budget(s, m, DEFAULT_CONVOLUTION_BUDGET)
}

pub fn representation_counts_with_budget(
    s: &Subgroup,
    m: u32,
    budget: u64,
) -> Result<EnergyProfile> {
    if m == 0 {
        return Err(Error::InvalidInput(
            "fold count m must be at least 1".into(),
        ));
    }
    let p = s.p();
    let h = s.order();
    match checked_power(h, 2 * m) {
        Some(v) if v < (1u128 << 127) => {}
        _ => {
            return Err(Error::Budget(format!(
                "H^(2m) = {h}^{} does not fit a 127-bit accumulator",
                2 * m
            )))
        }
    }
    let work = (p as u128) * (h as u128) * (m as u128 - 1);
    if work > budget as u128 {
        return Err(Error::Budget(format!(
            "convolution needs {work} steps, budget is {budget}"
        )));
    }
    if p > crate::subgroup::DENSE_INDICATOR_LIMIT {
        return Err(Error::DenseLimit {
            p,
            limit: crate::subgroup::DENSE_INDICATOR_LIMIT,
        });
    }

    let mut counts = vec![0u64; p as usize];
    for &x in s.elements() {
        counts[x as usize] = 1;
    }
    let elements = s.elements();
    for _ in 1..m {
        let prev = counts;
        counts = (0..p)
            .into_par_iter()
            .map(|lambda| {
                elements
                    .iter()
                    .map(|&x| {
                        let idx = if lambda >= x {
                            lambda - x
                        } else {
                            lambda + p - x
                        };
                        prev[idx as usize]
                    })
                    .sum()
            })
            .collect();
    }
    let energy = counts.iter().map(|&c| (c as u128) * (c as u128)).sum();
    Ok(EnergyProfile {
        p,
        m,
        order: h,
        counts,
        energy,
    })
}

/// `p^{-1} sum_mu |S_mu(H)|^{2m}`, which equals `T_m(H)` up to rounding.
pub fn energy_via_moments(table: &SumTable, m: u32) -> f64 {
    let exp = 2 * m as i32;
    let sum: CompensatedSum = table.magnitudes().iter().map(|s| s.powi(exp)).collect();
    sum.value() / table.p() as f64
}

/// Whether a moment-route value rounds to the exact count.
pub fn moment_agrees(exact: u128, moment: f64) -> bool {
    (moment - exact as f64).abs() < 0.5
}

/// `R(lambda) = #{(n, h) in N x H : n h = lambda}` and `J = sum R(lambda)^2`.
#[derive(Debug, Clone)]
pub struct IntervalProductProfile {
    p: u64,
    len: u64,
    order: u64,
    counts: Vec<u64>,
    j: u128,
}

impl IntervalProductProfile {
    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `J(N, H)`.
    pub fn j(&self) -> u128 {
        self.j
    }

    pub fn total(&self) -> u128 {
        self.counts.iter().map(|&c| c as u128).sum()
    }

    /// `N H`, the expected value of [`Self::total`].
    pub fn expected_total(&self) -> u128 {
        self.len as u128 * self.order as u128
    }
}

/// `J(N, H)` by enumerating all `N H` products.
pub fn j_count(interval: &Interval, s: &Subgroup) -> Result<IntervalProductProfile> {
    let p = s.p();
    if interval.p() != p {
        return Err(Error::InvalidInput(format!(
            "interval was built for p = {}, subgroup has p = {p}",
            interval.p()
        )));
    }
    let work = interval.len() as u128 * s.order() as u128;
    if work > DEFAULT_PRODUCT_BUDGET as u128 {
        return Err(Error::Budget(format!(
            "N*H = {work} exceeds {DEFAULT_PRODUCT_BUDGET}"
        )));
    }
    let mut counts = vec![0u64; p as usize];
    for n in interval.residues() {
        for &h in s.elements() {
            counts[mul_mod(n, h, p) as usize] += 1;
        }
    }
    let j = counts.iter().map(|&c| (c as u128) * (c as u128)).sum();
    Ok(IntervalProductProfile {
        p,
        len: interval.len(),
        order: s.order(),
        counts,
        j,
    })
}

/// `T_m(H)` by literal enumeration of all `2m`-tuples; for cross-checking.
pub fn brute_force_t(s: &Subgroup, m: u32) -> Result<u128> {
    if m == 0 {
        return Err(Error::InvalidInput(
            "fold count m must be at least 1".into(),
        ));
    }
    let h = s.order() as usize;
    let arity = 2 * m as usize;
    let tuples = checked_power(h as u64, arity as u32).unwrap_or(u128::MAX);
    if tuples > BRUTE_FORCE_LIMIT {
        return Err(Error::Budget(format!(
            "brute force over {h}^{arity} tuples exceeds {BRUTE_FORCE_LIMIT}"
        )));
    }
    let p = s.p();
    let el = s.elements();
    let mut idx = vec![0usize; arity];
    let mut hits = 0u128;
    loop {
        let lhs = idx[..m as usize]
            .iter()
            .fold(0u64, |acc, &i| (acc + el[i]) % p);
        let rhs = idx[m as usize..]
            .iter()
            .fold(0u64, |acc, &i| (acc + el[i]) % p);
        if lhs == rhs {
            hits += 1;
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == arity {
                return Ok(hits);
            }
            idx[k] += 1;
            if idx[k] < h {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Ratios of measured energies to the right-hand sides of the `T_2` and
/// `T_3` lemmas. `None` where `log H < 1` or the energy was not computed.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct LemmaConformance {
    pub order: u64,
    pub below_sqrt_p: bool,
    pub t2_ratio: Option<f64>,
    pub t3_ratio: Option<f64>,
}

pub fn lemma_conformance(
    p: u64,
    order: u64,
    t2: Option<u128>,
    t3: Option<u128>,
) -> LemmaConformance {
    let h = order as f64;
    let applicable = h.ln() >= 1.0;
    let lemmas = bounds::lemma_bounds(p as f64, 1.0, h, false);
    let ratio = |t: Option<u128>, rhs: Option<f64>| match (t, rhs) {
        (Some(t), Some(r)) if applicable => Some(t as f64 / r),
        _ => None,
    };
    LemmaConformance {
        order,
        below_sqrt_p: (order as u128) * (order as u128) < p as u128,
        t2_ratio: ratio(t2, lemmas.t2),
        t3_ratio: ratio(t3, lemmas.t3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expsum::{all_sums, SumConfig};
    use crate::field::divisors;

    #[test]
    fn first_fold_is_the_indicator() {
        let s = Subgroup::new(101, 10).unwrap();
        let e = representation_counts(&s, 1).unwrap();
        assert_eq!(e.energy(), 10);
        for x in 0..101u64 {
            assert_eq!(e.count(x), s.contains(x) as u64);
        }
    }

    #[test]
    fn plus_minus_one_pair() {
        for p in [13u64, 101] {
            let s = Subgroup::new(p, 2).unwrap();
            assert_eq!(s.elements(), &[1, p - 1]);
            let e = representation_counts(&s, 2).unwrap();
            assert_eq!(e.count(2), 1);
            assert_eq!(e.count(0), 2);
            assert_eq!(e.count(p - 2), 1);
            assert_eq!(e.counts().iter().sum::<u64>(), 4);
            assert_eq!(e.energy(), 6);
            assert_eq!(brute_force_t(&s, 2).unwrap(), 6);
        }
    }

    #[test]
    fn trivial_subgroup() {
        let s = Subgroup::new(13, 1).unwrap();
        assert_eq!(representation_counts(&s, 2).unwrap().energy(), 1);
        assert_eq!(brute_force_t(&s, 3).unwrap(), 1);
        assert_eq!(brute_force_t(&s, 1).unwrap(), 1);
    }

    #[test]
    fn moments_round_to_exact_energy() {
        let s = Subgroup::new(13, 2).unwrap();
        let t = all_sums(&s, &SumConfig::default()).unwrap();
        assert_eq!(energy_via_moments(&t, 2).round(), 6.0);
        assert!((energy_via_moments(&t, 1) - 2.0).abs() < 1e-9);

        let s = Subgroup::new(13, 3).unwrap();
        let t = all_sums(&s, &SumConfig::default()).unwrap();
        let exact = representation_counts(&s, 3).unwrap().energy();
        assert_eq!(exact, brute_force_t(&s, 3).unwrap());
        assert!(moment_agrees(exact, energy_via_moments(&t, 3)));
        assert_eq!(
            representation_counts(&s, 2).unwrap().energy(),
            brute_force_t(&s, 2).unwrap()
        );
    }

    #[test]
    fn three_way_agreement_small_subgroups() {
        let mut primes: Vec<u64> = (3..200)
            .filter(|&n| crate::field::is_prime(n).unwrap())
            .collect();
        primes.retain(|&p| p > 2);
        for p in primes {
            for h in divisors(p - 1).unwrap().into_iter().filter(|&h| h <= 12) {
                let s = Subgroup::new(p, h).unwrap();
                let t = all_sums(&s, &SumConfig::default()).unwrap();
                for m in [2u32, 3] {
                    let conv = representation_counts(&s, m).unwrap();
                    let brute = brute_force_t(&s, m).unwrap();
                    assert_eq!(conv.energy(), brute, "p={p} h={h} m={m}");
                    assert!(moment_agrees(brute, energy_via_moments(&t, m)));
                    assert_eq!(conv.total(), (h as u128).pow(m));
                }
            }
        }
    }

    #[test]
    fn energy_bounds_and_invariance() {
        for (p, h) in [(101u64, 10u64), (1009, 48), (2003, 22), (1009, 1008)] {
            let s = Subgroup::new(p, h).unwrap();
            for m in [1u32, 2, 3] {
                let e = representation_counts(&s, m).unwrap();
                let hm = (h as u128).pow(m);
                let t = e.energy();
                assert_eq!(e.total(), hm);
                assert!(hm <= t && t <= hm * hm);
                assert!(t * p as u128 >= hm * hm, "Cauchy-Schwarz p={p} h={h} m={m}");
                assert!(e.is_multiplicatively_invariant(&s));
            }
        }
    }

    #[test]
    fn j_count_examples() {
        let s = Subgroup::new(101, 10).unwrap();
        let one = Interval::new(0, 1, 101).unwrap();
        assert_eq!(j_count(&one, &s).unwrap().j(), 10);

        let trivial = Subgroup::new(101, 1).unwrap();
        for n in [1u64, 7, 101] {
            let iv = Interval::new(3, n, 101).unwrap();
            assert_eq!(j_count(&iv, &trivial).unwrap().j(), n as u128);
        }

        let iv = Interval::new(0, 10, 101).unwrap();
        let prof = j_count(&iv, &s).unwrap();
        let mut brute = 0u128;
        for n1 in 1..=10u64 {
            for &h1 in s.elements() {
                for n2 in 1..=10u64 {
                    for &h2 in s.elements() {
                        if n1 * h1 % 101 == n2 * h2 % 101 {
                            brute += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(prof.j(), brute);
        assert_eq!(prof.total(), prof.expected_total());
        assert!(prof.j() >= 100);
    }

    #[test]
    fn budgets_are_enforced() {
        let s = Subgroup::new(1009, 48).unwrap();
        assert!(matches!(brute_force_t(&s, 3), Err(Error::Budget(_))));
        assert!(matches!(
            representation_counts_with_budget(&s, 3, 10),
            Err(Error::Budget(_))
        ));
        assert!(representation_counts(&s, 0).is_err());
        let big = Subgroup::new(1009, 1008).unwrap();
        assert!(matches!(
            representation_counts(&big, 7),
            Err(Error::Budget(_))
        ));
    }

    #[test]
    fn lemma_ratio_not_applicable_for_tiny_groups() {
        let c = lemma_conformance(13, 2, Some(6), None);
        assert_eq!(c.t2_ratio, None);
        let c = lemma_conformance(1009, 16, Some(1000), Some(100_000));
        assert!(c.t2_ratio.unwrap() > 0.0 && c.t3_ratio.unwrap() > 0.0);
        assert!(c.below_sqrt_p);
    }
}
