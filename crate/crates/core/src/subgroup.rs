//! The multiplicative subgroup of F_p^* of a given order.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::field::{mod_pow, mul_mod, primitive_root, PrimeModulus};

/// Largest `p` for which a dense 0/1 indicator is materialized.
pub const DENSE_INDICATOR_LIMIT: u64 = 100_000_000;

#[derive(Debug, Clone)]
enum Membership {
    Dense(Vec<u8>),
    Hashed(HashSet<u64>),
}

/// The unique subgroup of order `H` in F_p^*, held both as a sorted element
/// list and as a membership structure (dense indicator when `p` allows it).
#[derive(Debug, Clone)]
pub struct Subgroup {
    modulus: PrimeModulus,
    order: u64,
    generator: u64,
    primitive_root: u64,
    elements: Vec<u64>,
    membership: Membership,
}

impl Subgroup {
    /// Builds the subgroup generated by `r^((p-1)/H)`, `r` the smallest
    /// primitive root.
    pub fn of_order(modulus: &PrimeModulus, order: u64) -> Result<Self> {
        let p = modulus.value();
        if !modulus.divides_group_order(order) {
            return Err(Error::OrderNotDivisor {
                order,
                p_minus_one: p - 1,
            });
        }
        let root = primitive_root(modulus);
        let generator = mod_pow(root, (p - 1) / order, p);

        let mut elements = Vec::with_capacity(order as usize);
        let mut x = 1u64;
        for _ in 0..order {
            elements.push(x);
            x = mul_mod(x, generator, p);
        }
        debug_assert_eq!(x, 1);
        elements.sort_unstable();

        let membership = if p <= DENSE_INDICATOR_LIMIT {
            let mut ind = vec![0u8; p as usize];
            for &e in &elements {
                ind[e as usize] = 1;
            }
            Membership::Dense(ind)
        } else {
            Membership::Hashed(elements.iter().copied().collect())
        };

        Ok(Self {
            modulus: modulus.clone(),
            order,
            generator,
            primitive_root: root,
            elements,
            membership,
        })
    }

    /// Convenience constructor from a raw prime.
    pub fn new(p: u64, order: u64) -> Result<Self> {
        Self::of_order(&PrimeModulus::new(p)?, order)
    }

    pub fn modulus(&self) -> &PrimeModulus {
        &self.modulus
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.modulus.value()
    }

    #[inline]
    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn generator(&self) -> u64 {
        self.generator
    }

    /// Elements in ascending order.
    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    /// Dense 0/1 indicator of length `p`, when `p <= DENSE_INDICATOR_LIMIT`.
    pub fn indicator(&self) -> Option<&[u8]> {
        match &self.membership {
            Membership::Dense(ind) => Some(ind),
            Membership::Hashed(_) => None,
        }
    }

    pub fn contains(&self, x: u64) -> bool {
        let x = x % self.p();
        match &self.membership {
            Membership::Dense(ind) => ind[x as usize] == 1,
            Membership::Hashed(set) => set.contains(&x),
        }
    }

    pub fn is_full_group(&self) -> bool {
        self.order == self.p() - 1
    }

    /// One residue per multiplicative coset `cH`: the powers `r^j`,
    /// `0 <= j < (p-1)/H`, of the primitive root.
    pub fn coset_representatives(&self) -> Vec<u64> {
        let p = self.p();
        let count = (p - 1) / self.order;
        let mut reps = Vec::with_capacity(count as usize);
        let mut x = 1u64;
        for _ in 0..count {
            reps.push(x);
            x = mul_mod(x, self.primitive_root, p);
        }
        reps
    }

    /// The coset `cH` as a sorted list.
    pub fn coset(&self, c: u64) -> Vec<u64> {
        let p = self.p();
        let mut out: Vec<u64> = self.elements.iter().map(|&h| mul_mod(c, h, p)).collect();
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples_mod_13() {
        assert_eq!(Subgroup::new(13, 3).unwrap().elements(), &[1, 3, 9]);
        assert_eq!(Subgroup::new(13, 1).unwrap().elements(), &[1]);
        let full = Subgroup::new(13, 12).unwrap();
        assert_eq!(full.elements(), (1..13).collect::<Vec<_>>().as_slice());
        assert!(full.is_full_group());
    }

    #[test]
    fn rejects_non_divisor() {
        assert_eq!(
            Subgroup::new(13, 5).unwrap_err(),
            Error::OrderNotDivisor {
                order: 5,
                p_minus_one: 12
            }
        );
        assert!(Subgroup::new(13, 0).is_err());
    }

    #[test]
    fn coset_representative_examples() {
        let reps = Subgroup::new(13, 12).unwrap().coset_representatives();
        assert_eq!(reps, vec![1]);
        assert_eq!(
            Subgroup::new(13, 3).unwrap().coset_representatives().len(),
            4
        );
        assert_eq!(
            Subgroup::new(7, 1).unwrap().coset_representatives().len(),
            6
        );
    }

    #[test]
    fn cosets_partition_the_group() {
        for (p, h) in [(13u64, 3u64), (101, 10), (1009, 48), (1009, 1), (7, 6)] {
            let s = Subgroup::new(p, h).unwrap();
            let mut seen = vec![false; p as usize];
            for c in s.coset_representatives() {
                for x in s.coset(c) {
                    assert!(!seen[x as usize], "p={p} h={h}: {x} covered twice");
                    seen[x as usize] = true;
                }
            }
            assert!(!seen[0]);
            assert!(seen[1..].iter().all(|&b| b));
        }
    }

    #[test]
    fn structural_invariants_small_groups() {
        for p in [13u64, 31, 61, 101, 181, 1009] {
            let m = PrimeModulus::new(p).unwrap();
            for h in crate::field::divisors(p - 1).unwrap() {
                let s = Subgroup::of_order(&m, h).unwrap();
                let el = s.elements();
                assert_eq!(el.len() as u64, h);
                assert!(el.windows(2).all(|w| w[0] < w[1]));
                assert!(el.contains(&1));
                assert!(el.iter().all(|&x| x != 0 && mod_pow(x, h, p) == 1));
                for &x in el {
                    for &y in el {
                        assert!(s.contains(x * y % p));
                    }
                }
                let ind = s.indicator().unwrap();
                assert_eq!(ind.iter().map(|&b| b as u64).sum::<u64>(), h);
                assert!(el.iter().all(|&x| ind[x as usize] == 1));
            }
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let a = Subgroup::new(4001, 40).unwrap();
        let b = Subgroup::new(4001, 40).unwrap();
        assert_eq!(a.elements(), b.elements());
        assert_eq!(a.generator(), b.generator());
    }

    #[test]
    fn large_modulus_uses_hashed_membership() {
        // 2^61 - 1: p - 1 = 2 * 3^2 * 5^2 * 7 * 11 * 13 * 31 * 41 * 61 * 151 * 331 * 1321
        let p = (1u64 << 61) - 1;
        let s = Subgroup::new(p, 1321).unwrap();
        assert!(s.indicator().is_none());
        assert!(s.contains(1));
        assert!(s.elements().iter().all(|&x| mod_pow(x, 1321, p) == 1));
        assert_eq!(s.elements().len(), 1321);
    }

    proptest! {
        #[test]
        fn closure_sampled(i in 0usize..1000, j in 0usize..1000) {
            let s = Subgroup::new(998_244_353, 7 * 17 * 8).unwrap();
            let el = s.elements();
            let (x, y) = (el[i % el.len()], el[j % el.len()]);
            prop_assert!(s.contains(mul_mod(x, y, s.p())));
        }
    }
}
