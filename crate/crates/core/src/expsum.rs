//! Exponential sums over a subgroup: `S_a(H) = sum_{x in H} e_p(a x)`, the
//! full table of magnitudes over all `a`, its maximum, and the interval
//! double sum `S_a(N, H) = sum_{n in N} |S_{an}(H)|`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accum::{unit_phase, CompensatedComplex, CompensatedSum, PhaseTable};
use crate::error::{Error, Result};
use crate::field::mul_mod;
use crate::subgroup::Subgroup;
use crate::transform::exponential_sums;

/// Default ceiling on `p` for dense per-residue tables.
pub const DEFAULT_DENSE_LIMIT: u64 = 10_000_000;

/// `Auto` picks the direct strategy while `p * H` stays below this.
pub const DIRECT_WORK_LIMIT: u64 = 1_000_000_000;

/// Relative tolerance used to decide which residues attain the maximum.
const TIE_TOLERANCE: f64 = 1e-9;

/// The residues `{L+1, ..., L+N} mod p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    start: i64,
    len: u64,
    p: u64,
    avoids_zero: bool,
}

impl Interval {
    /// `start` is the offset `L`, taken mod `p`; requires `1 <= len <= p`.
    pub fn new(start: i64, len: u64, p: u64) -> Result<Self> {
        if len == 0 || len > p {
            return Err(Error::InvalidInput(format!(
                "interval length {len} must lie in [1, {p}]"
            )));
        }
        let first = (start.rem_euclid(p as i64) as u64 + 1) % p;
        // 0 is hit iff the offset from `first` to p (mod p) is below len.
        let to_zero = (p - first) % p;
        let avoids_zero = to_zero >= len;
        Ok(Self {
            start,
            len,
            p,
            avoids_zero,
        })
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn avoids_zero(&self) -> bool {
        self.avoids_zero
    }

    pub fn starts_at_origin(&self) -> bool {
        self.start.rem_euclid(self.p as i64) == 0
    }

    /// Residues in order `L+1, L+2, ...`.
    pub fn residues(&self) -> impl Iterator<Item = u64> + '_ {
        let base = self.start.rem_euclid(self.p as i64) as u64;
        (1..=self.len).map(move |k| (base + k) % self.p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Direct per-`a` summation, `O(p H)`.
    Direct,
    /// Chirp-z transform of the indicator vector, `O(p log p)`.
    Transform,
    #[default]
    Auto,
}

impl Strategy {
    pub fn resolve(self, p: u64, order: u64) -> Strategy {
        match self {
            Strategy::Auto if p.saturating_mul(order) <= DIRECT_WORK_LIMIT => Strategy::Direct,
            Strategy::Auto => Strategy::Transform,
            s => s,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SumConfig {
    pub strategy: Strategy,
    pub dense_limit: u64,
    pub keep_values: bool,
}

impl Default for SumConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Auto,
            dense_limit: DEFAULT_DENSE_LIMIT,
            keep_values: false,
        }
    }
}

/// `|S_a(H)|` for every residue `a`, optionally with the complex values.
#[derive(Debug, Clone)]
pub struct SumTable {
    p: u64,
    order: u64,
    strategy: Strategy,
    magnitudes: Vec<f64>,
    values: Option<Vec<Complex64>>,
}

impl SumTable {
    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    /// The strategy that actually produced the table.
    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    #[inline]
    pub fn magnitude(&self, a: u64) -> f64 {
        self.magnitudes[(a % self.p) as usize]
    }

    pub fn values(&self) -> Option<&[Complex64]> {
        self.values.as_deref()
    }

    /// `sum_a |S_a|^2`, which equals `p H` exactly.
    pub fn square_sum(&self) -> f64 {
        self.magnitudes
            .iter()
            .map(|m| m * m)
            .collect::<CompensatedSum>()
            .value()
    }

    /// Relative deviation of [`Self::square_sum`] from `p H`.
    pub fn parseval_error(&self) -> f64 {
        let expected = self.p as f64 * self.order as f64;
        (self.square_sum() - expected).abs() / expected
    }

    /// Maximum over `a != 0`; ties resolve to the smallest residue.
    pub fn max_nonzero(&self) -> MaxSum {
        let value = self.magnitudes[1..]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let cut = value - TIE_TOLERANCE * self.order as f64;
        let a_star = (1..self.p)
            .find(|&a| self.magnitudes[a as usize] >= cut)
            .expect("p >= 3 leaves at least one nonzero residue");
        MaxSum { a_star, value }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxSum {
    pub a_star: u64,
    pub value: f64,
}

/// `S_a(H)` with compensated summation in ascending element order.
pub fn single_sum(a: u64, s: &Subgroup) -> Complex64 {
    let p = s.p();
    let a = a % p;
    let mut acc = CompensatedComplex::default();
    for &x in s.elements() {
        acc.add(unit_phase(mul_mod(a, x, p), p));
    }
    acc.value()
}

fn single_sum_table(a: u64, s: &Subgroup, phases: &PhaseTable) -> Complex64 {
    let p = s.p();
    let mut acc = CompensatedComplex::default();
    for &x in s.elements() {
        acc.add(phases.get(a * x % p));
    }
    acc.value()
}

/// Builds the table of `S_a(H)` over all `a in 0..p`.
pub fn all_sums(s: &Subgroup, cfg: &SumConfig) -> Result<SumTable> {
    let p = s.p();
    if p > cfg.dense_limit {
        return Err(Error::DenseLimit {
            p,
            limit: cfg.dense_limit,
        });
    }
    let strategy = cfg.strategy.resolve(p, s.order());
    let mut values: Vec<Complex64> = match strategy {
        Strategy::Direct => {
            let phases = PhaseTable::new(p);
            (0..p)
                .into_par_iter()
                .map(|a| single_sum_table(a, s, &phases))
                .collect()
        }
        Strategy::Transform => {
            let weights: Vec<f64> = match s.indicator() {
                Some(ind) => ind.iter().map(|&b| b as f64).collect(),
                None => {
                    let mut w = vec![0.0; p as usize];
                    for &x in s.elements() {
                        w[x as usize] = 1.0;
                    }
                    w
                }
            };
            exponential_sums(&weights)
        }
        Strategy::Auto => unreachable!("resolved above"),
    };
    // S_0 = H exactly; the transform only reproduces it to rounding.
    values[0] = Complex64::new(s.order() as f64, 0.0);
    let magnitudes = values.par_iter().map(|z| z.norm()).collect();
    Ok(SumTable {
        p,
        order: s.order(),
        strategy,
        magnitudes,
        values: cfg.keep_values.then_some(values),
    })
}

/// `max_{a != 0} |S_a(H)|` from a freshly built table.
pub fn max_sum(s: &Subgroup, cfg: &SumConfig) -> Result<MaxSum> {
    Ok(all_sums(s, cfg)?.max_nonzero())
}

/// Same maximum as [`max_sum`] without a dense table: one sum per coset,
/// `O(p)` work in total.
pub fn max_sum_by_cosets(s: &Subgroup) -> MaxSum {
    let reps = s.coset_representatives();
    let mags: Vec<f64> = reps.par_iter().map(|&c| single_sum(c, s).norm()).collect();
    let value = mags.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cut = value - TIE_TOLERANCE * s.order() as f64;
    let p = s.p();
    let a_star = reps
        .iter()
        .zip(&mags)
        .filter(|(_, &m)| m >= cut)
        .map(|(&c, _)| {
            s.elements()
                .iter()
                .map(|&h| mul_mod(c, h, p))
                .min()
                .expect("subgroup is nonempty")
        })
        .min()
        .expect("at least one coset");
    MaxSum { a_star, value }
}

fn check_multiplier(a: u64, p: u64, interval: &Interval) -> Result<()> {
    if a.is_multiple_of(p) {
        return Err(Error::InvalidInput(format!(
            "a = {a} is divisible by p = {p}"
        )));
    }
    if interval.p() != p {
        return Err(Error::InvalidInput(format!(
            "interval was built for p = {}, subgroup has p = {p}",
            interval.p()
        )));
    }
    Ok(())
}

/// `S_a(N, H)` by table lookup.
pub fn interval_subgroup_sum(a: u64, interval: &Interval, table: &SumTable) -> Result<f64> {
    let p = table.p();
    check_multiplier(a, p, interval)?;
    let a = a % p;
    Ok(interval
        .residues()
        .map(|n| table.magnitude(mul_mod(a, n, p)))
        .collect::<CompensatedSum>()
        .value())
}

/// `S_a(N, H)` by evaluating every inner sum directly, `O(N H)`.
pub fn interval_subgroup_sum_direct(a: u64, interval: &Interval, s: &Subgroup) -> Result<f64> {
    let p = s.p();
    check_multiplier(a, p, interval)?;
    let inner: Vec<f64> = interval
        .residues()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&n| single_sum(mul_mod(a % p, n, p), s).norm())
        .collect();
    Ok(inner.into_iter().collect::<CompensatedSum>().value())
}
