//! Arithmetic in F_p for word-sized primes, plus the number theory needed to
//! build subgroups: primality, factorization and primitive roots.
//!
//! Moduli are capped at 2^62 so every product fits a 128-bit intermediate.

use crate::error::{Error, Result};
use num_integer::Integer;

/// Exclusive upper bound on every modulus handled here.
pub const MODULUS_CAP: u64 = 1 << 62;

/// Miller-Rabin witnesses that are deterministic for every n < 2^64.
const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

#[inline]
pub fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

/// `b^e mod p` by square-and-multiply.
pub fn mod_pow(b: u64, mut e: u64, p: u64) -> u64 {
    if p == 1 {
        return 0;
    }
    let mut base = b % p;
    let mut acc = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        e >>= 1;
    }
    acc
}

fn check_range(n: u64, min: u64) -> Result<()> {
    if n < min || n >= MODULUS_CAP {
        return Err(Error::OutOfRange {
            value: n,
            min,
            max: MODULUS_CAP,
        });
    }
    Ok(())
}

/// Deterministic primality test for `2 <= n < 2^62`.
pub fn is_prime(n: u64) -> Result<bool> {
    check_range(n, 2)?;
    Ok(miller_rabin(n))
}

fn miller_rabin(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &q in &WITNESSES {
        if n.is_multiple_of(q) {
            return n == q;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &w in &WITNESSES {
        let mut x = mod_pow(w, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Complete factorization of `1 <= n < 2^62`, sorted by prime.
pub fn factorize(n: u64) -> Result<Vec<(u64, u32)>> {
    check_range(n, 1)?;
    let mut primes = Vec::new();
    let mut rest = n;
    for q in [2u64, 3, 5] {
        while rest.is_multiple_of(q) {
            primes.push(q);
            rest /= q;
        }
    }
    // 2,3,5-wheel trial division up to a small bound, Pollard rho after that.
    const TRIAL_LIMIT: u64 = 1 << 16;
    let gaps = [4u64, 2, 4, 2, 4, 6, 2, 6];
    let mut d = 7u64;
    let mut gi = 0;
    while d <= TRIAL_LIMIT && d * d <= rest {
        while rest.is_multiple_of(d) {
            primes.push(d);
            rest /= d;
        }
        d += gaps[gi];
        gi = (gi + 1) % gaps.len();
    }
    if rest > 1 {
        split_large(rest, &mut primes);
    }
    primes.sort_unstable();

    let mut out: Vec<(u64, u32)> = Vec::new();
    for q in primes {
        match out.last_mut() {
            Some((last, e)) if *last == q => *e += 1,
            _ => out.push((q, 1)),
        }
    }
    Ok(out)
}

fn split_large(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if miller_rabin(n) {
        out.push(n);
        return;
    }
    let mut c = 1;
    let d = loop {
        if let Some(d) = pollard_brent(n, c) {
            break d;
        }
        c += 1;
    };
    split_large(d, out);
    split_large(n / d, out);
}

/// One Brent-variant Pollard rho attempt with polynomial x^2 + c.
fn pollard_brent(n: u64, c: u64) -> Option<u64> {
    if n.is_multiple_of(2) {
        return Some(2);
    }
    let f = |x: u64| (mul_mod(x, x, n) + c) % n;
    let mut y = 2u64;
    let mut r = 1u64;
    let mut q = 1u64;
    let mut g = 1u64;
    let mut x = y;
    let mut ys = y;
    let m = 128u64;
    while g == 1 {
        x = y;
        for _ in 0..r {
            y = f(y);
        }
        let mut k = 0;
        while k < r && g == 1 {
            ys = y;
            for _ in 0..m.min(r - k) {
                y = f(y);
                q = mul_mod(q, x.abs_diff(y), n);
            }
            g = q.gcd(&n);
            k += m;
        }
        r *= 2;
    }
    if g == n {
        loop {
            ys = f(ys);
            g = x.abs_diff(ys).gcd(&n);
            if g > 1 {
                break;
            }
        }
    }
    (g != n).then_some(g)
}

/// All positive divisors of `n`, ascending.
pub fn divisors(n: u64) -> Result<Vec<u64>> {
    let mut divs = vec![1u64];
    for (q, e) in factorize(n)? {
        let len = divs.len();
        let mut pk = 1u64;
        for _ in 0..e {
            pk *= q;
            for i in 0..len {
                divs.push(divs[i] * pk);
            }
        }
    }
    divs.sort_unstable();
    Ok(divs)
}

/// An odd prime together with the factorization of `p - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeModulus {
    p: u64,
    factors: Vec<(u64, u32)>,
}

impl PrimeModulus {
    pub fn new(p: u64) -> Result<Self> {
        check_range(p, 2)?;
        if p == 2 || !miller_rabin(p) {
            return Err(Error::NotPrime(p));
        }
        let factors = factorize(p - 1)?;
        Ok(Self { p, factors })
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.p
    }

    /// Factorization of `p - 1` as sorted `(prime, exponent)` pairs.
    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn divides_group_order(&self, h: u64) -> bool {
        h != 0 && (self.p - 1).is_multiple_of(h)
    }
}

/// Smallest `r >= 2` of multiplicative order `p - 1`.
pub fn primitive_root(modulus: &PrimeModulus) -> u64 {
    let p = modulus.value();
    let n = p - 1;
    (2..p)
        .find(|&r| {
            modulus
                .factors()
                .iter()
                .all(|&(q, _)| mod_pow(r, n / q, p) != 1)
        })
        .unwrap_or(1) // only reachable for p = 2, which PrimeModulus rejects
}
