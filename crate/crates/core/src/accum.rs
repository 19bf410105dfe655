//! Neumaier-compensated accumulators and the per-prime phase table.

use std::f64::consts::TAU;

use num_complex::Complex64;

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated complex sum (real and imaginary parts independently).
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedComplex {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl CompensatedComplex {
    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// `e_p(k) = exp(2 pi i k / p)` evaluated with the angle reduced to
/// `[-pi, pi]`.
pub fn unit_phase(k: u64, p: u64) -> Complex64 {
    let k = k % p;
    let angle = if 2 * k <= p {
        TAU * (k as f64) / (p as f64)
    } else {
        -TAU * ((p - k) as f64) / (p as f64)
    };
    let (s, c) = angle.sin_cos();
    Complex64::new(c, s)
}

/// `e_p(k)` for every `k in 0..p`, 16 bytes per entry.
#[derive(Debug, Clone)]
pub struct PhaseTable {
    p: u64,
    table: Vec<Complex64>,
}

impl PhaseTable {
    pub fn new(p: u64) -> Self {
        let table = (0..p).map(|k| unit_phase(k, p)).collect();
        Self { p, table }
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.p
    }

    /// `e_p(k)` for `k` already reduced mod `p`.
    #[inline]
    pub fn get(&self, k: u64) -> Complex64 {
        self.table[k as usize]
    }
}
