//! Full-spectrum exponential sums of a weight vector of prime length via a
//! chirp-z (Bluestein) reduction to a power-of-two cyclic convolution.
//!
//! For weights `w` of length `p` this returns `F(b) = sum_x w[x] e_p(b x)`
//! for every `b in 0..p`, using `b x = (b^2 + x^2 - (b - x)^2) / 2`.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::accum::unit_phase;

/// `exp(pi i k^2 / n)`, with `k^2` reduced mod `2n` before the angle is formed.
fn chirp(k: u64, n: u64) -> Complex64 {
    let two_n = 2 * n;
    let k = k % two_n;
    let sq = ((k as u128 * k as u128) % two_n as u128) as u64;
    unit_phase(sq, two_n)
}

/// `sum_x weights[x] * e_n(b x)` for all `b`, where `n = weights.len()`.
pub fn exponential_sums(weights: &[f64]) -> Vec<Complex64> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![Complex64::new(weights[0], 0.0)];
    }
    let n64 = n as u64;
    let m = (2 * n - 1).next_power_of_two();

    let chirps: Vec<Complex64> = (0..n64).map(|k| chirp(k, n64)).collect();

    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for (x, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            a[x] = chirps[x] * w;
        }
    }
    let mut c = vec![Complex64::new(0.0, 0.0); m];
    c[0] = chirps[0].conj();
    for k in 1..n {
        let v = chirps[k].conj();
        c[k] = v;
        c[m - k] = v;
    }

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    fwd.process(&mut a);
    fwd.process(&mut c);
    for (x, y) in a.iter_mut().zip(&c) {
        *x *= *y;
    }
    inv.process(&mut a);

    let scale = 1.0 / m as f64;
    (0..n).map(|b| chirps[b] * a[b] * scale).collect()
}
