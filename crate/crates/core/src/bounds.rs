//! Closed-form upper bounds for single and interval sums, the energy and
//! trilinear lemmas, and exact rational checks of the exponent arithmetic
//! that connects them.
//!
//! Every exponent is held as an exact rational and only converted to `f64`
//! in the final `powf`. Implied constants are not modelled: comparisons
//! against measured values are reported as ratios.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};

/// A reduced fraction with positive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RationalExponent(Ratio<i64>);

impl RationalExponent {
    pub fn new(numer: i64, denom: i64) -> Self {
        Self(Ratio::new(numer, denom))
    }

    pub fn integer(n: i64) -> Self {
        Self(Ratio::from_integer(n))
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn to_f64(self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    pub fn min(self, other: Self) -> Self {
        std::cmp::min(self, other)
    }
}

impl fmt::Display for RationalExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident) => {
        impl $tr for RationalExponent {
            type Output = Self;
            fn $method(self, rhs: Self) -> Self {
                Self(self.0.$method(rhs.0))
            }
        }
    };
}
forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for RationalExponent {
    type Output = Self;
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

fn q(n: i64, d: i64) -> RationalExponent {
    RationalExponent::new(n, d)
}

fn int(n: i64) -> RationalExponent {
    RationalExponent::integer(n)
}

/// `x^e` with `e` converted at the last moment.
pub fn pow_rational(x: f64, e: RationalExponent) -> f64 {
    x.powf(e.to_f64())
}

/// Exponent of `H` in the single-sum bound `H^{2689/2880} p^{1/72}`.
pub fn thm1_h_exponent() -> RationalExponent {
    q(2689, 2880)
}

/// Exponent of `p` in the single-sum bound.
pub fn thm1_p_exponent() -> RationalExponent {
    q(1, 72)
}

/// Exponent of `H` inside the first interval-bound parameter, `2 + 11/20`.
pub fn thm2_first_h_exponent() -> RationalExponent {
    int(2) + q(11, 20)
}

/// Exponent of `H` inside the short-interval parameter, `3 + 31/40`.
pub fn thm3_h_exponent() -> RationalExponent {
    int(3) + q(31, 40)
}

fn check_positive(vals: &[(&str, f64)]) -> Result<()> {
    for (name, v) in vals {
        if !(v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidInput(format!(
                "{name} = {v} must be positive"
            )));
        }
    }
    Ok(())
}

/// `1 + H/N + NH/p + H^{3/4}/p^{1/4}`.
pub fn gamma(p: f64, n: f64, h: f64) -> f64 {
    let quarter = q(1, 4);
    1.0 + h / n + n * h / p + pow_rational(h, q(3, 4)) / pow_rational(p, quarter)
}

/// Derived parameters of the interval bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundParams {
    pub p: f64,
    pub n: f64,
    pub h: f64,
    pub gamma: f64,
    /// `p Gamma / (N H^{2+11/20})`.
    pub delta1: f64,
    /// `p Gamma / (N H^3)`.
    pub delta2: f64,
    /// `p Gamma / (N H^{3+31/40})`.
    pub delta: f64,
}

impl BoundParams {
    pub fn new(p: f64, n: f64, h: f64) -> Result<Self> {
        check_positive(&[("p", p), ("N", n), ("H", h)])?;
        let g = gamma(p, n, h);
        Ok(Self {
            p,
            n,
            h,
            gamma: g,
            delta1: p * g / (n * pow_rational(h, thm2_first_h_exponent())),
            delta2: p * g / (n * h.powi(3)),
            delta: p * g / (n * pow_rational(h, thm3_h_exponent())),
        })
    }
}

/// A bound value plus whether the inputs lie in the range where the bound
/// is claimed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bound {
    pub value: f64,
    pub in_range: bool,
}

/// `H^{2689/2880} p^{1/72}`, claimed for `p^{1/4} < H < p^{1/2}`.
pub fn thm1_bound(p: f64, h: f64) -> Result<Bound> {
    check_positive(&[("p", p), ("H", h)])?;
    Ok(Bound {
        value: pow_rational(h, thm1_h_exponent()) * pow_rational(p, thm1_p_exponent()),
        in_range: h.powi(4) > p && h * h < p,
    })
}

/// `NH min(delta1^{1/4}, delta2^{1/6})`, claimed for `H < p^{1/2}`.
pub fn thm2_bound(p: f64, n: f64, h: f64) -> Result<Bound> {
    let bp = BoundParams::new(p, n, h)?;
    let factor = pow_rational(bp.delta1, q(1, 4)).min(pow_rational(bp.delta2, q(1, 6)));
    Ok(Bound {
        value: n * h * factor,
        in_range: h * h < p,
    })
}

/// `NH delta^{1/24}`, claimed for `H < p^{1/2}` and intervals avoiding 0.
pub fn thm3_bound(p: f64, n: f64, h: f64) -> Result<Bound> {
    let bp = BoundParams::new(p, n, h)?;
    Ok(Bound {
        value: n * h * pow_rational(bp.delta, q(1, 24)),
        in_range: h * h < p,
    })
}

/// Right-hand sides of the `T_2`, `T_3` and `J` lemmas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaBounds {
    /// `H^{49/20} log^{1/5} H`; `None` when `H < 2`.
    pub t2: Option<f64>,
    /// `H^4 log H`; `None` when `H < 2`.
    pub t3: Option<f64>,
    /// `H^2 + NH + N^2H^2/p + NH^{7/4}/p^{1/4}`, without the `H^2` term when
    /// the interval starts at the origin.
    pub j: f64,
    pub j_terms: u8,
}

pub fn lemma_bounds(p: f64, n: f64, h: f64, starts_at_origin: bool) -> LemmaBounds {
    let log_ok = h >= 2.0;
    let log_h = h.ln();
    let mut j = n * h + n * n * h * h / p + n * pow_rational(h, q(7, 4)) / pow_rational(p, q(1, 4));
    if !starts_at_origin {
        j += h * h;
    }
    LemmaBounds {
        t2: log_ok.then(|| pow_rational(h, q(49, 20)) * pow_rational(log_h, q(1, 5))),
        t3: log_ok.then(|| h.powi(4) * log_h),
        j,
        j_terms: if starts_at_origin { 3 } else { 4 },
    }
}

/// `p^{1/4} |X|^{3/4} |Y|^{3/4} |Z|^{7/8}`.
pub fn trilinear_bound(size_x: f64, size_y: f64, size_z: f64, p: f64) -> f64 {
    let three_quarters = q(3, 4);
    pow_rational(p, q(1, 4))
        * pow_rational(size_x, three_quarters)
        * pow_rational(size_y, three_quarters)
        * pow_rational(size_z, q(7, 8))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    SingleSum,
    IntervalMoment,
    ShortInterval,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::SingleSum => "thm1",
            BoundKind::IntervalMoment => "thm2",
            BoundKind::ShortInterval => "thm3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseId {
    pub p: u64,
    pub h: u64,
    pub n: Option<u64>,
    pub l: Option<i64>,
}

/// A measured quantity set against a closed-form bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub case: CaseId,
    pub bound: BoundKind,
    pub empirical: f64,
    pub theoretical: f64,
    pub ratio: f64,
    /// The bound beats the trivial bound (`H` for single sums, `NH` otherwise).
    pub nontrivial: bool,
    pub in_range: bool,
}

impl BoundReport {
    pub fn new(case: CaseId, bound: BoundKind, empirical: f64, theoretical: Bound) -> Self {
        let trivial = match bound {
            BoundKind::SingleSum => case.h as f64,
            _ => case.n.unwrap_or(1) as f64 * case.h as f64,
        };
        Self {
            case,
            bound,
            empirical,
            theoretical: theoretical.value,
            ratio: empirical / theoretical.value,
            nontrivial: theoretical.value < trivial,
            in_range: theoretical.in_range,
        }
    }
}

// --- exponent bookkeeping -------------------------------------------------
//
// Below, every quantity is a power of H: p = H^k and N = H^nu, with
// Gamma = 1. Bounds then become H^{exponent}.

/// Exponent of `H` in the single-sum bound when `p = H^k`.
pub fn thm1_exponent_at(k: RationalExponent) -> RationalExponent {
    thm1_h_exponent() + thm1_p_exponent() * k
}

/// Exponent of `H` in the interval-moment bound when `p = H^k`, `N = H^nu`,
/// `Gamma = 1`, `H > 1`.
pub fn thm2_exponent_at(k: RationalExponent, nu: RationalExponent) -> RationalExponent {
    let d1 = k - nu - thm2_first_h_exponent();
    let d2 = k - nu - int(3);
    nu + int(1) + (d1 * q(1, 4)).min(d2 * q(1, 6))
}

/// Exponent of `H` in the short-interval bound when `p = H^k`, `N = H^nu`,
/// `Gamma = H^g`.
pub fn thm3_exponent_at(
    k: RationalExponent,
    nu: RationalExponent,
    g: RationalExponent,
) -> RationalExponent {
    nu + int(1) + (k + g - nu - thm3_h_exponent()) * q(1, 24)
}

/// One exact identity or inequality between exponents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub statement: String,
    pub pass: bool,
}

fn identity(
    name: &'static str,
    lhs: RationalExponent,
    rhs: RationalExponent,
    what: &str,
) -> IdentityCheck {
    IdentityCheck {
        name,
        statement: format!("{what}: {lhs} = {rhs}"),
        pass: lhs == rhs,
    }
}

/// Exact-arithmetic checks of the exponent relations behind the bounds.
pub fn exponent_identity_suite() -> Vec<IdentityCheck> {
    let one = int(1);
    let mut out = Vec::new();

    // (i) H = p^{1/4}, i.e. p = H^4.
    out.push(identity(
        "single-sum-at-quarter-power",
        thm1_exponent_at(int(4)),
        one - q(31, 2880),
        "2689/2880 + 4/72 vs 1 - 31/2880",
    ));

    // (ii) N = H = p^{1/4}, Gamma = 1.
    out.push(identity(
        "short-interval-at-quarter-power",
        thm3_exponent_at(int(4), one, int(0)),
        int(2) - q(31, 960),
        "N = H = p^(1/4): short-interval exponent vs 2 - 31/960",
    ));

    // (iii) N = H = p^{1/3}, Gamma = 1.
    out.push(identity(
        "interval-moment-at-third-power",
        thm2_exponent_at(int(3), one),
        int(2) - q(1, 6),
        "N = H = p^(1/3): interval-moment exponent vs 2 - 1/6",
    ));

    // (iv) ordering of the savings.
    let (a, b, c) = (q(31, 960), q(31, 2880), q(175, 9_437_184));
    out.push(IdentityCheck {
        name: "saving-ordering",
        statement: format!("{a} > {b} > {c}"),
        pass: a > b && b > c,
    });

    // (v) H = p^{1/4}, N = p^x with x < 1/4, so Gamma ~ H/N = p^{1/4 - x}.
    // In powers of p the short-interval bound is linear in x, as is the
    // bound N H^{1 - 31/2880} from the single-sum result; they cross at x*.
    let quarter = q(1, 4);
    let short_at = |x: RationalExponent| {
        let gamma = quarter - x;
        let delta = one + gamma - x - quarter * thm3_h_exponent();
        x + quarter + delta * q(1, 24)
    };
    let direct_at = |x: RationalExponent| x + quarter * (one - q(31, 2880));
    let f0 = short_at(int(0)) - direct_at(int(0));
    let slope = (short_at(one) - direct_at(one)) - f0;
    let crossing = -f0 / slope;
    out.push(IdentityCheck {
        name: "short-interval-crossover",
        statement: format!(
            "H = p^(1/4): short-interval bound beats N H^(1-31/2880) for N > p^x*, x* = {crossing} (expected 89/480, slope {slope})"
        ),
        pass: crossing == q(89, 480) && slope < int(0) && crossing < quarter,
    });

    // (vi) closing arithmetic of the single-sum argument.
    let penult = int(2) + int(2) + q(31, 40);
    let final_h = -(penult / int(72));
    out.push(IdentityCheck {
        name: "single-sum-closing-exponents",
        statement: format!(
            "H^2 H^2 H^(31/40) = H^{penult}; 1 + ({final_h}) = {}; at p = H^2 saving {}",
            one + final_h,
            -(final_h + q(2, 72))
        ),
        pass: penult == q(191, 40)
            && final_h == -q(191, 2880)
            && one + final_h == thm1_h_exponent()
            && -(final_h + q(2, 72)) == q(37, 960),
    });

    // (vii) Delta cascade: D1 >= D^3, D2 >= D1^3, D3 >= D2^2.
    let cascade = int(6) + int(4) * int(3) + int(3) * int(2) * int(3) * int(3);
    out.push(identity(
        "single-sum-cascade-degree",
        cascade,
        int(72),
        "D^6 D1^4 D3^3 >= D^(6 + 4*3 + 3*2*3*3)",
    ));

    // (viii) short-interval closing: D^4 D1^8 D3^6 with D1 >= D, D3 >= D1^6,
    // and H^{6+31/20} is the square of H^{3+31/40}.
    let degree = int(4) + int(8) + int(6) * int(6);
    out.push(IdentityCheck {
        name: "short-interval-closing-exponents",
        statement: format!(
            "D^4 D1^8 D3^6 >= D^{degree}; 6 + 31/20 = 2 * ({})",
            thm3_h_exponent()
        ),
        pass: degree == int(48)
            && int(6) + q(31, 20) == int(2) * thm3_h_exponent()
            && int(48) == int(2) * int(24),
    });

    out
}
