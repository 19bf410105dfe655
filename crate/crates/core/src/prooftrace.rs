//! Replays the dyadic construction behind the single-sum bound on a concrete
//! `(p, H, a)` and records every inequality that holds deterministically.
//!
//! Three pigeonhole stages are run. Stage 1 works over triples of subgroup
//! elements, stage 2 over triples again, stage 3 over pairs. In every stage
//! the quantity attached to a tuple depends only on its sum (or difference)
//! `lambda`, so a stage runs over residues `lambda` weighted by the number of
//! tuples hitting them: `r_3(lambda)` for triples and the difference count
//! for pairs. That turns `O(H^3)` tuples into `O(p)` residues.
//!
//! Each asserted inequality is stated with measured quantities (actual set
//! sizes, actual stage averages), which makes it a theorem. The nominal
//! lower bounds of the asymptotic argument carry implied constants and are
//! only reported.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::accum::{CompensatedComplex, CompensatedSum, PhaseTable};
use crate::bounds::{pow_rational, trilinear_bound, RationalExponent};
use crate::energy::{representation_counts, EnergyProfile, IntervalProductProfile};
use crate::error::{Error, Result};
use crate::expsum::{all_sums, interval_subgroup_sum, Interval, Strategy, SumConfig, SumTable};
use crate::field::mul_mod;
use crate::subgroup::Subgroup;
use crate::transform::exponential_sums;

/// Relative slack for inequalities between floating quantities.
pub const FLOAT_TOLERANCE: f64 = 1e-6;

/// Default cap on `|X| |Y| |Z|` phase evaluations in [`trilinear_eval`].
pub const DEFAULT_TRILINEAR_BUDGET: u64 = 1_000_000_000;

/// One recorded inequality `lhs >= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Decided in exact integer arithmetic rather than with [`FLOAT_TOLERANCE`].
    pub exact: bool,
    pub pass: bool,
}

impl Check {
    pub fn float_ge(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let pass = lhs.is_finite() && rhs.is_finite() && lhs >= rhs - FLOAT_TOLERANCE * rhs.abs();
        Self {
            name: name.into(),
            lhs,
            rhs,
            exact: false,
            pass,
        }
    }

    pub fn exact_ge(name: impl Into<String>, lhs: u128, rhs: u128) -> Self {
        Self {
            name: name.into(),
            lhs: lhs as f64,
            rhs: rhs as f64,
            exact: true,
            pass: lhs >= rhs,
        }
    }
}

/// A measured quantity set next to its nominal (implied-constant) value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reported {
    pub name: String,
    pub measured: f64,
    pub nominal: f64,
    pub ratio: f64,
}

impl Reported {
    fn new(name: impl Into<String>, measured: f64, nominal: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            nominal,
            ratio: measured / nominal,
        }
    }
}

/// A residue with the stage quantity attached to it and the number of
/// tuples that land on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageValue {
    pub key: u64,
    pub magnitude: f64,
    pub multiplicity: u64,
}

/// Outcome of one dyadic pigeonhole step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicStage {
    /// Upper end of the magnitude range; bucket `i` is
    /// `(scale 2^{-i-1}, scale 2^{-i}]`.
    pub scale: f64,
    /// Values strictly below this are discarded.
    pub floor: f64,
    /// Chosen bucket `i_0`.
    pub index: u32,
    /// `2^{-i_0-1}`, the normalized lower bound every member exceeds.
    pub delta: f64,
    /// Residues of bucket `i_0`, ascending.
    pub members: Vec<StageValue>,
    /// `sum multiplicity * magnitude` over all input values.
    pub total: f64,
    /// The same sum over values at or above the floor.
    pub retained_total: f64,
    pub nonempty_buckets: usize,
    /// `scale 2^{-i_0}` times the multiplicity of bucket `i_0`.
    pub bucket_weight: f64,
    /// Multiplicity of bucket `i_0`, i.e. the number of tuples selected.
    pub group_size: u64,
    /// `sum multiplicity * magnitude` over bucket `i_0`.
    pub member_total: f64,
}

impl DyadicStage {
    /// Average normalized magnitude over the selected tuples.
    pub fn measured_delta(&self) -> f64 {
        self.member_total / (self.scale * self.group_size as f64)
    }

    /// Member residues other than 0.
    pub fn nonzero_keys(&self) -> Vec<u64> {
        self.members
            .iter()
            .filter(|v| v.key != 0)
            .map(|v| v.key)
            .collect()
    }

    /// `ceil(log2(scale / floor)) + 1`, the most buckets values in
    /// `[floor, scale]` can occupy.
    pub fn bucket_capacity(&self) -> u64 {
        (self.scale / self.floor).log2().ceil().max(0.0) as u64 + 1
    }
}

fn bucket_of(magnitude: f64, scale: f64) -> u32 {
    let mut i = 0u32;
    let mut lower = scale * 0.5;
    while magnitude <= lower {
        i += 1;
        lower *= 0.5;
    }
    i
}

/// Drops values below `floor`, buckets the rest dyadically below `scale` and
/// keeps the bucket maximizing `scale 2^{-i} * multiplicity` (smallest `i`
/// on ties).
pub fn dyadic_stage(values: &[StageValue], scale: f64, floor: f64) -> Result<DyadicStage> {
    if !(scale > 0.0 && floor > 0.0) {
        return Err(Error::InvalidInput(format!(
            "scale {scale} and floor {floor} must be positive"
        )));
    }
    let mut total = CompensatedSum::default();
    let mut retained = CompensatedSum::default();
    let mut mass: Vec<u64> = Vec::new();
    let mut indexed: Vec<(u32, StageValue)> = Vec::new();
    for v in values {
        let w = v.multiplicity as f64 * v.magnitude;
        total.add(w);
        if v.magnitude < floor || v.multiplicity == 0 {
            continue;
        }
        retained.add(w);
        let i = bucket_of(v.magnitude, scale);
        if mass.len() <= i as usize {
            mass.resize(i as usize + 1, 0);
        }
        mass[i as usize] += v.multiplicity;
        indexed.push((i, *v));
    }
    if indexed.is_empty() {
        return Err(Error::EmptyTrace(format!(
            "every value lies below the floor {floor}"
        )));
    }

    let weight = |i: usize| scale * (0.5f64).powi(i as i32) * mass[i] as f64;
    let mut best = 0usize;
    for i in 0..mass.len() {
        if weight(i) > weight(best) {
            best = i;
        }
    }
    let mut members: Vec<StageValue> = indexed
        .iter()
        .filter(|(i, _)| *i as usize == best)
        .map(|&(_, v)| v)
        .collect();
    members.sort_by_key(|v| v.key);
    let member_total = members
        .iter()
        .map(|v| v.multiplicity as f64 * v.magnitude)
        .collect::<CompensatedSum>()
        .value();

    Ok(DyadicStage {
        scale,
        floor,
        index: best as u32,
        delta: (0.5f64).powi(best as i32 + 1),
        members,
        total: total.value(),
        retained_total: retained.value(),
        nonempty_buckets: mass.iter().filter(|&&m| m > 0).count(),
        bucket_weight: weight(best),
        group_size: mass[best],
        member_total,
    })
}

/// `sum_{z in Z} |sum_{x in X} sum_{y in Y} e_p(a x y z)|` by direct
/// evaluation, compensated per `z` and reduced in `Z` order.
pub fn trilinear_eval(x: &[u64], y: &[u64], z: &[u64], a: u64, p: u64, budget: u64) -> Result<f64> {
    let terms = x.len() as u128 * y.len() as u128 * z.len() as u128;
    if terms > budget as u128 {
        return Err(Error::Budget(format!(
            "trilinear sum has {terms} terms, budget is {budget}"
        )));
    }
    let phases = PhaseTable::new(p);
    let per_z: Vec<f64> = z
        .par_iter()
        .map(|&zv| {
            let az = mul_mod(a % p, zv, p);
            let mut acc = CompensatedComplex::default();
            for &xv in x {
                let axz = mul_mod(az, xv, p);
                for &yv in y {
                    acc.add(phases.get(mul_mod(axz, yv, p)));
                }
            }
            acc.value().norm()
        })
        .collect();
    Ok(per_z.into_iter().collect::<CompensatedSum>().value())
}

/// Exact Cauchy-Schwarz cardinality step `|set u {0}| >= |G|^2 / energy`,
/// with the nominal lower bound of the asymptotic argument alongside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CardinalityCheck {
    pub check: Check,
    pub nominal: Reported,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    TripleSum,
    Difference,
}

pub fn check_energy_cardinality(
    label: &str,
    set_size: u64,
    group_order: u64,
    stage: &DyadicStage,
    prev_delta: f64,
    energy: u128,
    kind: SetKind,
) -> CardinalityCheck {
    let (stage_delta, group_size) = (stage.delta, stage.group_size);
    let lhs = (set_size as u128 + 1) * energy;
    let rhs = group_size as u128 * group_size as u128;
    let h = group_order as f64;
    let nominal = match kind {
        SetKind::TripleSum => h * h * prev_delta.powi(6) / (stage_delta * stage_delta),
        SetKind::Difference => {
            pow_rational(h, RationalExponent::new(31, 20)) * prev_delta.powi(4)
                / (stage_delta * stage_delta)
        }
    };
    CardinalityCheck {
        check: Check::exact_ge(format!("{label}: (|set|+1) * energy >= |G|^2"), lhs, rhs),
        nominal: Reported::new(
            format!("{label}: |set| vs nominal"),
            set_size as f64,
            nominal,
        ),
    }
}

/// The cascade of normalized thresholds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cascade {
    pub a: u64,
    /// `|S_a| / H`.
    pub delta: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub indices: [u32; 3],
    /// Stage averages over the selected tuples.
    pub measured: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSets {
    pub x: Vec<u64>,
    /// `J(x)`: representations of `x` by selected triples.
    pub x_weights: Vec<u64>,
    pub y: Vec<u64>,
    pub z: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageSummary {
    pub name: &'static str,
    pub index: u32,
    pub delta: f64,
    pub measured_delta: f64,
    pub scale: f64,
    pub floor: f64,
    pub total: f64,
    pub retained_total: f64,
    pub nonempty_buckets: usize,
    pub group_size: u64,
    pub set_size: usize,
}

impl StageSummary {
    fn new(name: &'static str, st: &DyadicStage, set_size: usize) -> Self {
        Self {
            name,
            index: st.index,
            delta: st.delta,
            measured_delta: st.measured_delta(),
            scale: st.scale,
            floor: st.floor,
            total: st.total,
            retained_total: st.retained_total,
            nonempty_buckets: st.nonempty_buckets,
            group_size: st.group_size,
            set_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrilinearSummary {
    /// `sum_{z in Z} |sum_x sum_y e_p(axyz)|` through the transform of `X`.
    pub factored: f64,
    /// The same sum by direct evaluation, when within budget.
    pub direct: Option<f64>,
    pub bound: f64,
    pub ratio: f64,
}

/// Everything produced by [`build_trace`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub p: u64,
    pub order: u64,
    pub a: u64,
    pub degenerate: Option<String>,
    pub cascade: Option<Cascade>,
    pub sets: Option<TraceSets>,
    pub stages: Vec<StageSummary>,
    pub checks: Vec<Check>,
    pub reported: Vec<Reported>,
    pub trilinear: Option<TrilinearSummary>,
}

impl Trace {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    fn degenerate(p: u64, order: u64, a: u64, reason: String) -> Self {
        Self {
            p,
            order,
            a,
            degenerate: Some(reason),
            cascade: None,
            sets: None,
            stages: Vec::new(),
            checks: Vec::new(),
            reported: Vec::new(),
            trilinear: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TraceConfig {
    pub trilinear_budget: u64,
    pub dense_limit: u64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            trilinear_budget: DEFAULT_TRILINEAR_BUDGET,
            dense_limit: crate::expsum::DEFAULT_DENSE_LIMIT,
        }
    }
}

/// Precomputed inputs shared by traces of the same subgroup.
pub struct TraceInputs {
    pub table: SumTable,
    pub r2: EnergyProfile,
    pub r3: EnergyProfile,
}

impl TraceInputs {
    pub fn new(s: &Subgroup, cfg: &TraceConfig) -> Result<Self> {
        let table = all_sums(
            s,
            &SumConfig {
                strategy: Strategy::Auto,
                dense_limit: cfg.dense_limit,
                keep_values: false,
            },
        )?;
        Ok(Self {
            table,
            r2: representation_counts(s, 2)?,
            r3: representation_counts(s, 3)?,
        })
    }
}

/// Runs the full construction for `(p, H, a)`.
pub fn build_trace(s: &Subgroup, a: u64, cfg: &TraceConfig) -> Result<Trace> {
    let inputs = TraceInputs::new(s, cfg)?;
    build_trace_with(s, a, &inputs, cfg)
}

/// `sum_{x in X} |sum_lambda r(lambda) e_p(a x lambda)|`, evaluated from the
/// representation counts rather than from the sum table.
fn cubed_sums_via_counts(x: &[u64], r: &EnergyProfile, a: u64, phases: &PhaseTable) -> f64 {
    let p = r.p();
    let support: Vec<(u64, u64)> = r
        .counts()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(l, &c)| (l as u64, c))
        .collect();
    let per_x: Vec<f64> = x
        .par_iter()
        .map(|&xv| {
            let ax = mul_mod(a, xv, p);
            let mut acc = CompensatedComplex::default();
            for &(l, c) in &support {
                acc.add(phases.get(mul_mod(ax, l, p)) * c as f64);
            }
            acc.value().norm()
        })
        .collect();
    per_x.into_iter().collect::<CompensatedSum>().value()
}

pub fn build_trace_with(
    s: &Subgroup,
    a: u64,
    inputs: &TraceInputs,
    cfg: &TraceConfig,
) -> Result<Trace> {
    let p = s.p();
    let order = s.order();
    let h = order as f64;
    if a.is_multiple_of(p) {
        return Err(Error::InvalidInput(format!(
            "a = {a} is divisible by p = {p}"
        )));
    }
    let a = a % p;
    let table = &inputs.table;
    let (r2, r3) = (&inputs.r2, &inputs.r3);
    let (t2, t3) = (r2.energy(), r3.energy());

    let s_a = table.magnitude(a);
    if s.is_full_group() {
        return Ok(Trace::degenerate(
            p,
            order,
            a,
            "full group: every nonzero sum has modulus 1".into(),
        ));
    }
    if s_a <= 1.0 + 1e-9 {
        return Ok(Trace::degenerate(
            p,
            order,
            a,
            format!("|S_a| = {s_a} <= 1"),
        ));
    }
    let delta = s_a / h;
    let phases = PhaseTable::new(p);
    let mut checks = Vec::new();
    let mut reported = Vec::new();
    let mut stages = Vec::new();

    // Stage 1: triples (x1, x2, x3), quantity |S_{a lambda}|, lambda = x1+x2+x3.
    let r3_support: Vec<u64> = (0..p).filter(|&l| r3.count(l) > 0).collect();
    let values1: Vec<StageValue> = r3_support
        .iter()
        .map(|&l| StageValue {
            key: l,
            magnitude: table.magnitude(mul_mod(a, l, p)),
            multiplicity: r3.count(l),
        })
        .collect();
    let lower1 = h * s_a.powi(3); // H^4 Delta^3
    let st1 = dyadic_stage(&values1, h, lower1 / (2.0 * h.powi(3)))?;
    push_stage_checks(&mut checks, "stage 1", &st1, lower1);
    let x = st1.nonzero_keys();
    if x.is_empty() {
        return Err(Error::EmptyTrace("stage 1 selected no nonzero sums".into()));
    }
    let x_weights: Vec<u64> = x.iter().map(|&v| r3.count(v)).collect();
    let card_x = check_energy_cardinality(
        "stage 1 |X|",
        x.len() as u64,
        order,
        &st1,
        delta,
        t3,
        SetKind::TripleSum,
    );
    checks.push(card_x.check);
    reported.push(card_x.nominal);
    reported.push(Reported::new(
        "stage 1: |G1| vs H^3 D^3 / D1",
        st1.group_size as f64,
        h.powi(3) * delta.powi(3) / st1.delta,
    ));

    // Every x in X has |S_{ax}| > H D1; the Hoelder step then lower-bounds
    // sum_x |S_{ax}|^3, evaluated independently from the r_3 counts.
    let f_sum: f64 = x
        .iter()
        .map(|&v| table.magnitude(mul_mod(a, v, p)))
        .collect::<CompensatedSum>()
        .value();
    let nx = x.len() as f64;
    checks.push(Check::float_ge(
        "stage 1: sum_X |S_ax| >= H |X| D1",
        f_sum,
        h * nx * st1.delta,
    ));
    let cubed = cubed_sums_via_counts(&x, r3, a, &phases);
    let holder_rhs = f_sum.powi(3) / (nx * nx);
    checks.push(Check::float_ge(
        "stage 1: Hoelder sum_X |sum_y1y2y3 e(ax(y1+y2+y3))| >= (sum_X |S_ax|)^3 / |X|^2",
        cubed,
        holder_rhs,
    ));

    // Stage 2: triples (y1, y2, y3), quantity sum_{x in X} |S_{a x lambda}|.
    let values2: Vec<StageValue> = r3_support
        .par_iter()
        .map(|&l| {
            let al = mul_mod(a, l, p);
            let g = x
                .iter()
                .map(|&xv| table.magnitude(mul_mod(al, xv, p)))
                .collect::<CompensatedSum>()
                .value();
            StageValue {
                key: l,
                magnitude: g,
                multiplicity: r3.count(l),
            }
        })
        .collect();
    let lower2 = h * cubed; // H * sum_X |S_ax|^3 >= H^4 |X| D1^3
    let st2 = dyadic_stage(&values2, h * nx, lower2 / (2.0 * h.powi(3)))?;
    push_stage_checks(&mut checks, "stage 2", &st2, lower2);
    let y = st2.nonzero_keys();
    if y.is_empty() {
        return Err(Error::EmptyTrace("stage 2 selected no nonzero sums".into()));
    }
    let ny = y.len() as f64;
    let card_y = check_energy_cardinality(
        "stage 2 |Y|",
        y.len() as u64,
        order,
        &st2,
        st1.delta,
        t3,
        SetKind::TripleSum,
    );
    checks.push(card_y.check);
    reported.push(card_y.nominal);
    reported.push(Reported::new(
        "stage 2: |G2| vs H^3 D1^3 / D2",
        st2.group_size as f64,
        h.powi(3) * st1.delta.powi(3) / st2.delta,
    ));
    let xy_sum: f64 = st2
        .members
        .iter()
        .filter(|v| v.key != 0)
        .map(|v| v.magnitude)
        .collect::<CompensatedSum>()
        .value();
    checks.push(Check::float_ge(
        "stage 2: sum_Y sum_X |S_axy| >= H |X| |Y| D2",
        xy_sum,
        h * nx * ny * st2.delta,
    ));

    // Stage 3: pairs (z1, z2), quantity |W(z1 - z2)| with
    // W(d) = sum_x sum_y e_p(a x y d) = sum_y F(a y d), F the transform of X.
    let mut x_indicator = vec![0.0; p as usize];
    for &v in &x {
        x_indicator[v as usize] = 1.0;
    }
    let f_hat = exponential_sums(&x_indicator);
    let w_of = |d: u64| -> Complex64 {
        let ad = mul_mod(a, d, p);
        let mut acc = CompensatedComplex::default();
        for &yv in &y {
            acc.add(f_hat[mul_mod(ad, yv, p) as usize]);
        }
        acc.value()
    };
    let mut diff_counts = vec![0u64; p as usize];
    for &z1 in s.elements() {
        for &z2 in s.elements() {
            diff_counts[((z1 + p - z2) % p) as usize] += 1;
        }
    }
    let diff_support: Vec<u64> = (0..p).filter(|&d| diff_counts[d as usize] > 0).collect();
    let w_values: Vec<Complex64> = diff_support.par_iter().map(|&d| w_of(d)).collect();

    // Cauchy-Schwarz: sum_{x,y} |S_axy|^2 >= (sum_{x,y} |S_axy|)^2 / (|X||Y|),
    // and sum_{x,y} |S_axy|^2 = sum_d r(d) W(d).
    let squares_direct: f64 = y
        .par_iter()
        .map(|&yv| {
            let ay = mul_mod(a, yv, p);
            x.iter()
                .map(|&xv| table.magnitude(mul_mod(ay, xv, p)).powi(2))
                .collect::<CompensatedSum>()
                .value()
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .collect::<CompensatedSum>()
        .value();
    let squares_via_w: f64 = diff_support
        .iter()
        .zip(&w_values)
        .map(|(&d, w)| diff_counts[d as usize] as f64 * w.re)
        .collect::<CompensatedSum>()
        .value();
    let lower3 = xy_sum * xy_sum / (nx * ny);
    checks.push(Check::float_ge(
        "stage 3: Cauchy-Schwarz sum_{X,Y} |S_axy|^2 >= (sum_{X,Y} |S_axy|)^2 / (|X||Y|)",
        squares_direct,
        lower3,
    ));
    checks.push(Check::float_ge(
        "stage 3: sum_{z1,z2} W(z1-z2) agrees with sum_{X,Y} |S_axy|^2 (lower side)",
        squares_via_w,
        squares_direct,
    ));
    checks.push(Check::float_ge(
        "stage 3: sum_{z1,z2} W(z1-z2) agrees with sum_{X,Y} |S_axy|^2 (upper side)",
        squares_direct,
        squares_via_w,
    ));
    // The H diagonal pairs z1 = z2 contribute exactly H |X| |Y|, which at
    // small Delta_2 can exceed the Cauchy-Schwarz bound. The pigeonhole runs
    // over off-diagonal pairs against |sum_{d != 0} r(d) W(d)|.
    let diagonal = h * nx * ny;
    let off_diagonal: f64 = diff_support
        .iter()
        .zip(&w_values)
        .filter(|(&d, _)| d != 0)
        .map(|(&d, w)| diff_counts[d as usize] as f64 * w.re)
        .collect::<CompensatedSum>()
        .value();
    checks.push(Check::float_ge(
        "stage 3: off-diagonal sum >= Cauchy-Schwarz bound - H|X||Y|",
        off_diagonal,
        lower3 - diagonal,
    ));
    let lower3_off = off_diagonal.abs();
    if lower3_off <= FLOAT_TOLERANCE * diagonal {
        return Ok(Trace::degenerate(
            p,
            order,
            a,
            format!("off-diagonal stage 3 sum vanishes: {off_diagonal}"),
        ));
    }
    let values3: Vec<StageValue> = diff_support
        .iter()
        .zip(&w_values)
        .filter(|(&d, _)| d != 0)
        .map(|(&d, w)| StageValue {
            key: d,
            magnitude: w.norm(),
            multiplicity: diff_counts[d as usize],
        })
        .collect();
    let st3 = dyadic_stage(&values3, nx * ny, lower3_off / (2.0 * h * h))?;
    push_stage_checks(&mut checks, "stage 3 (off-diagonal)", &st3, lower3_off);
    let z = st3.nonzero_keys();
    if z.is_empty() {
        return Err(Error::EmptyTrace(
            "stage 3 selected no nonzero differences".into(),
        ));
    }
    let nz = z.len() as f64;
    let card_z = check_energy_cardinality(
        "stage 3 |Z|",
        z.len() as u64,
        order,
        &st3,
        st2.delta,
        t2,
        SetKind::Difference,
    );
    checks.push(card_z.check);
    reported.push(card_z.nominal);
    reported.push(Reported::new(
        "stage 3: |G3| vs H^2 D2^2 / D3",
        st3.group_size as f64,
        h * h * st2.delta.powi(2) / st3.delta,
    ));

    // Final trilinear sum over (X, Y, Z).
    let factored: f64 = st3
        .members
        .iter()
        .filter(|v| v.key != 0)
        .map(|v| v.magnitude)
        .collect::<CompensatedSum>()
        .value();
    let direct = match trilinear_eval(&x, &y, &z, a, p, cfg.trilinear_budget) {
        Ok(v) => Some(v),
        Err(Error::Budget(_)) => None,
        Err(e) => return Err(e),
    };
    let measured_trilinear = direct.unwrap_or(factored);
    checks.push(Check::float_ge(
        "final: sum_Z |sum_X sum_Y e(axyz)| >= |X||Y||Z| D3",
        measured_trilinear,
        nx * ny * nz * st3.delta,
    ));
    if let Some(d) = direct {
        checks.push(Check::float_ge(
            "final: direct trilinear sum >= factored (agreement)",
            d,
            factored,
        ));
        checks.push(Check::float_ge(
            "final: factored trilinear sum >= direct (agreement)",
            factored,
            d,
        ));
    }
    let tri_bound = trilinear_bound(nx, ny, nz, p as f64);

    let cascade = Cascade {
        a,
        delta,
        delta1: st1.delta,
        delta2: st2.delta,
        delta3: st3.delta,
        indices: [st1.index, st2.index, st3.index],
        measured: [
            st1.measured_delta(),
            st2.measured_delta(),
            st3.measured_delta(),
        ],
    };

    // Asymptotic steps: reported only.
    let q = RationalExponent::new;
    reported.push(Reported::new(
        "large-Delta gate: Delta vs H^(-37/960)",
        delta,
        pow_rational(h, -q(37, 960)),
    ));
    reported.push(Reported::new(
        "cascade: D1 vs D^3",
        cascade.delta1,
        delta.powi(3),
    ));
    reported.push(Reported::new(
        "cascade: D2 vs D1^3",
        cascade.delta2,
        cascade.delta1.powi(3),
    ));
    reported.push(Reported::new(
        "cascade: D3 vs D2^2",
        cascade.delta3,
        cascade.delta2.powi(2),
    ));
    reported.push(Reported::new(
        "penultimate: p vs H^(191/40) D^6 D1^4 D3^3",
        p as f64,
        pow_rational(h, q(191, 40))
            * delta.powi(6)
            * cascade.delta1.powi(4)
            * cascade.delta3.powi(3),
    ));
    reported.push(Reported::new(
        "final: Delta vs p^(1/72) H^(-191/2880)",
        delta,
        pow_rational(p as f64, q(1, 72)) * pow_rational(h, -q(191, 2880)),
    ));
    reported.push(Reported::new(
        "trilinear lemma: sum vs p^(1/4)|X|^(3/4)|Y|^(3/4)|Z|^(7/8)",
        measured_trilinear,
        tri_bound,
    ));

    stages.push(StageSummary::new("stage 1", &st1, x.len()));
    stages.push(StageSummary::new("stage 2", &st2, y.len()));
    stages.push(StageSummary::new("stage 3", &st3, z.len()));

    Ok(Trace {
        p,
        order,
        a,
        degenerate: None,
        cascade: Some(cascade),
        sets: Some(TraceSets { x, x_weights, y, z }),
        stages,
        checks,
        reported,
        trilinear: Some(TrilinearSummary {
            factored,
            direct,
            bound: tri_bound,
            ratio: measured_trilinear / tri_bound,
        }),
    })
}

fn push_stage_checks(checks: &mut Vec<Check>, label: &str, st: &DyadicStage, lower: f64) {
    checks.push(Check::float_ge(
        format!("{label}: triangle inequality, total >= lower bound"),
        st.total,
        lower,
    ));
    checks.push(Check::float_ge(
        format!("{label}: discard, retained total >= lower bound / 2"),
        st.retained_total,
        lower / 2.0,
    ));
    checks.push(Check::float_ge(
        format!("{label}: pigeonhole, scale 2^-i0 |G| >= retained / buckets"),
        st.bucket_weight,
        st.retained_total / st.nonempty_buckets as f64,
    ));
    checks.push(Check::exact_ge(
        format!("{label}: bucket count <= ceil(log2(scale/floor)) + 1"),
        st.bucket_capacity() as u128,
        st.nonempty_buckets as u128,
    ));
}

/// `S_a(N,H)^{2m} <= (N^{2m-2} / H^2) J(N,H) p T_m(H)`, with `S_a(N,H)` from
/// the sum table and `J`, `T_m` exact.
pub fn moment_inequality_check(
    interval: &Interval,
    s: &Subgroup,
    a: u64,
    table: &SumTable,
    j: &IntervalProductProfile,
    energy: &EnergyProfile,
) -> Result<Check> {
    let m = energy.m();
    if m < 1 {
        return Err(Error::InvalidInput("m must be positive".into()));
    }
    let sum = interval_subgroup_sum(a, interval, table)?;
    let (n, h, p) = (interval.len() as f64, s.order() as f64, s.p() as f64);
    let rhs = n.powi(2 * m as i32 - 2) / (h * h) * j.j() as f64 * p * energy.energy() as f64;
    Ok(Check::float_ge(
        format!("moment m={m}: (N^(2m-2)/H^2) J p T_m >= S_a(N,H)^(2m)"),
        rhs,
        sum.powi(2 * m as i32),
    ))
}
