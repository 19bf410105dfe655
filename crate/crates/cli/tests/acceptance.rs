//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any
//! criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::process::Command;
use std::time::{Duration, Instant};

use expsum::bounds::exponent_identity_suite;
use expsum::energy::{brute_force_t, energy_via_moments, j_count, representation_counts};
use expsum::expsum::all_sums;
use expsum::field::{divisors, is_prime};
use expsum::harness::{run_scan, ScanConfig};
use expsum::prooftrace::{build_trace_with, moment_inequality_check, TraceConfig, TraceInputs};
use expsum::{Interval, Strategy, Subgroup, SumConfig};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Relative tolerance for Parseval.
const PARSEVAL_TOL: f64 = 1e-6;
/// Absolute tolerance for `|S_a| = 1` on the full group.
const COMPLETE_SUM_TOL: f64 = 1e-9;
/// Absolute tolerance for `|2 S_a + 1| = sqrt(p)` at index 2.
const GAUSS_TOL: f64 = 1e-6;
/// Relative tolerance for the pigeonhole floor on the scanned maxima.
const FLOOR_TOL: f64 = 1e-9;
const SEED: u64 = 0x5eed_2026;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn table(s: &Subgroup, strategy: Strategy, keep_values: bool) -> expsum::SumTable {
    all_sums(
        s,
        &SumConfig {
            strategy,
            keep_values,
            ..SumConfig::default()
        },
    )
    .expect("sum table")
}

fn random_case(rng: &mut StdRng, p_max: u64, h_max: u64) -> (u64, u64) {
    loop {
        let p = rng.gen_range(5..=p_max);
        if !is_prime(p).unwrap() {
            continue;
        }
        let ds: Vec<u64> = divisors(p - 1)
            .unwrap()
            .into_iter()
            .filter(|&d| d <= h_max)
            .collect();
        return (p, ds[rng.gen_range(0..ds.len())]);
    }
}

fn c1_identities() -> Outcome {
    let suite = exponent_identity_suite();
    let failed: Vec<&str> = suite.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    let named = [
        "single-sum-at-quarter-power",
        "interval-moment-at-third-power",
        "short-interval-at-quarter-power",
        "saving-ordering",
    ];
    let missing: Vec<&str> = named
        .iter()
        .copied()
        .filter(|n| !suite.iter().any(|c| c.name == *n))
        .collect();
    outcome(
        failed.is_empty() && missing.is_empty(),
        format!(
            "{}/{} identities exact, failed {failed:?}, missing {missing:?}",
            suite.len() - failed.len(),
            suite.len()
        ),
    )
}

fn c2_parseval() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for p in [13u64, 101, 257, 1009] {
        for h in divisors(p - 1).unwrap() {
            let s = Subgroup::new(p, h).unwrap();
            for strategy in [Strategy::Direct, Strategy::Transform] {
                let t = table(&s, strategy, false);
                worst = worst.max(t.parseval_error());
                count += 1;
            }
        }
    }
    outcome(
        worst <= PARSEVAL_TOL,
        format!("{count} tables, worst relative error {worst:.3e}"),
    )
}

fn c3_complete_and_gauss() -> Outcome {
    let (mut worst_full, mut worst_gauss) = (0.0f64, 0.0f64);
    for p in [13u64, 101, 1009] {
        let full = table(&Subgroup::new(p, p - 1).unwrap(), Strategy::Auto, false);
        for a in 1..p {
            worst_full = worst_full.max((full.magnitude(a) - 1.0).abs());
        }
        let half = table(
            &Subgroup::new(p, (p - 1) / 2).unwrap(),
            Strategy::Auto,
            true,
        );
        let values = half.values().unwrap();
        for a in 1..p {
            let g = (values[a as usize] * 2.0 + 1.0).norm();
            worst_gauss = worst_gauss.max((g - (p as f64).sqrt()).abs());
        }
    }
    outcome(
        worst_full <= COMPLETE_SUM_TOL && worst_gauss <= GAUSS_TOL,
        format!("max ||S_a| - 1| = {worst_full:.3e}, max ||2S_a+1| - sqrt p| = {worst_gauss:.3e}"),
    )
}

fn c4_energy() -> Outcome {
    let mut cases = 0;
    let mut mismatches = Vec::new();
    let mut saw_pair = false;
    for p in [13u64, 31, 61, 101, 181] {
        for h in divisors(p - 1).unwrap().into_iter().filter(|&h| h <= 12) {
            let s = Subgroup::new(p, h).unwrap();
            let t = table(&s, Strategy::Auto, false);
            for m in [2u32, 3] {
                let brute = brute_force_t(&s, m).unwrap();
                let conv = representation_counts(&s, m).unwrap().energy();
                let moment = energy_via_moments(&t, m).round() as u128;
                if !(brute == conv && conv == moment) {
                    mismatches.push((p, h, m, brute, conv, moment));
                }
                if h == 2 && m == 2 {
                    saw_pair = true;
                    if brute != 6 {
                        mismatches.push((p, h, m, brute, conv, moment));
                    }
                }
                cases += 1;
            }
        }
    }
    outcome(
        mismatches.is_empty() && saw_pair,
        format!("{cases} (p, H, m) cases, T_2({{1, p-1}}) = 6 checked, mismatches {mismatches:?}"),
    )
}

fn c5_j_count() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut mismatches = Vec::new();
    for _ in 0..20 {
        let (p, h) = random_case(&mut rng, 300, 20);
        let n = rng.gen_range(1..=20u64.min(p));
        let start = rng.gen_range(0..p as i64);
        let s = Subgroup::new(p, h).unwrap();
        let iv = Interval::new(start, n, p).unwrap();
        // The interval is {L+1, ..., L+N}.
        let ns: Vec<u64> = (1..=n).map(|k| (start as u64 + k) % p).collect();
        let mut brute = 0u128;
        for &n1 in &ns {
            for &h1 in s.elements() {
                for &n2 in &ns {
                    for &h2 in s.elements() {
                        if n1 * h1 % p == n2 * h2 % p {
                            brute += 1;
                        }
                    }
                }
            }
        }
        let j = j_count(&iv, &s).unwrap().j();
        if j != brute {
            mismatches.push((p, h, n, start, brute, j));
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("20 random cases, mismatches {mismatches:?}"),
    )
}

fn c6_moment_inequality() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED ^ 6);
    let mut failures = Vec::new();
    let mut tightest = f64::INFINITY;
    for _ in 0..50 {
        let (p, h) = random_case(&mut rng, 2000, 2000);
        let n = rng.gen_range(1..p);
        let start = rng.gen_range(0..p as i64);
        let a = rng.gen_range(1..p);
        let s = Subgroup::new(p, h).unwrap();
        let t = table(&s, Strategy::Auto, false);
        let iv = Interval::new(start, n, p).unwrap();
        let j = j_count(&iv, &s).unwrap();
        for m in [2u32, 3] {
            let e = representation_counts(&s, m).unwrap();
            let c = moment_inequality_check(&iv, &s, a, &t, &j, &e).unwrap();
            tightest = tightest.min(c.lhs / c.rhs);
            if !c.pass {
                failures.push((p, h, n, start, a, m));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("100 checks, smallest rhs/lhs ratio {tightest:.4}, failures {failures:?}"),
    )
}

fn e(k: u64, p: u64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * (k % p) as f64 / p as f64)
}

fn inner(a: u64, h: &[u64], p: u64) -> f64 {
    h.iter().map(|&y| e(a * y % p, p)).sum::<Complex64>().norm()
}

/// Tuple-level selection: bucket each tuple against `scale`, drop those
/// below `floor`, keep the heaviest bucket.
fn select(tuples: &[(Vec<u64>, f64)], scale: f64, floor: f64) -> Vec<Vec<u64>> {
    let mut buckets: BTreeMap<u32, Vec<Vec<u64>>> = BTreeMap::new();
    for (t, m) in tuples.iter().filter(|(_, m)| *m >= floor) {
        let mut i = 0;
        while *m <= scale / 2f64.powi(i as i32 + 1) {
            i += 1;
        }
        buckets.entry(i).or_default().push(t.clone());
    }
    let mut best: Option<(u32, f64)> = None;
    for (&i, b) in &buckets {
        let w = scale / 2f64.powi(i as i32) * b.len() as f64;
        if best.is_none_or(|(_, bw)| w > bw) {
            best = Some((i, w));
        }
    }
    buckets.remove(&best.unwrap().0).unwrap()
}

fn key_set(tuples: &[Vec<u64>], p: u64, difference: bool) -> Vec<u64> {
    let mut v: Vec<u64> = tuples
        .iter()
        .map(|t| {
            if difference {
                (t[0] + p - t[1]) % p
            } else {
                t.iter().sum::<u64>() % p
            }
        })
        .filter(|&k| k != 0)
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Returns `(X, Y, Z)` from explicit tuple enumeration.
fn tuple_oracle(p: u64, h: &[u64], a: u64) -> (Vec<u64>, Vec<u64>, Vec<u64>) {
    let hf = h.len() as f64;
    let mut triples = Vec::new();
    for &x in h {
        for &y in h {
            for &z in h {
                triples.push(vec![x, y, z]);
            }
        }
    }
    let lam = |t: &Vec<u64>| t.iter().sum::<u64>() % p;
    let s_a = inner(a, h, p);
    let t1: Vec<_> = triples
        .iter()
        .map(|t| (t.clone(), inner(a * lam(t) % p, h, p)))
        .collect();
    let x = key_set(&select(&t1, hf, s_a.powi(3) / (2.0 * hf * hf)), p, false);
    let cubed: f64 = x
        .iter()
        .map(|&xv| {
            triples
                .iter()
                .map(|t| e(a * xv % p * lam(t), p))
                .sum::<Complex64>()
                .norm()
        })
        .sum();
    let t2: Vec<_> = triples
        .iter()
        .map(|t| {
            (
                t.clone(),
                x.iter()
                    .map(|&xv| inner(a * xv % p * lam(t) % p, h, p))
                    .sum::<f64>(),
            )
        })
        .collect();
    let nx = x.len() as f64;
    let y = key_set(&select(&t2, hf * nx, cubed / (2.0 * hf * hf)), p, false);
    let w = |d: u64| -> Complex64 {
        x.iter()
            .flat_map(|&xv| y.iter().map(move |&yv| e(a * xv % p * yv % p * d, p)))
            .sum()
    };
    let mut pairs = Vec::new();
    for &z1 in h {
        for &z2 in h {
            if z1 != z2 {
                pairs.push((vec![z1, z2], w((z1 + p - z2) % p)));
            }
        }
    }
    let off: f64 = pairs.iter().map(|(_, v)| v.re).sum();
    let t3: Vec<_> = pairs.into_iter().map(|(t, v)| (t, v.norm())).collect();
    let z = key_set(
        &select(&t3, nx * y.len() as f64, off.abs() / (2.0 * hf * hf)),
        p,
        true,
    );
    (x, y, z)
}

fn window_orders(p: u64) -> Vec<u64> {
    let pf = p as f64;
    let ds: Vec<u64> = divisors(p - 1)
        .unwrap()
        .into_iter()
        .filter(|&h| (h as f64).powi(4) > pf && ((h * h) as f64) < pf)
        .collect();
    vec![ds[0], ds[ds.len() / 2], ds[ds.len() - 1]]
}

fn c7_trace() -> Outcome {
    let cfg = TraceConfig::default();
    let mut notes = Vec::new();
    let mut pass = true;
    let mut checks = 0;
    for p in [1009u64, 2003, 4001] {
        for h in window_orders(p) {
            let s = Subgroup::new(p, h).unwrap();
            let inputs = TraceInputs::new(&s, &cfg).unwrap();
            let a = inputs.table.max_nonzero().a_star;
            match build_trace_with(&s, a, &inputs, &cfg) {
                Ok(t) if t.degenerate.is_none() => {
                    checks += t.checks.len();
                    let failed: Vec<&str> = t.failures().map(|c| c.name.as_str()).collect();
                    if !failed.is_empty() {
                        pass = false;
                        notes.push(format!("p={p} H={h}: {failed:?}"));
                    }
                }
                Ok(t) => {
                    pass = false;
                    notes.push(format!("p={p} H={h} degenerate: {:?}", t.degenerate));
                }
                Err(e) => {
                    pass = false;
                    notes.push(format!("p={p} H={h}: {e}"));
                }
            }
        }
    }
    let s = Subgroup::new(13, 3).unwrap();
    let inputs = TraceInputs::new(&s, &cfg).unwrap();
    let mut oracle_cases = 0;
    for a in 1..13u64 {
        if inner(a, s.elements(), 13) <= 1.0 {
            continue;
        }
        oracle_cases += 1;
        let t = build_trace_with(&s, a, &inputs, &cfg).unwrap();
        let sets = t.sets.as_ref().unwrap();
        let (x, y, z) = tuple_oracle(13, s.elements(), a);
        if (&sets.x, &sets.y, &sets.z) != (&x, &y, &z) || !t.all_pass() {
            pass = false;
            notes.push(format!("p=13 H=3 a={a}: sets differ from tuple oracle"));
        }
    }
    outcome(
        pass && oracle_cases > 0,
        format!("9 traces, {checks} checks, {oracle_cases} tuple-oracle traces at p=13; {notes:?}"),
    )
}

fn scan_config(threads: usize) -> ScanConfig {
    ScanConfig {
        p_min: 500,
        p_max: 5000,
        alpha_lo: 0.25,
        alpha_hi: 0.5,
        threads,
        ..ScanConfig::default()
    }
}

fn c8_scan() -> Outcome {
    let report = run_scan(&scan_config(4)).unwrap();
    let mut below = Vec::new();
    let mut strict_window = true;
    for r in &report.cases {
        let (pf, hf) = (r.p as f64, r.h as f64);
        strict_window &= hf.powi(4) > pf && hf * hf < pf;
        let max = r.max_abs_sum.unwrap_or(f64::NAN);
        let floor_sq = (pf * hf - hf * hf) / (pf - 1.0);
        let above_floor = max * max >= floor_sq * (1.0 - FLOOR_TOL);
        if !above_floor || !r.ratio1.is_some_and(f64::is_finite) {
            below.push((r.p, r.h));
        }
    }
    let overall = report.fits.iter().find(|f| f.band == "all");
    let delta_hat = overall.map_or(f64::NAN, |f| f.delta_hat);
    outcome(
        !report.cases.is_empty() && below.is_empty() && strict_window && delta_hat > 0.0,
        format!(
            "{} cases, floor/ratio violations {below:?}, fitted delta_hat = {delta_hat:.4} over {} cases, {} band fits",
            report.cases.len(),
            overall.map_or(0, |f| f.case_count),
            report.fits.len() - 1
        ),
    )
}

fn scan_csv(threads: usize) -> (Vec<u8>, Duration, bool) {
    let t0 = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_expsum"))
        .args([
            "scan",
            "--p-min",
            "500",
            "--p-max",
            "5000",
            "--alpha-lo",
            "0.25",
            "--alpha-hi",
            "0.5",
        ])
        .args(["--format", "csv", "--threads", &threads.to_string()])
        .output()
        .expect("run expsum binary");
    (out.stdout, t0.elapsed(), out.status.success())
}

fn c9_reproducible() -> Outcome {
    let (one, t1, ok1) = scan_csv(1);
    let (eight, t8, ok8) = scan_csv(8);
    let mut lib = Vec::new();
    run_scan(&scan_config(3))
        .unwrap()
        .write_csv(&mut lib)
        .unwrap();
    let rows = one
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        .saturating_sub(1);
    outcome(
        ok1 && ok8 && rows > 0 && one == eight && one == lib && t1 < Duration::from_secs(600),
        format!(
            "{rows} rows, threads 1 vs 8 identical: {}, matches library scan: {}, single-threaded run {:.2}s",
            one == eight,
            one == lib,
            t1.as_secs_f64()
        ) + &format!(", 8 threads {:.2}s", t8.as_secs_f64()),
    )
}

fn main() {
    type Criterion = (u32, &'static str, fn() -> Outcome, Duration);
    let criteria: [Criterion; 9] = [
        (
            1,
            "exponent identity suite",
            c1_identities,
            Duration::from_secs(1),
        ),
        (2, "Parseval", c2_parseval, Duration::from_secs(10)),
        (
            3,
            "complete sums and Gauss sums",
            c3_complete_and_gauss,
            Duration::from_secs(5),
        ),
        (
            4,
            "energy oracle equivalence",
            c4_energy,
            Duration::from_secs(30),
        ),
        (5, "J-count oracle", c5_j_count, Duration::from_secs(10)),
        (
            6,
            "moment inequality",
            c6_moment_inequality,
            Duration::from_secs(60),
        ),
        (
            7,
            "proof-trace determinism",
            c7_trace,
            Duration::from_secs(300),
        ),
        (
            8,
            "bound-ratio sanity scan",
            c8_scan,
            Duration::from_secs(180),
        ),
        (
            9,
            "reproducibility across thread counts",
            c9_reproducible,
            Duration::from_secs(660),
        ),
    ];
    let mut failed = 0;
    for (id, name, run, limit) in criteria {
        let t0 = Instant::now();
        let o = run();
        let elapsed = t0.elapsed();
        let pass = o.pass && elapsed <= limit;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id} [{name}]: {} ({:.2}s of {}s) {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            o.detail
        );
    }
    println!("acceptance: {}/9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
