//! Case scan over primes and subgroup orders, with CSV/JSON reporting and
//! log-log fits of the empirical saving.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{gamma, lemma_bounds, thm1_bound, thm2_bound, thm3_bound};
use crate::energy::{
    energy_via_moments, j_count, lemma_conformance, moment_agrees,
    representation_counts_with_budget, DEFAULT_CONVOLUTION_BUDGET,
};
use crate::error::{Error, ErrorKind, Result};
use crate::expsum::{
    all_sums, interval_subgroup_sum, max_sum_by_cosets, Interval, MaxSum, Strategy, SumConfig,
    DEFAULT_DENSE_LIMIT,
};
use crate::field::{divisors, is_prime, PrimeModulus};
use crate::subgroup::Subgroup;

pub const CSV_HEADER: [&str; 16] = [
    "p",
    "H",
    "N",
    "L",
    "a_star",
    "max_abs_sum",
    "thm1",
    "thm2",
    "thm3",
    "ratio1",
    "ratio2",
    "ratio3",
    "T2",
    "T3",
    "J",
    "gamma",
];

/// JSON report schema version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalLength {
    Fixed(u64),
    /// `N = round(p^alpha)`, clamped to `[1, p]`.
    Power(f64),
}

impl IntervalLength {
    pub fn resolve(self, p: u64) -> u64 {
        match self {
            IntervalLength::Fixed(n) => n,
            IntervalLength::Power(alpha) => ((p as f64).powf(alpha).round() as u64).clamp(1, p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalSpec {
    pub start: i64,
    pub length: IntervalLength,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanConfig {
    pub p_min: u64,
    pub p_max: u64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub interval: Option<IntervalSpec>,
    /// Energies `T_m` to compute, each in `1..=3`.
    pub moments: Vec<u32>,
    pub threads: usize,
    pub dense_limit: u64,
    pub convolution_budget: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            p_min: 3,
            p_max: 1000,
            alpha_lo: 0.25,
            alpha_hi: 0.5,
            interval: None,
            moments: Vec::new(),
            threads: 1,
            dense_limit: DEFAULT_DENSE_LIMIT,
            convolution_budget: DEFAULT_CONVOLUTION_BUDGET,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_min > self.p_max {
            return Err(Error::InvalidInput(format!(
                "p_min = {} exceeds p_max = {}",
                self.p_min, self.p_max
            )));
        }
        if !(self.alpha_lo > 0.0 && self.alpha_lo <= self.alpha_hi && self.alpha_hi <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "exponent window [{}, {}] must satisfy 0 < lo <= hi <= 1",
                self.alpha_lo, self.alpha_hi
            )));
        }
        if self.threads == 0 {
            return Err(Error::InvalidInput(
                "thread count must be at least 1".into(),
            ));
        }
        if let Some(&m) = self.moments.iter().find(|&&m| !(1..=3).contains(&m)) {
            return Err(Error::InvalidInput(format!(
                "moment m = {m} is outside 1..=3"
            )));
        }
        if let Some(IntervalSpec {
            length: IntervalLength::Fixed(0),
            ..
        }) = self.interval
        {
            return Err(Error::InvalidInput(
                "interval length must be positive".into(),
            ));
        }
        if let Some(IntervalSpec {
            length: IntervalLength::Power(a),
            ..
        }) = self.interval
        {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "interval exponent {a} is outside (0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Odd primes in range and the orders `H | p - 1` with
    /// `alpha_lo <= log H / log p <= alpha_hi`, sorted by `(p, H)`.
    pub fn cases(&self) -> Result<Vec<(u64, u64)>> {
        let mut out = Vec::new();
        for p in self.p_min.max(3)..=self.p_max {
            if !is_prime(p)? {
                continue;
            }
            let lp = (p as f64).ln();
            for h in divisors(p - 1)? {
                let alpha = (h as f64).ln() / lp;
                if alpha >= self.alpha_lo && alpha <= self.alpha_hi {
                    out.push((p, h));
                }
            }
        }
        Ok(out)
    }
}

/// One scanned `(p, H)` case. Optional fields are absent when not requested.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub p: u64,
    #[serde(rename = "H")]
    pub h: u64,
    #[serde(rename = "N")]
    pub n: Option<u64>,
    #[serde(rename = "L")]
    pub l: Option<i64>,
    pub a_star: Option<u64>,
    pub max_abs_sum: Option<f64>,
    /// `sqrt((pH - H^2) / (p - 1))`, the mean-square floor on the maximum.
    pub pigeonhole_floor: f64,
    pub thm1: Option<f64>,
    pub thm1_in_range: Option<bool>,
    /// `S_{a_star}(N, H)`.
    pub interval_sum: Option<f64>,
    pub thm2: Option<f64>,
    pub thm3: Option<f64>,
    pub ratio1: Option<f64>,
    pub ratio2: Option<f64>,
    pub ratio3: Option<f64>,
    #[serde(rename = "T1")]
    pub t1: Option<u128>,
    #[serde(rename = "T2")]
    pub t2: Option<u128>,
    #[serde(rename = "T3")]
    pub t3: Option<u128>,
    /// Whether every computed `T_m` matched `round(sum |S_a|^{2m} / p)`.
    pub moment_identity_ok: Option<bool>,
    pub t2_lemma_ratio: Option<f64>,
    pub t3_lemma_ratio: Option<f64>,
    #[serde(rename = "J")]
    pub j: Option<u128>,
    pub j_lemma_ratio: Option<f64>,
    pub gamma: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub error_kind: Option<ErrorKind>,
}

impl ScanRow {
    fn empty(p: u64, h: u64) -> Self {
        let (pf, hf) = (p as f64, h as f64);
        Self {
            p,
            h,
            n: None,
            l: None,
            a_star: None,
            max_abs_sum: None,
            pigeonhole_floor: ((pf * hf - hf * hf) / (pf - 1.0)).sqrt(),
            thm1: None,
            thm1_in_range: None,
            interval_sum: None,
            thm2: None,
            thm3: None,
            ratio1: None,
            ratio2: None,
            ratio3: None,
            t1: None,
            t2: None,
            t3: None,
            moment_identity_ok: None,
            t2_lemma_ratio: None,
            t3_lemma_ratio: None,
            j: None,
            j_lemma_ratio: None,
            gamma: None,
            error: None,
            error_kind: None,
        }
    }

    fn csv_record(&self) -> [String; 16] {
        fn f<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        [
            self.p.to_string(),
            self.h.to_string(),
            f(self.n),
            f(self.l),
            f(self.a_star),
            f(self.max_abs_sum),
            f(self.thm1),
            f(self.thm2),
            f(self.thm3),
            f(self.ratio1),
            f(self.ratio2),
            f(self.ratio3),
            f(self.t2),
            f(self.t3),
            f(self.j),
            f(self.gamma),
        ]
    }
}

/// Least-squares line through `(log H, log(max |S_a| / H))` for one band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    /// `"all"` or `"p in [lo, hi)"` for a dyadic band of primes.
    pub band: String,
    pub slope: f64,
    /// `-slope`: the fitted saving exponent.
    pub delta_hat: f64,
    pub intercept: f64,
    pub residual_norm: f64,
    pub case_count: usize,
    /// `exp(mean log ratio1)`: geometric mean of the ratio to the single-sum bound.
    pub thm1_constant: Option<f64>,
}

/// Ordinary least squares `y = slope x + intercept`; `None` with fewer than
/// two points or no spread in `x`.
pub fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 1e-12 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum::<f64>()
        .sqrt();
    Some((slope, intercept, residual))
}

fn fit_band(band: String, rows: &[&ScanRow]) -> Option<FitResult> {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            r.max_abs_sum
                .map(|m| ((r.h as f64).ln(), (m / r.h as f64).ln()))
        })
        .collect();
    let (slope, intercept, residual_norm) = least_squares(&points)?;
    let logs: Vec<f64> = rows.iter().filter_map(|r| r.ratio1.map(f64::ln)).collect();
    let thm1_constant =
        (!logs.is_empty()).then(|| (logs.iter().sum::<f64>() / logs.len() as f64).exp());
    Some(FitResult {
        band,
        slope,
        delta_hat: -slope,
        intercept,
        residual_norm,
        case_count: points.len(),
        thm1_constant,
    })
}

/// Fits per dyadic band of `p` (bands with at least two usable cases), then
/// one over every case.
pub fn fit_rows(rows: &[ScanRow]) -> Vec<FitResult> {
    let ok: Vec<&ScanRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let mut fits = Vec::new();
    let mut i = 0;
    while i < ok.len() {
        let k = 63 - ok[i].p.leading_zeros();
        let j = i + ok[i..]
            .iter()
            .take_while(|r| 63 - r.p.leading_zeros() == k)
            .count();
        let band = format!("p in [{}, {})", 1u64 << k, 1u64 << (k + 1));
        fits.extend(fit_band(band, &ok[i..j]));
        i = j;
    }
    fits.extend(fit_band("all".into(), &ok));
    fits
}

fn scan_case(p: u64, h: u64, cfg: &ScanConfig) -> Result<ScanRow> {
    let modulus = PrimeModulus::new(p)?;
    let s = Subgroup::of_order(&modulus, h)?;
    let mut row = ScanRow::empty(p, h);
    let (pf, hf) = (p as f64, h as f64);
    let needs_table = cfg.interval.is_some() || !cfg.moments.is_empty();

    let table = if needs_table {
        Some(all_sums(
            &s,
            &SumConfig {
                strategy: Strategy::Auto,
                dense_limit: cfg.dense_limit,
                keep_values: false,
            },
        )?)
    } else {
        None
    };
    let MaxSum { a_star, value } = match &table {
        Some(t) => t.max_nonzero(),
        None => max_sum_by_cosets(&s),
    };
    row.a_star = Some(a_star);
    row.max_abs_sum = Some(value);
    let b1 = thm1_bound(pf, hf)?;
    row.thm1 = Some(b1.value);
    row.thm1_in_range = Some(b1.in_range);
    row.ratio1 = Some(value / b1.value);

    if let Some(t) = &table {
        let mut agree = true;
        for &m in &cfg.moments {
            let prof = representation_counts_with_budget(&s, m, cfg.convolution_budget)?;
            let exact = prof.energy();
            agree &= moment_agrees(exact, energy_via_moments(t, m));
            match m {
                1 => row.t1 = Some(exact),
                2 => row.t2 = Some(exact),
                _ => row.t3 = Some(exact),
            }
        }
        if !cfg.moments.is_empty() {
            row.moment_identity_ok = Some(agree);
            let lc = lemma_conformance(p, h, row.t2, row.t3);
            row.t2_lemma_ratio = lc.t2_ratio;
            row.t3_lemma_ratio = lc.t3_ratio;
        }
    }

    if let (Some(spec), Some(t)) = (cfg.interval, &table) {
        let n = spec.length.resolve(p);
        let iv = Interval::new(spec.start, n, p)?;
        let nf = n as f64;
        row.n = Some(n);
        row.l = Some(spec.start);
        let sum = interval_subgroup_sum(a_star, &iv, t)?;
        row.interval_sum = Some(sum);
        let b2 = thm2_bound(pf, nf, hf)?;
        let b3 = thm3_bound(pf, nf, hf)?;
        row.thm2 = Some(b2.value);
        row.thm3 = Some(b3.value);
        row.ratio2 = Some(sum / b2.value);
        row.ratio3 = Some(sum / b3.value);
        row.gamma = Some(gamma(pf, nf, hf));
        let j = j_count(&iv, &s)?;
        row.j = Some(j.j());
        row.j_lemma_ratio = Some(j.j() as f64 / lemma_bounds(pf, nf, hf, iv.starts_at_origin()).j);
    }
    Ok(row)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub schema: u32,
    pub config: ScanConfig,
    pub cases: Vec<ScanRow>,
    pub fits: Vec<FitResult>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl ScanReport {
    pub fn all_failed(&self) -> bool {
        !self.cases.is_empty() && self.cases.iter().all(|r| r.error.is_some())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidInput(format!("writing CSV: {e}"));
        w.write_record(CSV_HEADER).map_err(io)?;
        for row in &self.cases {
            w.write_record(row.csv_record()).map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidInput(format!("writing CSV: {e}")))?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)
            .map_err(|e| Error::InvalidInput(format!("writing JSON: {e}")))?;
        writeln!(out).map_err(|e| Error::InvalidInput(format!("writing JSON: {e}")))?;
        Ok(())
    }
}

/// Runs every case on a pool of `cfg.threads` workers. Rows come back
/// sorted by `(p, H)`; a failing case yields a row carrying its error.
pub fn run_scan(cfg: &ScanConfig) -> Result<ScanReport> {
    cfg.validate()?;
    let cases = cfg.cases()?;
    let mut warnings = Vec::new();
    if cases.is_empty() {
        warnings.push(format!(
            "no subgroup orders with exponent in [{}, {}] for primes in [{}, {}]",
            cfg.alpha_lo, cfg.alpha_hi, cfg.p_min, cfg.p_max
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Budget(format!("cannot start worker pool: {e}")))?;
    let mut rows: Vec<ScanRow> = pool.install(|| {
        cases
            .par_iter()
            .map(|&(p, h)| {
                scan_case(p, h, cfg).unwrap_or_else(|e| {
                    let mut row = ScanRow::empty(p, h);
                    row.error = Some(e.to_string());
                    row.error_kind = Some(e.kind());
                    row
                })
            })
            .collect()
    });
    rows.sort_by_key(|r| (r.p, r.h));
    for r in rows.iter().filter(|r| r.error.is_some()) {
        warnings.push(format!(
            "p={} H={}: {}",
            r.p,
            r.h,
            r.error.as_deref().unwrap_or("")
        ));
    }
    let fits = fit_rows(&rows);
    Ok(ScanReport {
        schema: SCHEMA_VERSION,
        config: cfg.clone(),
        cases: rows,
        fits,
        warnings,
    })
}
