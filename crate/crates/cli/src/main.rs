use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use expsum::bounds::{exponent_identity_suite, thm1_bound};
use expsum::energy::{
    energy_via_moments, j_count, lemma_conformance, moment_agrees, representation_counts,
};
use expsum::expsum::{all_sums, single_sum, DEFAULT_DENSE_LIMIT};
use expsum::harness::{run_scan, IntervalLength, IntervalSpec, ScanConfig};
use expsum::prooftrace::{
    build_trace_with, moment_inequality_check, TraceConfig, TraceInputs, DEFAULT_TRILINEAR_BUDGET,
};
use expsum::{Error, ErrorKind, Interval, PrimeModulus, Strategy, Subgroup, SumConfig};

#[derive(Parser)]
#[command(
    name = "expsum",
    version,
    about = "Exponential sums over multiplicative subgroups of F_p"
)]
struct Cli {
    /// Worker threads.
    #[arg(long, global = true, env = "EXPSUM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// |S_a(H)| for one multiplier, or the maximum over all nonzero a.
    Sum(SumArgs),
    /// Exact additive energy T_m(H) with the moment cross-check.
    Energy(EnergyArgs),
    /// Scan primes and subgroup orders, reporting maxima, bounds and fits.
    Scan(ScanArgs),
    /// Replay the dyadic construction and check every deterministic step.
    Trace(TraceArgs),
    /// Check the exact exponent identities.
    Identities,
}

#[derive(Args)]
struct SubgroupArgs {
    #[arg(long)]
    prime: u64,
    /// Subgroup order H, a divisor of p - 1.
    #[arg(long)]
    order: u64,
}

#[derive(Args)]
struct SumArgs {
    #[command(flatten)]
    group: SubgroupArgs,
    #[arg(long)]
    a: Option<u64>,
    #[arg(long, value_enum, default_value_t = StrategyArg::Auto)]
    strategy: StrategyArg,
    #[arg(long, default_value_t = DEFAULT_DENSE_LIMIT)]
    dense_limit: u64,
}

#[derive(Args)]
struct EnergyArgs {
    #[command(flatten)]
    group: SubgroupArgs,
    #[arg(long, default_value_t = 2)]
    m: u32,
    #[arg(long, default_value_t = DEFAULT_DENSE_LIMIT)]
    dense_limit: u64,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long, default_value_t = 3)]
    p_min: u64,
    #[arg(long)]
    p_max: u64,
    #[arg(long, default_value_t = 0.25)]
    alpha_lo: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha_hi: f64,
    /// Interval start L; defaults to 0 when an interval length is given.
    #[arg(long, allow_hyphen_values = true)]
    interval_start: Option<i64>,
    #[arg(long, conflicts_with = "interval_alpha")]
    interval_length: Option<u64>,
    /// Interval length as N = round(p^alpha).
    #[arg(long)]
    interval_alpha: Option<f64>,
    /// Energies to compute (repeatable).
    #[arg(long)]
    m: Vec<u32>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DENSE_LIMIT)]
    dense_limit: u64,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    group: SubgroupArgs,
    /// Multiplier; defaults to the maximizing a.
    #[arg(long)]
    a: Option<u64>,
    #[arg(long, allow_hyphen_values = true, requires = "interval_length")]
    interval_start: Option<i64>,
    #[arg(long)]
    interval_length: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DENSE_LIMIT)]
    dense_limit: u64,
    #[arg(long, default_value_t = DEFAULT_TRILINEAR_BUDGET)]
    trilinear_budget: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Direct,
    Transform,
    Auto,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Direct => Strategy::Direct,
            StrategyArg::Transform => Strategy::Transform,
            StrategyArg::Auto => Strategy::Auto,
        }
    }
}

enum Failure {
    Lib(Error),
    Assertion(String),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

type Outcome = Result<(), Failure>;

fn subgroup(args: &SubgroupArgs) -> Result<Subgroup, Error> {
    let p = PrimeModulus::new(args.prime)?;
    Subgroup::of_order(&p, args.order)
}

fn sink(path: Option<&PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(doc: &Value, path: Option<&PathBuf>) -> io::Result<()> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, doc)?;
    writeln!(out)?;
    out.flush()
}

fn cmd_sum(args: &SumArgs) -> Outcome {
    let s = subgroup(&args.group)?;
    let (p, h) = (s.p() as f64, s.order() as f64);
    let bound = thm1_bound(p, h)?;
    let doc = match args.a {
        Some(a) => {
            if a % s.p() == 0 {
                return Err(Error::InvalidInput(format!("a = {a} is divisible by p")).into());
            }
            let v = single_sum(a, &s);
            json!({
                "p": s.p(), "H": s.order(), "a": a % s.p(),
                "re": v.re, "im": v.im, "magnitude": v.norm(),
                "thm1": bound.value, "thm1_in_range": bound.in_range,
                "ratio1": v.norm() / bound.value,
            })
        }
        None => {
            let cfg = SumConfig {
                strategy: args.strategy.into(),
                dense_limit: args.dense_limit,
                keep_values: false,
            };
            let table = all_sums(&s, &cfg)?;
            let m = table.max_nonzero();
            json!({
                "p": s.p(), "H": s.order(), "strategy": table.strategy(),
                "a_star": m.a_star, "max_abs_sum": m.value,
                "parseval_error": table.parseval_error(),
                "thm1": bound.value, "thm1_in_range": bound.in_range,
                "ratio1": m.value / bound.value,
            })
        }
    };
    Ok(emit(&doc, None)?)
}

fn cmd_energy(args: &EnergyArgs) -> Outcome {
    if !(1..=3).contains(&args.m) {
        return Err(Error::InvalidInput(format!("m = {} is outside 1..=3", args.m)).into());
    }
    let s = subgroup(&args.group)?;
    let prof = representation_counts(&s, args.m)?;
    let table = all_sums(
        &s,
        &SumConfig {
            dense_limit: args.dense_limit,
            ..SumConfig::default()
        },
    )?;
    let moment = energy_via_moments(&table, args.m);
    let agrees = moment_agrees(prof.energy(), moment);
    let (t2, t3) = match args.m {
        2 => (Some(prof.energy()), None),
        3 => (None, Some(prof.energy())),
        _ => (None, None),
    };
    let lc = lemma_conformance(s.p(), s.order(), t2, t3);
    let doc = json!({
        "p": s.p(), "H": s.order(), "m": args.m,
        "energy": prof.energy().to_string(),
        "moment_identity": moment,
        "moment_identity_agrees": agrees,
        "lemma_ratio": lc.t2_ratio.or(lc.t3_ratio),
        "below_sqrt_p": lc.below_sqrt_p,
    });
    emit(&doc, None)?;
    if agrees {
        Ok(())
    } else {
        Err(Failure::Assertion(format!(
            "T_{} = {} disagrees with the moment identity value {moment}",
            args.m,
            prof.energy()
        )))
    }
}

fn cmd_scan(args: &ScanArgs, threads: usize) -> Outcome {
    let length = match (args.interval_length, args.interval_alpha) {
        (Some(n), _) => Some(IntervalLength::Fixed(n)),
        (None, Some(a)) => Some(IntervalLength::Power(a)),
        (None, None) if args.interval_start.is_some() => {
            return Err(
                Error::InvalidInput("--interval-start needs an interval length".into()).into(),
            )
        }
        (None, None) => None,
    };
    let cfg = ScanConfig {
        p_min: args.p_min,
        p_max: args.p_max,
        alpha_lo: args.alpha_lo,
        alpha_hi: args.alpha_hi,
        interval: length.map(|length| IntervalSpec {
            start: args.interval_start.unwrap_or(0),
            length,
        }),
        moments: args.m.clone(),
        threads,
        dense_limit: args.dense_limit,
        ..ScanConfig::default()
    };
    let report = run_scan(&cfg)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let out = sink(args.output.as_ref())?;
    match args.format {
        Format::Csv => report.write_csv(out)?,
        Format::Json => report.write_json(out)?,
    }
    if report.all_failed() {
        let kind = report.cases[0].error_kind.unwrap_or(ErrorKind::Input);
        let msg = report.cases[0].error.clone().unwrap_or_default();
        return Err(Failure::Lib(match kind {
            ErrorKind::Resource => Error::Budget(msg),
            _ => Error::InvalidInput(msg),
        }));
    }
    Ok(())
}

fn cmd_trace(args: &TraceArgs) -> Outcome {
    let s = subgroup(&args.group)?;
    let cfg = TraceConfig {
        trilinear_budget: args.trilinear_budget,
        dense_limit: args.dense_limit,
    };
    let inputs = TraceInputs::new(&s, &cfg)?;
    let a = args.a.unwrap_or_else(|| inputs.table.max_nonzero().a_star);
    let trace = match build_trace_with(&s, a, &inputs, &cfg) {
        Err(Error::EmptyTrace(reason)) => None.ok_or(reason),
        Err(e) => return Err(e.into()),
        Ok(t) => Ok(t),
    };

    let mut moment_checks = Vec::new();
    if let Some(n) = args.interval_length {
        let iv = Interval::new(args.interval_start.unwrap_or(0), n, s.p())?;
        let j = j_count(&iv, &s)?;
        for m in [2u32, 3] {
            let e = match m {
                2 => inputs.r2.clone(),
                _ => inputs.r3.clone(),
            };
            moment_checks.push(moment_inequality_check(&iv, &s, a, &inputs.table, &j, &e)?);
        }
    }

    let (trace_doc, degenerate, trace_pass) = match &trace {
        Ok(t) => (
            serde_json::to_value(t).expect("trace serializes"),
            t.degenerate.clone(),
            t.all_pass(),
        ),
        Err(reason) => (Value::Null, Some(reason.clone()), true),
    };
    let moments_pass = moment_checks.iter().all(|c| c.pass);
    let doc = json!({
        "schema": expsum::harness::SCHEMA_VERSION,
        "p": s.p(), "H": s.order(), "a": a % s.p(),
        "degenerate": degenerate,
        "all_pass": trace_pass && moments_pass,
        "trace": trace_doc,
        "moment_checks": moment_checks,
    });
    emit(&doc, args.output.as_ref())?;
    if trace_pass && moments_pass {
        Ok(())
    } else {
        Err(Failure::Assertion(
            "at least one deterministic check failed".into(),
        ))
    }
}

fn cmd_identities() -> Outcome {
    let suite = exponent_identity_suite();
    let mut out = io::stdout().lock();
    for c in &suite {
        writeln!(
            out,
            "{} {}: {}",
            if c.pass { "pass" } else { "FAIL" },
            c.name,
            c.statement
        )?;
    }
    let failed = suite.iter().filter(|c| !c.pass).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Assertion(format!("{failed} identities failed")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        eprintln!("error: thread count must be at least 1");
        return ExitCode::from(2);
    }
    if !matches!(cli.command, Command::Scan(_)) {
        // Best effort: a global pool may already exist in embedded use.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let outcome = match &cli.command {
        Command::Sum(a) => cmd_sum(a),
        Command::Energy(a) => cmd_energy(a),
        Command::Scan(a) => cmd_scan(a, threads),
        Command::Trace(a) => cmd_trace(a),
        Command::Identities => cmd_identities(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Input => 2,
                ErrorKind::Resource => 3,
                ErrorKind::EmptyTrace => 1,
            })
        }
    }
}
