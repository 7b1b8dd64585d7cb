use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde_json::{json, Value};

use lacunary::bounds::{
    chaining_depth, constants_audit, existence_bound, lacunary_bound, BoundVariant,
};
use lacunary::covers::{build_base_cover, chain_cover, dyadic_delta, estimated_cover_size, BracketingCover};
use lacunary::discrepancy::{bracket_bounds, exact_grid_size, exact_star_discrepancy, DEFAULT_GRID_BUDGET};
use lacunary::harness::{
    exceedance_ci, rational_decimal, run_trials, scaling_table, write_csv, ExperimentConfig,
    Method, PointSource, TrialRecord,
};
use lacunary::independence::{exact_joint, JointTable, LayerFunction};
use lacunary::points::{self, CoordFormat};
use lacunary::{derive_seed, generate_iid, generate_lacunary, Corner, PointSet};

#[derive(Parser)]
#[command(name = "lacunary", version, about = "Lacunary point sets and star discrepancy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a point set as CSV.
    Generate(GenerateArgs),
    /// Star discrepancy of a point set, exact or enclosed by brackets.
    Disc(DiscArgs),
    /// Build a bracketing cover and probe it.
    Cover(CoverArgs),
    /// Evaluate the discrepancy bound.
    Bound(BoundArgs),
    /// Check every constant and inequality of the bound on the audit grid.
    Audit(AuditArgs),
    /// Monte Carlo comparison of observed discrepancy with the bound.
    Verify(VerifyArgs),
    /// Exact joint law of a centered indicator at two orbit indices.
    Indep(IndepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum PointFormat {
    Decimal,
    Bits,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Brackets,
    Auto,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exact => Method::Exact,
            MethodArg::Brackets => Method::Brackets,
            MethodArg::Auto => Method::Auto,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Lacunary,
    Iid,
}

impl From<SourceArg> for PointSource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Lacunary => PointSource::Lacunary,
            SourceArg::Iid => PointSource::Iid,
        }
    }
}

#[derive(Args)]
struct SourceArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 32)]
    h_precision: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "lacunary")]
    points: SourceArg,
}

impl SourceArgs {
    fn build(&self) -> Result<PointSet> {
        let d = self.d.ok_or_else(|| usage("--d is required"))?;
        let n = self.n.ok_or_else(|| usage("--n is required"))?;
        Ok(match self.points {
            SourceArg::Lacunary => {
                let bits = derive_seed(self.seed, d, n, self.h_precision)?;
                generate_lacunary(&bits, n, self.h_precision)?
            }
            SourceArg::Iid => generate_iid(self.seed, d, n, self.h_precision)?,
        })
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_enum, default_value = "decimal")]
    format: PointFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiscArgs {
    /// CSV with header n,x1,...,xd and exact decimal coordinates.
    #[arg(long, conflicts_with_all = ["d", "n"])]
    input: Option<PathBuf>,
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    /// Bracket parameter, e.g. 2^-6, 1/64 or 0.015625.
    #[arg(long)]
    delta: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct CoverArgs {
    #[arg(long)]
    d: usize,
    /// Level: a 2^-h cover.
    #[arg(long, required_unless_present = "delta")]
    h: Option<u32>,
    #[arg(long, conflicts_with = "snap")]
    delta: Option<String>,
    /// Snap a 2^-(h+2) grid cover onto the dyadic corner grids of level h.
    #[arg(long, requires = "h")]
    snap: bool,
    #[arg(long, default_value_t = 100_000)]
    probe: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Stated,
    Detailed,
    /// `sqrt(c_abs d / N)`.
    #[value(alias = "hnww")]
    Existence,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: u64,
    #[arg(long, required_unless_present = "c_abs")]
    eps: Option<f64>,
    #[arg(long, value_enum, default_value = "stated")]
    variant: VariantArg,
    /// Absolute constant of the existence bound.
    #[arg(long, required_if_eq("variant", "existence"))]
    c_abs: Option<f64>,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct VerifyArgs {
    /// JSON experiment configuration; other experiment flags are ignored.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, conflicts_with = "n_grid")]
    n: Option<u64>,
    /// Powers of two `2^a..2^b`, or a comma list.
    #[arg(long)]
    n_grid: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 10)]
    trials: u64,
    #[arg(long, default_value_t = 32)]
    h_precision: u32,
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
    /// Dyadic bracket parameter 2^-k.
    #[arg(long)]
    delta: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "lacunary")]
    points: SourceArg,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Exit with status 3 when the exceedance interval exceeds eps in a
    /// non-vacuous regime.
    #[arg(long)]
    gate: bool,
}

#[derive(Args)]
struct IndepArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    h: u32,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    n_prime: u64,
    /// `low;high` corners as comma lists, e.g. `0;1/4` or `0,0;1/2,1/4`.
    #[arg(long = "box")]
    region: String,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Gate(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Gate(m) => write!(f, "verification gate failed: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Failure::Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use lacunary::Error as E;
    if let Some(f) = err.downcast_ref::<Failure>() {
        return match f {
            Failure::Usage(_) => 1,
            Failure::Gate(_) => 3,
        };
    }
    match err.downcast_ref::<E>() {
        Some(
            E::BudgetExceeded { .. }
            | E::ChainInfeasible { .. }
            | E::GuardExceeded { .. }
            | E::InsufficientSeedBits { .. },
        ) => 2,
        _ => 1,
    }
}

/// Parses `2^-k`, `p/q` or a finite decimal exactly.
fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || usage(format!("cannot parse {s:?} as a rational"));
    if let Some(k) = s.strip_prefix("2^-") {
        let k: u32 = k.parse().map_err(|_| bad())?;
        return Ok(dyadic_delta(k));
    }
    if let Some((p, q)) = s.split_once('/') {
        let p = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(p, q));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let scale = BigInt::from(10u32).pow(frac.len() as u32);
    Ok(BigRational::new(digits, scale))
}

/// `k` with `q = 2^-k`.
fn dyadic_exponent(q: &BigRational) -> Result<u32> {
    (0..=62)
        .find(|&k| &dyadic_delta(k) == q)
        .ok_or_else(|| usage(format!("{q} is not a power of two 2^-k")))
}

fn parse_n_grid(s: &str) -> Result<Vec<u64>> {
    let bad = || usage(format!("cannot parse N grid {s:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let exp = |t: &str| -> Result<u32> {
            t.trim().strip_prefix("2^").ok_or_else(bad)?.parse().map_err(|_| bad())
        };
        let (a, b) = (exp(a)?, exp(b)?);
        if a > b || b > 40 {
            return Err(bad());
        }
        return Ok((a..=b).map(|k| 1u64 << k).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| bad()))
        .collect()
}

fn open_out(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_json(v: &Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn approx(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

fn generate(args: GenerateArgs) -> Result<()> {
    let points = args.source.build()?;
    let format = match args.format {
        PointFormat::Decimal => CoordFormat::Decimal,
        PointFormat::Bits => CoordFormat::Bits,
    };
    let mut out = open_out(&args.out)?;
    points::write_csv(&points, format, &mut out)?;
    out.flush()?;
    Ok(())
}

fn disc(args: DiscArgs) -> Result<()> {
    let points = match &args.input {
        Some(path) => {
            let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            points::read_csv(io::BufReader::new(f))?
        }
        None => args.source.build()?,
    };
    let delta = args.delta.as_deref().map(parse_rational).transpose()?;
    let exact = match args.method {
        MethodArg::Exact => true,
        MethodArg::Brackets => false,
        MethodArg::Auto => exact_grid_size(&points) <= DEFAULT_GRID_BUDGET,
    };
    let (n, d) = (points.n(), points.d());
    if exact {
        let v = exact_star_discrepancy(&points)?;
        match args.format {
            Format::Json => print_json(&json!({
                "n": n, "d": d, "method": "exact",
                "dstar": v.to_string(), "dstar_approx": approx(&v),
            })),
            Format::Csv => {
                println!("n,d,method,dstar_lower,dstar_upper,delta");
                println!("{n},{d},exact,{v},{v},0");
                Ok(())
            }
        }
    } else {
        let delta = delta.unwrap_or_else(|| dyadic_delta(6));
        let cover = build_base_cover(d, &delta)?;
        let b = bracket_bounds(&points, &cover)?;
        match args.format {
            Format::Json => print_json(&json!({
                "n": n, "d": d, "method": "brackets",
                "lower": b.lower.to_string(), "upper": b.upper.to_string(),
                "delta": b.delta.to_string(),
                "lower_approx": approx(&b.lower), "upper_approx": approx(&b.upper),
            })),
            Format::Csv => {
                println!("n,d,method,dstar_lower,dstar_upper,delta");
                println!("{n},{d},brackets,{},{},{}", b.lower, b.upper, b.delta);
                Ok(())
            }
        }
    }
}

fn cover(args: CoverArgs) -> Result<()> {
    let d = args.d;
    let (cover, level): (BracketingCover, Option<u32>) = if args.snap {
        let h = args.h.expect("clap enforces --h with --snap");
        (chain_cover(d, h)?, Some(h))
    } else {
        let delta = match (&args.delta, args.h) {
            (Some(s), _) => parse_rational(s)?,
            (None, Some(h)) => dyadic_delta(h),
            (None, None) => return Err(usage("one of --h or --delta is required")),
        };
        (build_base_cover(d, &delta)?, args.h)
    };
    let report = cover.probe(args.probe, args.seed)?;
    let delta_f = approx(cover.delta());
    let (lower_den, upper_den) = match cover.snap_grid() {
        Some(g) => (1u64 << g.lower_bits, 1u64 << g.upper_bits),
        None => (cover.corner_denominator(), cover.corner_denominator()),
    };
    let fields: Vec<(&str, Value)> = vec![
        ("d", json!(d)),
        ("level", json!(level)),
        ("delta", json!(cover.delta().to_string())),
        ("snapped", json!(cover.snap_grid().is_some())),
        ("cardinality", json!(cover.len().to_string())),
        ("grid_cells_per_axis", json!(cover.grid_cells())),
        ("estimated_cardinality", json!(estimated_cover_size(d, delta_f))),
        ("lower_corner_denominator", json!(lower_den)),
        ("upper_corner_denominator", json!(upper_den)),
        ("probes", json!(report.probes)),
        ("uncovered", json!(report.uncovered)),
        ("over_delta", json!(report.over_delta)),
        ("off_grid", json!(report.off_grid)),
        ("max_weight", json!(report.max_weight.to_string())),
        ("passed", json!(report.passed())),
    ];
    match args.format {
        Format::Json => print_json(&Value::Object(
            fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        ))?,
        Format::Csv => {
            println!("field,value");
            for (k, v) in fields {
                let v = match v {
                    Value::String(s) => s,
                    other => other.to_string(),
                };
                println!("{k},{v}");
            }
        }
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Gate("cover probe found violations".into()).into())
    }
}

fn bound(args: BoundArgs) -> Result<()> {
    let depth = chaining_depth(args.n, args.d).ok();
    let v = match args.variant {
        VariantArg::Existence => {
            let c = args.c_abs.expect("clap enforces --c-abs");
            let value = existence_bound(args.d, args.n, c)?;
            json!({"d": args.d, "N": args.n, "variant": "existence", "c_abs": c,
                   "value": value, "vacuous": value > 1.0})
        }
        VariantArg::Stated | VariantArg::Detailed => {
            let eps = args.eps.ok_or_else(|| usage("--eps is required"))?;
            let (variant, name) = match args.variant {
                VariantArg::Stated => (BoundVariant::Stated, "stated"),
                _ => (BoundVariant::Detailed, "detailed"),
            };
            let b = lacunary_bound(args.d, args.n, eps, variant)?;
            json!({"d": args.d, "N": args.n, "epsilon": eps, "variant": name,
                   "value": b.value, "vacuous": b.vacuous, "H": depth})
        }
    };
    print_json(&v)
}

fn audit(args: AuditArgs) -> Result<()> {
    let report = constants_audit();
    match args.format {
        Some(Format::Json) => print_json(&serde_json::to_value(&report)?)?,
        Some(Format::Csv) => {
            println!("check,cases,failures,min_slack,passed");
            for c in &report.checks {
                println!("\"{}\",{},{},{},{}", c.name, c.cases, c.failures, c.min_slack, c.passed());
            }
        }
        None => {
            for c in &report.checks {
                let status = if c.passed() { "pass" } else { "FAIL" };
                println!(
                    "{status}  {}  ({} cases, min slack {:.3e})",
                    c.name, c.cases, c.min_slack
                );
            }
            println!("series sum {:.6}", report.series_sum);
        }
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Gate("constants audit found failing checks".into()).into())
    }
}

fn verify_config(args: &VerifyArgs) -> Result<ExperimentConfig> {
    if let Some(path) = &args.config {
        let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let c: ExperimentConfig =
            serde_json::from_reader(io::BufReader::new(f)).map_err(|e| usage(e.to_string()))?;
        return Ok(c);
    }
    let d = args.d.ok_or_else(|| usage("--d is required"))?;
    let eps = args.eps.ok_or_else(|| usage("--eps is required"))?;
    let n_grid = match (&args.n, &args.n_grid) {
        (Some(n), _) => vec![*n],
        (None, Some(g)) => parse_n_grid(g)?,
        (None, None) => return Err(usage("one of --n or --n-grid is required")),
    };
    let delta_log2 = args
        .delta
        .as_deref()
        .map(|s| parse_rational(s).and_then(|q| dyadic_exponent(&q)))
        .transpose()?;
    Ok(ExperimentConfig {
        d,
        n_grid,
        epsilon: eps,
        trials: args.trials,
        h_precision: args.h_precision,
        master_seed: args.seed,
        method: args.method.into(),
        delta_log2,
        points: args.points.into(),
        workers: args.workers,
    })
}

fn verify(args: VerifyArgs) -> Result<()> {
    let config = verify_config(&args)?;
    config.validate().map_err(|e| usage(e.to_string()))?;
    let records = run_trials(&config)?;

    let mut summary = Vec::new();
    let mut gate_failures = Vec::new();
    for &n in &config.n_grid {
        let group: Vec<TrialRecord> = records.iter().filter(|r| r.n == n).cloned().collect();
        let ci = exceedance_ci(&group)?;
        let bound = group[0].bound_stated;
        let max_upper = group
            .iter()
            .map(|r| r.dstar_upper.clone())
            .max()
            .unwrap_or_else(BigRational::zero);
        eprintln!(
            "N={n}: bound {bound:.5}{}, exceedances {}/{} (95% CI [{:.4}, {:.4}]), indeterminate {}, max D* upper {}",
            if bound > 1.0 { " (vacuous)" } else { "" },
            ci.exceedances,
            ci.trials,
            ci.lower,
            ci.upper,
            ci.indeterminate,
            rational_decimal(&max_upper, 6),
        );
        if bound <= 1.0 && ci.upper > config.epsilon {
            gate_failures.push(format!(
                "N={n}: upper limit {:.4} exceeds eps {}",
                ci.upper, config.epsilon
            ));
        }
        summary.push(json!({
            "N": n, "bound_stated": bound, "vacuous": bound > 1.0,
            "exceedance": ci, "max_dstar_upper": max_upper.to_string(),
        }));
    }

    let mut out = open_out(&args.out)?;
    match args.format {
        Format::Csv => write_csv(&records, &mut out)?,
        Format::Json => {
            let rows: Vec<_> = records.iter().map(TrialRecord::row).collect();
            let mut doc = json!({"config": config, "records": rows, "summary": summary});
            if config.n_grid.len() > 1 {
                doc["scaling"] = serde_json::to_value(scaling_table(config.d, &records)?)?;
            }
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
        }
    }
    out.flush()?;

    if args.gate && !gate_failures.is_empty() {
        return Err(Failure::Gate(gate_failures.join("; ")).into());
    }
    Ok(())
}

fn parse_corner(s: &str, d: usize, bits: u32) -> Result<Corner> {
    let coords: Vec<BigRational> = s.split(',').map(parse_rational).collect::<Result<_>>()?;
    if coords.len() != d {
        return Err(usage(format!("corner {s:?} needs {d} coordinates")));
    }
    let scale = BigRational::from_integer((1u64 << bits).into());
    let nums = coords
        .iter()
        .map(|q| {
            let x = q * &scale;
            if q > &BigRational::one() || q < &BigRational::zero() || !x.is_integer() {
                return Err(usage(format!("{q} is not a multiple of 2^-{bits} in [0, 1]")));
            }
            Ok(x.to_integer().to_u64().expect("bounded by the scale"))
        })
        .collect::<Result<Vec<u64>>>()?;
    Ok(Corner::dyadic(nums, bits)?)
}

fn indep(args: IndepArgs) -> Result<()> {
    let bits = args.h + 2 + lacunary::exact::ceil_log2(args.d as u64);
    let (low, high) = args
        .region
        .split_once(';')
        .ok_or_else(|| usage("--box takes `low;high`"))?;
    let k = LayerFunction::new(
        parse_corner(low, args.d, bits)?,
        parse_corner(high, args.d, bits)?,
        args.h,
    )?;
    let joint = exact_joint(&k, args.n, args.n_prime)?;
    let table = JointTable::new(&k, &joint);
    print_json(&json!({
        "d": args.d, "h": args.h, "n": args.n, "n_prime": args.n_prime,
        "gap_condition": args.n_prime - args.n >= bits as u64,
        "joint": table,
    }))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Disc(a) => disc(a),
        Command::Cover(a) => cover(a),
        Command::Bound(a) => bound(a),
        Command::Audit(a) => audit(a),
        Command::Verify(a) => verify(a),
        Command::Indep(a) => indep(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
