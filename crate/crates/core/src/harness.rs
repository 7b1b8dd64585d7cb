//! Seeded Monte Carlo experiments comparing observed star discrepancy of
//! lacunary point sets against the high-probability bound.

use std::io::Write;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::bounds::{bernstein_tail, d_log2_d, lacunary_bound, BoundVariant, STATED_CONSTANT};
use crate::covers::{build_base_cover, dyadic_delta};
use crate::discrepancy::{
    bracket_bounds, exact_grid_size, exact_star_discrepancy, DEFAULT_GRID_BUDGET,
};
use crate::error::{invalid, Error, Result};
use crate::points::{derive_seed, generate_iid, generate_lacunary, PointSet, MAX_PRECISION};
use crate::rng::{derive, SplitMix64};

/// How `D*_N` is evaluated for each trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Brackets,
    /// Exact when the critical grid fits the budget, brackets otherwise.
    #[default]
    Auto,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "brackets" => Ok(Self::Brackets),
            "auto" => Ok(Self::Auto),
            _ => Err(invalid("method", format!("unknown method '{s}'"))),
        }
    }
}

/// Generator for the per-trial point sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PointSource {
    #[default]
    Lacunary,
    Iid,
}

impl FromStr for PointSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lacunary" => Ok(Self::Lacunary),
            "iid" => Ok(Self::Iid),
            _ => Err(invalid("points", format!("unknown point source '{s}'"))),
        }
    }
}

fn default_precision() -> u32 {
    32
}

fn default_trials() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: usize,
    /// One or more sample sizes; each is run with `trials` trials.
    pub n_grid: Vec<u64>,
    pub epsilon: f64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_precision")]
    pub h_precision: u32,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub method: Method,
    /// Bracket parameter `delta = 2^-delta_log2`; chosen per trial when absent.
    #[serde(default)]
    pub delta_log2: Option<u32>,
    #[serde(default)]
    pub points: PointSource,
    /// Thread count; `None` uses the global pool. Does not affect output.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(d: usize, n: u64, epsilon: f64, trials: u64) -> Self {
        Self {
            d,
            n_grid: vec![n],
            epsilon,
            trials,
            h_precision: default_precision(),
            master_seed: 0,
            method: Method::Auto,
            delta_log2: None,
            points: PointSource::Lacunary,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(invalid("d", "must be at least 1"));
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(invalid("n", "need at least one positive sample size"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid("epsilon", "must lie in (0, 1)"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.h_precision == 0 || self.h_precision > MAX_PRECISION {
            return Err(invalid("h_precision", format!("must lie in 1..={MAX_PRECISION}")));
        }
        if let Some(k) = self.delta_log2 {
            if k == 0 || k > 60 {
                return Err(invalid("delta", "must be 2^-k with 1 <= k <= 60"));
            }
        }
        if self.workers == Some(0) {
            return Err(invalid("workers", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UsedMethod {
    Exact,
    Brackets,
}

/// Whether the observed discrepancy exceeds the stated bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Exceedance {
    Yes,
    No,
    /// The bound lies inside the enclosure.
    Indeterminate,
}

impl Exceedance {
    pub fn classify(lower: &BigRational, upper: &BigRational, bound: f64) -> Self {
        match BigRational::from_float(bound) {
            Some(b) if lower > &b => Self::Yes,
            Some(b) if upper <= &b => Self::No,
            Some(_) => Self::Indeterminate,
            // non-finite bounds only arise from degenerate parameters
            None if bound > 0.0 => Self::No,
            None => Self::Indeterminate,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Yes => "yes",
            Self::No => "no",
            Self::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    /// Seed of this trial, derived from the master seed and `trial`.
    pub seed: u64,
    pub d: usize,
    pub n: u64,
    pub h: u32,
    pub method: UsedMethod,
    /// `2^-k` of the final cover, for bracket trials.
    pub delta_log2: Option<u32>,
    pub dstar_lower: BigRational,
    pub dstar_upper: BigRational,
    pub bound_stated: f64,
    pub bound_detailed: f64,
    pub exceeded: Exceedance,
}

/// Flat form of [`TrialRecord`] used for CSV and JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRow {
    pub trial: u64,
    pub seed: u64,
    pub d: usize,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "H")]
    pub h: u32,
    pub method: UsedMethod,
    pub dstar_lower: String,
    pub dstar_upper: String,
    pub bound_stated: f64,
    pub bound_detailed: f64,
    pub exceeded: Exceedance,
}

impl TrialRecord {
    pub fn row(&self) -> TrialRow {
        TrialRow {
            trial: self.trial,
            seed: self.seed,
            d: self.d,
            n: self.n,
            h: self.h,
            method: self.method,
            dstar_lower: self.dstar_lower.to_string(),
            dstar_upper: self.dstar_upper.to_string(),
            bound_stated: self.bound_stated,
            bound_detailed: self.bound_detailed,
            exceeded: self.exceeded,
        }
    }

    pub fn upper_f64(&self) -> f64 {
        self.dstar_upper.to_f64().unwrap_or(f64::NAN)
    }
}

/// Largest `k`-exponent with `2^-k <= bound / 10`, but never coarser than `2^-4`.
pub fn auto_delta_log2(bound: f64) -> u32 {
    let target = bound / 10.0;
    let mut k = 4;
    while k < 60 && dyadic_f64(k) > target {
        k += 1;
    }
    k
}

fn dyadic_f64(k: u32) -> f64 {
    (-(k as f64)).exp2()
}

fn trial_points(config: &ExperimentConfig, n: u64, seed: u64) -> Result<PointSet> {
    let n = usize::try_from(n).map_err(|_| invalid("n", "too large for this platform"))?;
    match config.points {
        PointSource::Lacunary => {
            let bits = derive_seed(seed, config.d, n, config.h_precision)?;
            generate_lacunary(&bits, n, config.h_precision)
        }
        PointSource::Iid => generate_iid(seed, config.d, n, config.h_precision),
    }
}

fn bracket_trial(points: &PointSet, k: u32) -> Result<(BigRational, BigRational)> {
    let cover = build_base_cover(points.d(), &dyadic_delta(k))?;
    let b = bracket_bounds(points, &cover)?;
    Ok((b.lower, b.upper))
}

/// Runs one trial for sample size `n`.
pub fn run_trial(config: &ExperimentConfig, n: u64, trial: u64) -> Result<TrialRecord> {
    let seed = derive(config.master_seed, trial);
    let stated = lacunary_bound(config.d, n, config.epsilon, BoundVariant::Stated)?.value;
    let detailed = lacunary_bound(config.d, n, config.epsilon, BoundVariant::Detailed)?.value;
    let points = trial_points(config, n, seed)?;

    let use_exact = match config.method {
        Method::Exact => true,
        Method::Brackets => false,
        Method::Auto => exact_grid_size(&points) <= DEFAULT_GRID_BUDGET,
    };
    let (method, delta_log2, lower, upper, exceeded) = if use_exact {
        let v = exact_star_discrepancy(&points)?;
        let e = Exceedance::classify(&v, &v, stated);
        (UsedMethod::Exact, None, v.clone(), v, e)
    } else {
        let mut k = config.delta_log2.unwrap_or_else(|| auto_delta_log2(stated));
        let (mut lo, mut hi) = bracket_trial(&points, k)?;
        let mut e = Exceedance::classify(&lo, &hi, stated);
        if e == Exceedance::Indeterminate {
            // one refinement at delta / 4
            if let Ok((l2, h2)) = bracket_trial(&points, k + 2) {
                k += 2;
                lo = l2;
                hi = h2;
                e = Exceedance::classify(&lo, &hi, stated);
            }
        }
        (UsedMethod::Brackets, Some(k), lo, hi, e)
    };
    Ok(TrialRecord {
        trial,
        seed,
        d: config.d,
        n,
        h: config.h_precision,
        method,
        delta_log2,
        dstar_lower: lower,
        dstar_upper: upper,
        bound_stated: stated,
        bound_detailed: detailed,
        exceeded,
    })
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| invalid("workers", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// All trials for every sample size, ordered by `(N, trial)`.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let jobs: Vec<(u64, u64)> = config
        .n_grid
        .iter()
        .flat_map(|&n| (0..config.trials).map(move |t| (n, t)))
        .collect();
    let mut records = in_pool(config.workers, || {
        jobs.par_iter()
            .map(|&(n, t)| run_trial(config, n, t))
            .collect::<Result<Vec<_>>>()
    })??;
    records.sort_by_key(|r| (r.n, r.trial));
    Ok(records)
}

pub const CSV_HEADER: &str =
    "trial,seed,d,N,H,method,dstar_lower,dstar_upper,bound_stated,bound_detailed,exceeded";

pub fn write_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r.row()).map_err(|e| Error::Parse(e.to_string()))?;
    }
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))
            .map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

/// Exceedance rate with a two-sided 95% Clopper–Pearson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExceedanceEstimate {
    pub trials: u64,
    pub exceedances: u64,
    pub indeterminate: u64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `x` with `I_x(a, b) = p`, by bisection.
fn beta_quantile(p: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Clopper–Pearson interval for `k` successes in `n` trials at level `1 - alpha`.
pub fn clopper_pearson(k: u64, n: u64, alpha: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(invalid("trials", "need 0 <= k <= n with n >= 1"));
    }
    let (kf, nf) = (k as f64, n as f64);
    let half = alpha / 2.0;
    let lower = match k {
        0 => 0.0,
        _ if k == n => half.powf(1.0 / nf),
        _ => beta_quantile(half, kf, nf - kf + 1.0),
    };
    let upper = match k {
        _ if k == n => 1.0,
        0 => 1.0 - half.powf(1.0 / nf),
        _ => beta_quantile(1.0 - half, kf + 1.0, nf - kf),
    };
    Ok((lower, upper))
}

pub fn exceedance_ci(records: &[TrialRecord]) -> Result<ExceedanceEstimate> {
    if records.is_empty() {
        return Err(invalid("records", "need at least one trial"));
    }
    let n = records.len() as u64;
    let k = records.iter().filter(|r| r.exceeded == Exceedance::Yes).count() as u64;
    let ind = records
        .iter()
        .filter(|r| r.exceeded == Exceedance::Indeterminate)
        .count() as u64;
    let (lower, upper) = clopper_pearson(k, n, 0.05)?;
    Ok(ExceedanceEstimate {
        trials: n,
        exceedances: k,
        indeterminate: ind,
        estimate: k as f64 / n as f64,
        lower,
        upper,
    })
}

/// Normalized discrepancy `D* sqrt(N / (d log2 d))` per sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    #[serde(rename = "N")]
    pub n: u64,
    pub trials: u64,
    pub median_normalized: f64,
    pub max_normalized: f64,
    pub bound_stated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingTable {
    pub d: usize,
    pub rows: Vec<ScalingRow>,
    /// Median at the largest `N` exceeds the smallest by more than 25%.
    /// `None` for a single sample size.
    pub trend: Option<bool>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Uses `dstar_upper`, so bracket trials are normalized conservatively.
pub fn scaling_table(d: usize, records: &[TrialRecord]) -> Result<ScalingTable> {
    // d = 1 has d log2 d = 0; normalize by sqrt(N) there
    let scale = if d == 1 { 1.0 } else { d_log2_d(d) };
    let mut ns: Vec<u64> = records.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let rows: Vec<ScalingRow> = ns
        .iter()
        .map(|&n| {
            let group: Vec<&TrialRecord> = records.iter().filter(|r| r.n == n).collect();
            let mut norm: Vec<f64> = group
                .iter()
                .map(|r| r.upper_f64() * (n as f64 / scale).sqrt())
                .collect();
            let max = norm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ScalingRow {
                n,
                trials: group.len() as u64,
                median_normalized: median(&mut norm),
                max_normalized: max,
                bound_stated: group[0].bound_stated,
            }
        })
        .collect();
    if rows.is_empty() {
        return Err(invalid("records", "need at least one trial"));
    }
    let trend = (rows.len() > 1).then(|| {
        let first = rows[0].median_normalized;
        let last = rows[rows.len() - 1].median_normalized;
        last > 1.25 * first
    });
    Ok(ScalingTable { d, rows, trend })
}

pub fn scaling_study(config: &ExperimentConfig) -> Result<ScalingTable> {
    let records = run_trials(config)?;
    scaling_table(config.d, &records)
}

/// Ceiling used for normalized medians in scaling reports.
pub const NORMALIZED_CEILING: f64 = STATED_CONSTANT;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BitCost {
    pub d: u64,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "H")]
    pub h: u64,
    /// `d (H + N - 1)`
    pub lacunary_bits: u128,
    /// `d H N`
    pub iid_bits: u128,
    pub ratio: f64,
}

pub fn bitcost_report(d: u64, n: u64, h: u64) -> Result<BitCost> {
    if d == 0 || n == 0 || h == 0 {
        return Err(invalid("bitcost", "d, N and H must be positive"));
    }
    let lac = d as u128 * (h as u128 + n as u128 - 1);
    let iid = d as u128 * h as u128 * n as u128;
    Ok(BitCost {
        d,
        n,
        h,
        lacunary_bits: lac,
        iid_bits: iid,
        ratio: iid as f64 / lac as f64,
    })
}

/// Empirical vs. formula tail of `max_k |S_k|` for centered Bernoulli sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BernsteinRow {
    pub t: f64,
    pub empirical: f64,
    pub bound: f64,
}

/// Simulates `reps` walks of `n` centered Bernoulli(`p`) steps and reports
/// `P(max_k |S_k| >= t)` for each `t`.
pub fn bernstein_experiment(
    reps: u64,
    n: u64,
    p: f64,
    ts: &[f64],
    seed: u64,
) -> Result<Vec<BernsteinRow>> {
    if reps == 0 {
        return Err(invalid("reps", "must be positive"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("p", "must lie in (0, 1)"));
    }
    let maxima: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = SplitMix64::new(derive(seed, r));
            let (mut hits, mut best) = (0u64, 0.0f64);
            for k in 1..=n {
                if rng.next_f64() < p {
                    hits += 1;
                }
                best = best.max((hits as f64 - k as f64 * p).abs());
            }
            best
        })
        .collect();
    ts.iter()
        .map(|&t| {
            let count = maxima.iter().filter(|&&m| m >= t).count();
            Ok(BernsteinRow {
                t,
                empirical: count as f64 / reps as f64,
                bound: bernstein_tail(n, p * (1.0 - p), t)?,
            })
        })
        .collect()
}

/// Renders a rational as a decimal with `digits` fractional digits, truncated.
pub fn rational_decimal(q: &BigRational, digits: u32) -> String {
    let scale = BigInt::from(10u32).pow(digits);
    let scaled = (q * BigRational::from_integer(scale)).floor().to_integer();
    let s = scaled.to_string();
    if digits == 0 {
        return s;
    }
    let padded = format!("{:0>width$}", s, width = digits as usize + 1);
    let (int, frac) = padded.split_at(padded.len() - digits as usize);
    format!("{int}.{frac}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuous_regime_never_exceeds() {
        let mut c = ExperimentConfig::new(2, 256, 0.5, 10);
        c.method = Method::Exact;
        let r = run_trials(&c).unwrap();
        assert_eq!(r.len(), 10);
        assert!(r.iter().all(|x| x.exceeded == Exceedance::No));
        assert!(r.iter().all(|x| x.dstar_lower == x.dstar_upper));
        assert!(r[0].bound_stated > 1.0);
    }

    #[test]
    fn bracket_records_respect_delta() {
        let mut c = ExperimentConfig::new(2, 512, 0.1, 4);
        c.method = Method::Brackets;
        c.delta_log2 = Some(6);
        for r in run_trials(&c).unwrap() {
            assert!(r.dstar_lower <= r.dstar_upper);
            let width = &r.dstar_upper - &r.dstar_lower;
            assert!(width <= dyadic_delta(r.delta_log2.unwrap()));
        }
    }

    #[test]
    fn exact_infeasible_is_an_error() {
        let mut c = ExperimentConfig::new(3, 2048, 0.1, 1);
        c.method = Method::Exact;
        assert!(matches!(run_trials(&c), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn csv_is_deterministic_across_workers() {
        let mut c = ExperimentConfig::new(2, 64, 0.5, 6);
        c.master_seed = 99;
        let render = |w| {
            let mut c = c.clone();
            c.workers = Some(w);
            let mut buf = Vec::new();
            write_csv(&run_trials(&c).unwrap(), &mut buf).unwrap();
            buf
        };
        let one = render(1);
        assert_eq!(one, render(3));
        let text = String::from_utf8(one).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn clopper_pearson_closed_forms() {
        let (lo, hi) = clopper_pearson(0, 100, 0.05).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 0.036217).abs() < 1e-5);
        let (lo, hi) = clopper_pearson(100, 100, 0.05).unwrap();
        assert!((lo - 0.963783).abs() < 1e-5);
        assert_eq!(hi, 1.0);
        assert_eq!(clopper_pearson(0, 1, 0.05).unwrap(), (0.0, 0.975));
        assert!(clopper_pearson(0, 0, 0.05).is_err());
    }

    #[test]
    fn clopper_pearson_interior_matches_reference() {
        // 3 of 20: reference interval from the beta quantiles
        let (lo, hi) = clopper_pearson(3, 20, 0.05).unwrap();
        assert!((lo - 0.032071).abs() < 1e-5, "{lo}");
        assert!((hi - 0.378927).abs() < 1e-5, "{hi}");
    }

    #[test]
    fn bitcost_examples() {
        let b = bitcost_report(3, 100, 32).unwrap();
        assert_eq!((b.lacunary_bits, b.iid_bits), (393, 9600));
        assert!((b.ratio - 24.427).abs() < 1e-3);
        let one = bitcost_report(1, 1, 1).unwrap();
        assert_eq!((one.lacunary_bits, one.iid_bits), (1, 1));
        let big = bitcost_report(2, 1_000_000, 32).unwrap();
        assert!((big.ratio - 32.0).abs() < 0.01);
        assert!(bitcost_report(0, 1, 1).is_err());
    }

    #[test]
    fn auto_delta_choice() {
        assert_eq!(auto_delta_log2(8.0), 4);
        // 0.52513 / 10 lies between 2^-5 and 2^-4
        assert_eq!(auto_delta_log2(0.52513), 5);
        assert_eq!(auto_delta_log2(0.01), 10);
    }

    #[test]
    fn scaling_single_row_has_no_trend() {
        let c = ExperimentConfig::new(2, 128, 0.5, 5);
        let t = scaling_study(&c).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.trend, None);
        assert!(t.rows[0].median_normalized <= NORMALIZED_CEILING);
    }

    #[test]
    fn decimal_rendering() {
        let q = BigRational::new(1.into(), 3.into());
        assert_eq!(rational_decimal(&q, 4), "0.3333");
        assert_eq!(rational_decimal(&BigRational::new(5.into(), 4.into()), 2), "1.25");
    }

    #[test]
    fn config_json_round_trip() {
        let c = ExperimentConfig::new(2, 64, 0.1, 3);
        let s = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        let minimal: ExperimentConfig =
            serde_json::from_str(r#"{"d":2,"n_grid":[64],"epsilon":0.1}"#).unwrap();
        assert_eq!(minimal.h_precision, 32);
        assert_eq!(minimal.method, Method::Auto);
    }
}
