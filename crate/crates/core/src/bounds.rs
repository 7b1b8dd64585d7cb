//! Closed-form bounds: chaining depth, modulo classes, Bernstein tails, the
//! per-layer tail bounds, the union-bound budget and the final discrepancy
//! bound, plus a numeric audit of every constant those formulas rely on.
//!
//! `log` without a base is the natural logarithm; `log2` is always explicit.

use std::f64::consts::{E, LN_2};

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::exact::ceil_log2;

/// Additive constant of the stated bound.
pub const STATED_CONSTANT: f64 = 87.0;
/// Coefficient of `-log(eps)/d` in the stated bound.
pub const STATED_EPS_COEFF: f64 = 7.0;
/// Additive constant of the bound before rounding up.
pub const DETAILED_CONSTANT: f64 = 86.357;
/// Coefficient of `-log(eps)/d` before rounding up.
pub const DETAILED_EPS_COEFF: f64 = 6.081;

const C1_BASE: f64 = 15.465;
const C1_EPS: f64 = 1.155;
const C2_BASE: f64 = 9.864;
const C2_EPS: f64 = 2.0 / 3.0;
const C3_BASE: f64 = 6.31;
const C4_BASE: f64 = 4.46;
/// Constant of the summed chain before adding the `lambda([y, beta_{H+1}))` term.
const CHAIN_SUM_CONSTANT: f64 = 82.357;

fn check_d(d: usize) -> Result<()> {
    if d < 2 {
        return Err(invalid("d", format!("must be at least 2, got {d}")));
    }
    Ok(())
}

fn check_eps(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("epsilon", format!("must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    Ok(())
}

/// `d log2 d`.
pub fn d_log2_d(d: usize) -> f64 {
    d as f64 * (d as f64).log2()
}

/// `H = ceil(log2(N)/2 - log2(d log2 d)/2 - 2)`; may be zero or negative.
pub fn chaining_depth(n: u64, d: usize) -> Result<i64> {
    check_d(d)?;
    check_n(n)?;
    let x = (n as f64).log2() / 2.0 - d_log2_d(d).log2() / 2.0 - 2.0;
    let r = x.round();
    let x = if (x - r).abs() < 1e-12 { r } else { x };
    Ok(x.ceil() as i64)
}

/// `sqrt(d log2 d) sqrt(N) <= 2^-h N` for every `h` in `0..=max(H, 0)`.
pub fn depth_margin_holds(n: u64, d: usize) -> Result<bool> {
    let depth = chaining_depth(n, d)?.max(0);
    let lhs = d_log2_d(d).sqrt() * (n as f64).sqrt();
    Ok((0..=depth).all(|h| lhs <= (n as f64) * 2f64.powi(-(h as i32))))
}

/// `kappa_h = ceil(log2(h + 2 + ceil(log2 d)))`.
pub fn kappa(h: u32, d: usize) -> u32 {
    assert!(d >= 1, "d must be at least 1");
    ceil_log2(h as u64 + 2 + ceil_log2(d as u64) as u64)
}

/// The residue classes `Q(N, kappa, gamma)`, `gamma = 1 ..= 2^kappa`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModuloClassPartition {
    pub n: u64,
    pub kappa: u32,
    pub classes: Vec<Vec<u64>>,
}

impl ModuloClassPartition {
    /// Smallest index difference between two members of one class.
    pub fn min_gap(&self) -> Option<u64> {
        self.classes
            .iter()
            .flat_map(|c| c.windows(2).map(|w| w[1] - w[0]))
            .min()
    }
}

pub fn modulo_classes(n: u64, kappa: u32) -> ModuloClassPartition {
    let modulus = 1u64 << kappa;
    let classes = (1..=modulus)
        .map(|gamma| {
            let first = if gamma == modulus { modulus } else { gamma };
            (first..=n).step_by(modulus as usize).collect()
        })
        .collect();
    ModuloClassPartition { n, kappa, classes }
}

/// `2 exp(-t^2 / (2 N sigma^2 + 2t/3))`, the maximal Bernstein tail.
pub fn bernstein_tail(n: u64, sigma2: f64, t: f64) -> Result<f64> {
    check_n(n)?;
    if !(sigma2 > 0.0) {
        return Err(invalid("sigma2", "must be positive"));
    }
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    Ok(2.0 * (-t * t / (2.0 * n as f64 * sigma2 + 2.0 * t / 3.0)).exp())
}

/// The constants of the layer tail bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundParams {
    pub d: usize,
    pub epsilon: f64,
    pub h: u32,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

/// `C1^2 / (4 + (2/sqrt 3) C1) - 1`.
pub fn c3_from_c1(c1: f64) -> f64 {
    c1 * c1 / (4.0 + 2.0 / 3f64.sqrt() * c1) - 1.0
}

/// `C2^2 / (4 + (2/3) C2) - 1`.
pub fn c4_from_c2(c2: f64) -> f64 {
    c2 * c2 / (4.0 + 2.0 / 3.0 * c2) - 1.0
}

impl BoundParams {
    /// Builds `C3`, `C4` from given `C1`, `C2` through the defining identity.
    pub fn from_c1_c2(d: usize, epsilon: f64, h: u32, c1: f64, c2: f64) -> Self {
        Self {
            d,
            epsilon,
            h,
            c1,
            c2,
            c3: c3_from_c1(c1),
            c4: c4_from_c2(c2),
        }
    }

    /// Whether `C3` and `C4` equal the values implied by `C1`, `C2` within `tol`.
    pub fn identity_holds(&self, tol: f64) -> bool {
        (self.c3 - c3_from_c1(self.c1)).abs() <= tol && (self.c4 - c4_from_c2(self.c2)).abs() <= tol
    }

    /// Whether `C1`, `C2` are large enough to supply `C3`, `C4`.
    pub fn identity_slack_ok(&self) -> bool {
        c3_from_c1(self.c1) >= self.c3 && c4_from_c2(self.c2) >= self.c4
    }

    /// Threshold `t_h`: `C1 sqrt(d log2 d) sqrt(N) sqrt(h 2^-h)` for `h >= 1`,
    /// `C2 sqrt(d log2 d) sqrt(N)` for `h = 0`.
    pub fn threshold(&self, n: u64, h: u32) -> f64 {
        let base = d_log2_d(self.d).sqrt() * (n as f64).sqrt();
        if h == 0 {
            self.c2 * base
        } else {
            self.c1 * base * (h as f64 * 2f64.powi(-(h as i32))).sqrt()
        }
    }
}

/// The chosen constants `C1 = 15.465 - 1.155 log(eps)/d`, `C2 = 9.864 - (2/3) log(eps)/d`,
/// `C3 = 6.31 - log(eps)/(dh)` and `C4 = 4.46 - log(eps)/d`.
pub fn constants(d: usize, epsilon: f64, h: u32) -> Result<BoundParams> {
    check_d(d)?;
    check_eps(epsilon)?;
    if h < 1 {
        return Err(invalid("h", "must be at least 1"));
    }
    let l = epsilon.ln() / d as f64;
    Ok(BoundParams {
        d,
        epsilon,
        h,
        c1: C1_BASE - C1_EPS * l,
        c2: C2_BASE - C2_EPS * l,
        c3: C3_BASE - l / h as f64,
        c4: C4_BASE - l,
    })
}

/// Probability bound for one layer: `2 exp(-C4 d)` at `h = 0` and
/// `2 exp(-C3 d h)` for `h >= 1`.
pub fn layer_tail_bound(h: u32, d: usize, n: u64, epsilon: f64) -> Result<f64> {
    check_n(n)?;
    let p = constants(d, epsilon, h.max(1))?;
    Ok(if h == 0 {
        2.0 * (-p.c4 * d as f64).exp()
    } else {
        2.0 * (-p.c3 * d as f64 * h as f64).exp()
    })
}

/// The same layer bound written through `C1` (or `C2` at `h = 0`), before
/// `C3`/`C4` are substituted. Never larger than [`layer_tail_bound`].
pub fn layer_tail_bound_via_c1(h: u32, d: usize, n: u64, epsilon: f64) -> Result<f64> {
    check_n(n)?;
    let p = constants(d, epsilon, h.max(1))?;
    Ok(if h == 0 {
        2.0 * (-c4_from_c2(p.c2) * d as f64).exp()
    } else {
        2.0 * (-c3_from_c1(p.c1) * d as f64 * h as f64).exp()
    })
}

/// `2^{kappa+1} exp(-(t^2 / 2^kappa) / (4 N 2^-h + 2t/3))`, the tail after
/// splitting indices into `2^kappa` classes.
pub fn modulo_class_tail(h: u32, d: usize, n: u64, t: f64) -> Result<f64> {
    check_n(n)?;
    if !(t > 0.0) {
        return Err(invalid("t", "must be positive"));
    }
    let k = kappa(h, d) as i32;
    let denom = 4.0 * n as f64 * 2f64.powi(-(h as i32)) + 2.0 * t / 3.0;
    Ok(2f64.powi(k + 1) * (-(t * t / 2f64.powi(k)) / denom).exp())
}

/// `log` of the union-bound term for layer `h`:
/// `1/2 (2e)^d 5^{3d/2} 2 e^{-C4 d}` at `h = 0`,
/// `1/2 (2e)^d 5^{(h+3)d/2} 2 e^{-C3 d h}` for `h >= 1`.
fn ln_budget_term(d: usize, h: u32, epsilon: f64) -> Result<f64> {
    let p = constants(d, epsilon, h.max(1))?;
    let df = d as f64;
    let ln_cover = df * (2.0 * E).ln() + (h as f64 + 3.0) * df * 5f64.ln() / 2.0;
    Ok(if h == 0 {
        ln_cover - p.c4 * df
    } else {
        ln_cover - p.c3 * df * h as f64
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetTerm {
    pub h: u32,
    pub value: f64,
    /// `eps/2` at `h = 0`, `eps/2^{h+1}` otherwise.
    pub limit: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReport {
    pub d: usize,
    pub epsilon: f64,
    pub depth: u32,
    pub terms: Vec<BudgetTerm>,
    pub sum: f64,
    /// `2^{h+3} + 1 <= 5^{(h+3)/2}` for `h` in `0..=60`.
    pub majorization_ok: bool,
    pub passed: bool,
}

pub fn majorization_holds(h: u32) -> bool {
    2f64.powi(h as i32 + 3) + 1.0 <= 5f64.powf((h as f64 + 3.0) / 2.0)
}

/// Evaluates the union bound over layers `0..=depth`.
pub fn union_budget_to_depth(d: usize, depth: u32, epsilon: f64) -> Result<BudgetReport> {
    check_d(d)?;
    check_eps(epsilon)?;
    let mut terms = Vec::with_capacity(depth as usize + 1);
    for h in 0..=depth {
        let ln_value = ln_budget_term(d, h, epsilon)?;
        let ln_limit = epsilon.ln() - (h as f64 + 1.0) * LN_2;
        terms.push(BudgetTerm {
            h,
            value: ln_value.exp(),
            limit: ln_limit.exp(),
            passed: ln_value <= ln_limit,
        });
    }
    let sum: f64 = terms.iter().map(|t| t.value).sum();
    let majorization_ok = (0..=60).all(majorization_holds);
    let passed = majorization_ok && sum <= epsilon && terms.iter().all(|t| t.passed);
    Ok(BudgetReport {
        d,
        epsilon,
        depth,
        terms,
        sum,
        majorization_ok,
        passed,
    })
}

/// Union bound with depth `H(N, d)`; infeasible when `H < 1`.
pub fn union_budget(d: usize, n: u64, epsilon: f64) -> Result<BudgetReport> {
    let depth = chaining_depth(n, d)?;
    if depth < 1 {
        return Err(Error::ChainInfeasible { n, d, depth });
    }
    union_budget_to_depth(d, depth as u32, epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundVariant {
    /// `(87 - 7 log(eps)/d) sqrt(d log2 d / N)`.
    Stated,
    /// `(86.357 - 6.081 log(eps)/d) sqrt(d log2 d / N)`.
    Detailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LacunaryBound {
    pub value: f64,
    /// The bound exceeds 1 and says nothing.
    pub vacuous: bool,
}

pub fn lacunary_bound(d: usize, n: u64, epsilon: f64, variant: BoundVariant) -> Result<LacunaryBound> {
    check_d(d)?;
    check_n(n)?;
    check_eps(epsilon)?;
    let (c, k) = match variant {
        BoundVariant::Stated => (STATED_CONSTANT, STATED_EPS_COEFF),
        BoundVariant::Detailed => (DETAILED_CONSTANT, DETAILED_EPS_COEFF),
    };
    let value = (c - k * epsilon.ln() / d as f64) * (d_log2_d(d) / n as f64).sqrt();
    Ok(LacunaryBound {
        value,
        vacuous: value > 1.0,
    })
}

/// `sqrt(c_abs d / N)`, the existence bound for the best `N`-point sets.
pub fn existence_bound(d: usize, n: u64, c_abs: f64) -> Result<f64> {
    if d == 0 {
        return Err(invalid("d", "must be at least 1"));
    }
    check_n(n)?;
    if !(c_abs > 0.0) {
        return Err(invalid("c_abs", "must be positive"));
    }
    Ok((c_abs * d as f64 / n as f64).sqrt())
}

/// Grid used by [`constants_audit`].
pub const AUDIT_DIMS: std::ops::RangeInclusive<usize> = 2..=64;
pub const AUDIT_LEVELS: std::ops::RangeInclusive<u32> = 1..=40;
pub const AUDIT_EPSILONS: [f64; 5] = [0.9, 0.5, 0.1, 1e-3, 1e-6];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditCheck {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Smallest `rhs - lhs` over all cases (negative means a failure).
    pub min_slack: f64,
}

impl AuditCheck {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
    /// `sum_{h=1}^{1000} sqrt(h 2^-h)`.
    pub series_sum: f64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(AuditCheck::passed)
    }
}

struct Tally {
    name: &'static str,
    cases: usize,
    failures: usize,
    min_slack: f64,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: 0,
            min_slack: f64::INFINITY,
        }
    }

    /// Records `lhs <= rhs`.
    fn le(&mut self, lhs: f64, rhs: f64) {
        self.cases += 1;
        let slack = rhs - lhs;
        if !(slack >= 0.0) {
            self.failures += 1;
        }
        self.min_slack = self.min_slack.min(slack);
    }

    /// Records `lhs <= rhs` up to rounding, for inequalities that are tight
    /// by construction.
    fn le_rounded(&mut self, lhs: f64, rhs: f64) {
        self.le(lhs, rhs + 1e-12 * rhs.abs());
    }

    fn finish(self) -> AuditCheck {
        AuditCheck {
            name: self.name,
            cases: self.cases,
            failures: self.failures,
            min_slack: self.min_slack,
        }
    }
}

/// `sum_{h=1}^{terms} sqrt(h 2^-h)`.
pub fn chain_series(terms: u32) -> f64 {
    (1..=terms)
        .map(|h| (h as f64 * 2f64.powi(-(h as i32))).sqrt())
        .sum()
}

/// Numerically checks every inequality the constants are meant to satisfy.
/// Failures are counted, never raised.
pub fn constants_audit() -> AuditReport {
    let ln2 = LN_2;
    let ln5 = 5f64.ln();
    let mut eq8a = Tally::new("C4 covers the h = 0 union term");
    let mut eq9 = Tally::new("C3 covers the h >= 1 union terms");
    let mut c1c3 = Tally::new("C1 supplies C3 through the tail identity");
    let mut c2c4 = Tally::new("C2 supplies C4 through the tail identity");
    let mut kappa_h = Tally::new("kappa log 2 absorbed by d h (h >= 1)");
    let mut kappa_0 = Tally::new("kappa log 2 absorbed by d (h = 0)");
    let mut budget = Tally::new("union budget terms within eps / 2^{h+1}");
    let mut budget_sum = Tally::new("union budget sums to at most eps");

    for d in AUDIT_DIMS {
        let df = d as f64;
        for &eps in &AUDIT_EPSILONS {
            let le = eps.ln();
            let c4 = C4_BASE - le / df;
            eq8a.le(1.0 + ln2 + 1.5 * ln5 + ln2 / df - le / df, c4);
            let c2 = C2_BASE - C2_EPS * le / df;
            c2c4.le(c4, c4_from_c2(c2));
            for h in AUDIT_LEVELS {
                let hf = h as f64;
                let p = constants(d, eps, h).expect("audit grid is admissible");
                eq9.le(
                    (1.0 + 2.0 * ln2 + 1.5 * ln5) * df + ln5 / 2.0 * df * hf + ln2 * hf - le,
                    p.c3 * df * hf,
                );
                c1c3.le(p.c3, c3_from_c1(p.c1));
            }
            let report =
                union_budget_to_depth(d, *AUDIT_LEVELS.end(), eps).expect("audit grid is admissible");
            for t in &report.terms {
                budget.le(t.value.ln(), t.limit.ln());
            }
            budget_sum.le(report.sum, eps);
        }
        kappa_0.le(kappa(0, d) as f64 * ln2, df);
        for h in AUDIT_LEVELS {
            kappa_h.le(kappa(h, d) as f64 * ln2, df * h as f64);
        }
    }

    let mut major = Tally::new("2^{h+3} + 1 <= 5^{(h+3)/2}");
    for h in 0..=60 {
        major.le(2f64.powi(h + 3) + 1.0, 5f64.powf((h as f64 + 3.0) / 2.0));
    }

    let series_sum = chain_series(1000);
    let mut series = Tally::new("chain sum constant 9.864 + 15.465 S <= 82.357");
    series.le(C2_BASE + C1_BASE * series_sum, CHAIN_SUM_CONSTANT);
    let mut series_eps = Tally::new("chain sum eps coefficient 2/3 + 1.155 S <= 6.081");
    series_eps.le(C2_EPS + C1_EPS * series_sum, DETAILED_EPS_COEFF);
    let mut remainder = Tally::new("82.357 + 4 <= 86.357 <= 87 and 6.081 <= 7");
    remainder.le(CHAIN_SUM_CONSTANT + 4.0, DETAILED_CONSTANT);
    remainder.le(DETAILED_CONSTANT, STATED_CONSTANT);
    remainder.le(DETAILED_EPS_COEFF, STATED_EPS_COEFF);

    // lambda([y, beta_{H+1})) <= 2^-H <= 4 sqrt(d log2 d / N), and the spacing
    // sqrt(d log2 d) sqrt(N) <= 2^-h N for h <= H.
    let mut tail_term = Tally::new("2^-H <= 4 sqrt(d log2 d / N)");
    let mut spacing = Tally::new("sqrt(d log2 d N) <= 2^-h N for h <= H");
    for d in AUDIT_DIMS {
        for k in 1..=40u32 {
            for n in [1u64 << k, (1u64 << k) + 1, 3u64 << (k - 1)] {
                let depth = chaining_depth(n, d).expect("admissible");
                tail_term.le_rounded(2f64.powi(-depth as i32), 4.0 * (d_log2_d(d) / n as f64).sqrt());
                let lhs = d_log2_d(d).sqrt() * (n as f64).sqrt();
                if depth >= 0 {
                    spacing.le_rounded(lhs, n as f64 * 2f64.powi(-depth as i32));
                }
            }
        }
    }

    AuditReport {
        checks: [
            eq8a, eq9, c1c3, c2c4, kappa_h, kappa_0, budget, budget_sum, major, series, series_eps,
            remainder, tail_term, spacing,
        ]
        .into_iter()
        .map(Tally::finish)
        .collect(),
        series_sum,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn depth_examples() {
        assert_eq!(chaining_depth(1024, 2).unwrap(), 3);
        assert_eq!(chaining_depth(65536, 2).unwrap(), 6);
        assert_eq!(chaining_depth(16, 2).unwrap(), 0);
        assert_eq!(chaining_depth(1024, 3).unwrap(), 2);
        assert!(chaining_depth(1024, 1).is_err());
        assert!(depth_margin_holds(1024, 2).unwrap());
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(0, 2), 2);
        assert_eq!(kappa(6, 2), 4);
        assert_eq!(kappa(0, 1), 1);
    }

    #[test]
    fn modulo_class_examples() {
        let p = modulo_classes(8, 1);
        assert_eq!(p.classes, vec![vec![1, 3, 5, 7], vec![2, 4, 6, 8]]);
        let sizes: Vec<usize> = modulo_classes(10, 2).classes.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 3, 2, 2]);
        assert_eq!(modulo_classes(5, 0).classes, vec![vec![1, 2, 3, 4, 5]]);
    }

    #[test]
    fn bernstein_examples() {
        let v = bernstein_tail(100, 0.25, 10.0).unwrap();
        assert!((v - 2.0 * (-30.0f64 / 17.0).exp()).abs() < 1e-12);
        assert!((v - 0.342474).abs() < 1e-6);
        assert!((bernstein_tail(100, 0.25, 1e-9).unwrap() - 2.0).abs() < 1e-9);
        assert!(bernstein_tail(100, 0.0, 1.0).is_err());
        assert!(bernstein_tail(100, 0.25, 0.0).is_err());
    }

    #[test]
    fn constant_examples() {
        let p = constants(2, 0.1, 1).unwrap();
        assert!((p.c4 - 5.6112925).abs() < 1e-6);
        assert!((p.c3 - 7.4612925).abs() < 1e-6);
        let near_one = constants(2, 1.0 - 1e-12, 1).unwrap();
        assert!((near_one.c1 - 15.465).abs() < 1e-9);
        assert!((near_one.c2 - 9.864).abs() < 1e-9);
        assert!(constants(2, 1.0, 1).is_err());
        assert!(constants(1, 0.5, 1).is_err());
        assert!(constants(2, 0.5, 0).is_err());
        assert!(p.identity_slack_ok());
        assert!(!p.identity_holds(1e-9));
        let derived = BoundParams::from_c1_c2(2, 0.1, 1, p.c1, p.c2);
        assert!(derived.identity_holds(1e-9));
    }

    #[test]
    fn thresholds() {
        let p = constants(2, 0.5, 1).unwrap();
        let base = 2f64.sqrt() * 32.0;
        assert!((p.threshold(1024, 0) - p.c2 * base).abs() < 1e-9);
        assert!((p.threshold(1024, 2) - p.c1 * base * 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn layer_tail_examples() {
        let t0 = layer_tail_bound(0, 2, 1024, 0.1).unwrap();
        assert!((t0 - 2.6737649e-5).abs() < 1e-11);
        let t1 = layer_tail_bound(1, 2, 1024, 0.1).unwrap();
        assert!((t1 - 6.6104897e-7).abs() < 1e-13);
        assert!(layer_tail_bound(2, 2, 1024, 0.1).unwrap() < t1);
        for h in 0..10 {
            assert!(layer_tail_bound_via_c1(h, 2, 1024, 0.1).unwrap() <= layer_tail_bound(h, 2, 1024, 0.1).unwrap());
        }
    }

    #[test]
    fn modulo_class_tail_is_a_probability_bound_shape() {
        let a = modulo_class_tail(1, 2, 1024, 100.0).unwrap();
        let b = modulo_class_tail(1, 2, 1024, 200.0).unwrap();
        assert!(b < a);
        assert!(modulo_class_tail(1, 2, 1024, 0.0).is_err());
    }

    #[test]
    fn budget_examples() {
        let r = union_budget_to_depth(2, 1, 0.1).unwrap();
        assert!((r.terms[0].value - 0.0493915).abs() < 1e-6);
        assert!(r.terms[0].passed);
        assert!((r.terms[1].value - 0.0061057).abs() < 1e-6);
        assert!(r.terms[1].passed);
        assert!(r.passed);
        assert!(majorization_holds(0));
        assert!(union_budget(2, 16, 0.1).is_err());
        assert_eq!(union_budget(2, 65536, 0.1).unwrap().terms.len(), 7);
    }

    #[test]
    fn theorem_examples() {
        let b = lacunary_bound(2, 8192, (-2.0f64).exp(), BoundVariant::Stated).unwrap();
        assert!((b.value - 1.46875).abs() < 1e-12);
        assert!(b.vacuous);
        let s = lacunary_bound(2, 65536, 0.1, BoundVariant::Stated).unwrap();
        assert!((s.value - 0.52513).abs() < 1e-5);
        assert!(!s.vacuous);
        let det = lacunary_bound(2, 65536, 0.1, BoundVariant::Detailed).unwrap();
        assert!((det.value - 0.51574).abs() < 1e-5);
        assert!(lacunary_bound(1, 100, 0.1, BoundVariant::Stated).is_err());
        assert!(lacunary_bound(2, 100, 1.5, BoundVariant::Stated).is_err());
    }

    #[test]
    fn existence_bound_examples() {
        assert!((existence_bound(2, 8, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((existence_bound(1, 100, 4.0).unwrap() - 0.2).abs() < 1e-15);
        assert!(existence_bound(2, 9, 1.0).unwrap() < existence_bound(2, 8, 1.0).unwrap());
        assert!(existence_bound(2, 8, 0.0).is_err());
    }

    #[test]
    fn audit_passes_with_expected_spot_values() {
        let r = constants_audit();
        for c in &r.checks {
            assert!(c.passed(), "{c:?}");
        }
        assert!((r.series_sum - 4.14504).abs() < 1e-5);
        assert!(r.series_sum <= (82.357 - 9.864) / 15.465);
        // first-layer constant spot value at d = 2
        let rhs = 1.0 + LN_2 + 1.5 * 5f64.ln() + LN_2 / 2.0;
        assert!((rhs - 4.4538776).abs() < 1e-6 && rhs <= 4.46);
        assert!((c4_from_c2(9.864) - 8.1999334).abs() < 1e-6);
        assert!((c3_from_c1(15.465) - 9.9420949).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn stated_dominates_detailed(d in 2usize..200, n in 1u64..1_000_000_000, eps in 1e-9f64..0.999) {
            let s = lacunary_bound(d, n, eps, BoundVariant::Stated).unwrap().value;
            let t = lacunary_bound(d, n, eps, BoundVariant::Detailed).unwrap().value;
            prop_assert!(s >= t);
        }

        #[test]
        fn bernstein_monotonicity(n in 1u64..10_000, s in 0.001f64..1.0, t in 0.1f64..100.0) {
            let base = bernstein_tail(n, s, t).unwrap();
            prop_assert!(base > 0.0 && base <= 2.0);
            prop_assert!(bernstein_tail(n, s, t * 1.5).unwrap() < base);
            prop_assert!(bernstein_tail(n, s * 1.5, t).unwrap() > base);
        }

        #[test]
        fn class_partition_invariants(n in 1u64..500, h in 0u32..8, d in 1usize..20) {
            let k = kappa(h, d);
            let p = modulo_classes(n, k);
            let mut all: Vec<u64> = p.classes.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (1..=n).collect::<Vec<_>>());
            let cap = n.div_ceil(1 << k) as usize;
            for c in &p.classes {
                prop_assert!(c.len() <= cap);
                for w in c.windows(2) {
                    prop_assert_eq!(w[1] - w[0], 1u64 << k);
                }
            }
            if let Some(g) = p.min_gap() {
                prop_assert!(g >= h as u64 + 2 + ceil_log2(d as u64) as u64);
            }
        }

        #[test]
        fn formulas_are_reproducible(d in 2usize..64, n in 1u64..1_000_000, eps in 1e-6f64..0.99) {
            let a = lacunary_bound(d, n, eps, BoundVariant::Stated).unwrap();
            let b = lacunary_bound(d, n, eps, BoundVariant::Stated).unwrap();
            prop_assert!((a.value - b.value).abs() <= 1e-12);
        }
    }
}
