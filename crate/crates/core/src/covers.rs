//! Bracketing covers, dyadic snapping and the chaining decomposition.
//!
//! A bracket `(v, w)` with `v <= w` stands for the set `[0,w) \ [0,v)`; its
//! weight is `lambda([0,w)) - lambda([0,v))`. A `delta`-bracketing cover puts
//! every point of the unit cube inside some bracket of weight at most `delta`.
//!
//! The base cover is the uniform `m`-grid whose cells are the brackets. It is
//! kept implicit (cells are indexed, never stored) so covers with `m^d` far
//! beyond memory can still be probed and used for chaining.

use std::collections::BTreeSet;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::bounds::chaining_depth;
use crate::error::{invalid, Error, Result};
use crate::exact::{ceil_log2, pow_big};
use crate::geometry::Corner;

/// Largest bit count any snapped corner grid may use.
const MAX_SNAP_BITS: u32 = 62;

/// One bracket `(v, w)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Bracket {
    lower: Corner,
    upper: Corner,
}

impl Bracket {
    pub fn new(lower: Corner, upper: Corner) -> Result<Self> {
        lower.check_dim(upper.d())?;
        if !lower.le(&upper) {
            return Err(Error::MalformedCover(
                "bracket lower corner is not below its upper corner".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &Corner {
        &self.lower
    }

    pub fn upper(&self) -> &Corner {
        &self.upper
    }

    /// `lambda([0,w) \ [0,v))`.
    pub fn weight(&self) -> BigRational {
        self.upper.volume() - self.lower.volume()
    }

    /// `v <= y <= w`.
    pub fn contains(&self, y: &Corner) -> bool {
        self.lower.le(y) && y.le(&self.upper)
    }
}

/// The corner grids of a snapped cover: lower corners on multiples of
/// `2^-(h+1+ceil(log2 d))`, upper corners on multiples of `2^-(h+2+ceil(log2 d))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SnapGrid {
    pub h: u32,
    pub lower_bits: u32,
    pub upper_bits: u32,
}

impl SnapGrid {
    pub fn new(h: u32, d: usize) -> Result<Self> {
        let c = ceil_log2(d as u64);
        let upper_bits = h + 2 + c;
        if upper_bits > MAX_SNAP_BITS {
            return Err(invalid(
                "h",
                format!("snap grid 2^-{upper_bits} is finer than 2^-{MAX_SNAP_BITS}"),
            ));
        }
        Ok(Self {
            h,
            lower_bits: h + 1 + c,
            upper_bits,
        })
    }

    /// Common denominator of snapped corners.
    pub fn scale(&self) -> u64 {
        1u64 << self.upper_bits
    }

    /// Snaps numerators over `src_scale` onto the grids, returning numerators
    /// over `self.scale()`.
    fn snap(&self, lower: &[u64], upper: &[u64], src_scale: u64) -> (Vec<u64>, Vec<u64>) {
        let s = src_scale as u128;
        let lo = lower
            .iter()
            .map(|&k| (((k as u128) << self.lower_bits) / s) as u64 * 2)
            .collect();
        let hi = upper
            .iter()
            .map(|&k| ((k as u128) << self.upper_bits).div_ceil(s) as u64)
            .collect();
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Layout {
    /// Cells `[k/m, (k+1)/m]` of the uniform grid.
    Grid { cells: u64 },
    /// Explicit brackets, numerators over `scale`.
    Explicit {
        scale: u64,
        brackets: Vec<(Vec<u64>, Vec<u64>)>,
    },
}

/// A finite `delta`-bracketing cover of `[0,1]^d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BracketingCover {
    d: usize,
    delta: BigRational,
    layout: Layout,
    snap: Option<SnapGrid>,
}

impl BracketingCover {
    /// Wraps explicit brackets. Weights are checked against `delta`; coverage
    /// is the caller's claim and can be checked with [`BracketingCover::probe`].
    pub fn from_brackets(d: usize, delta: BigRational, brackets: Vec<Bracket>) -> Result<Self> {
        if brackets.is_empty() {
            return Err(Error::MalformedCover("no brackets".into()));
        }
        if !delta.is_positive() {
            return Err(invalid("delta", "must be positive"));
        }
        let scale = brackets.iter().try_fold(1u64, |acc, b| {
            let l = num_integer::lcm(acc, num_integer::lcm(b.lower.scale(), b.upper.scale()));
            (l <= 1u64 << 62).then_some(l)
        });
        let scale = scale.ok_or_else(|| Error::MalformedCover("corner denominators too large".into()))?;
        let mut out = Vec::with_capacity(brackets.len());
        for b in brackets {
            b.lower.check_dim(d)?;
            b.upper.check_dim(d)?;
            if b.weight() > delta {
                return Err(Error::MalformedCover(format!(
                    "bracket weight {} exceeds delta {delta}",
                    b.weight()
                )));
            }
            let lo = b.lower.rescale(scale).expect("lcm denominator");
            let hi = b.upper.rescale(scale).expect("lcm denominator");
            out.push((lo.coords().to_vec(), hi.coords().to_vec()));
        }
        Ok(Self {
            d,
            delta,
            layout: Layout::Explicit {
                scale,
                brackets: out,
            },
            snap: None,
        })
    }

    /// The single bracket `(0, 1)`, a valid 1-cover.
    pub fn trivial(d: usize) -> Self {
        Self {
            d,
            delta: BigRational::one(),
            layout: Layout::Explicit {
                scale: 1,
                brackets: vec![(vec![0; d], vec![1; d])],
            },
            snap: None,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn delta(&self) -> &BigRational {
        &self.delta
    }

    pub fn snap_grid(&self) -> Option<SnapGrid> {
        self.snap
    }

    /// Cells per axis for grid covers.
    pub fn grid_cells(&self) -> Option<u64> {
        match self.layout {
            Layout::Grid { cells } => Some(cells),
            Layout::Explicit { .. } => None,
        }
    }

    /// Common denominator of all corner coordinates.
    pub fn scale(&self) -> u64 {
        match (&self.snap, &self.layout) {
            (Some(s), _) => s.scale(),
            (None, Layout::Grid { cells }) => *cells,
            (None, Layout::Explicit { scale, .. }) => *scale,
        }
    }

    /// The corner denominator if it is a power of two, else 0.
    pub fn corner_denominator(&self) -> u64 {
        let s = self.scale();
        if s.is_power_of_two() {
            s
        } else {
            0
        }
    }

    /// Number of indexed brackets (`m^d` for grid covers), saturating.
    /// Snapping may map several cells onto one bracket, so this bounds the
    /// number of distinct brackets from above.
    pub fn len(&self) -> u128 {
        match &self.layout {
            Layout::Grid { cells } => (0..self.d).try_fold(1u128, |acc, _| acc.checked_mul(*cells as u128)).unwrap_or(u128::MAX),
            Layout::Explicit { brackets, .. } => brackets.len() as u128,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn cell_numerators(&self, cell: &[u64]) -> (Vec<u64>, Vec<u64>) {
        let lo: Vec<u64> = cell.to_vec();
        let hi: Vec<u64> = cell.iter().map(|&k| k + 1).collect();
        match (&self.snap, &self.layout) {
            (Some(s), Layout::Grid { cells }) => s.snap(&lo, &hi, *cells),
            _ => (lo, hi),
        }
    }

    fn to_bracket(&self, lo: Vec<u64>, hi: Vec<u64>) -> Bracket {
        let s = self.scale();
        Bracket {
            lower: Corner::new(lo, s).expect("cover corners lie in the unit cube"),
            upper: Corner::new(hi, s).expect("cover corners lie in the unit cube"),
        }
    }

    /// Calls `f(lower, upper)` with numerators over [`Self::scale`] for every
    /// indexed bracket.
    pub fn for_each_bracket(&self, mut f: impl FnMut(&[u64], &[u64])) {
        match &self.layout {
            Layout::Explicit { brackets, .. } => {
                for (lo, hi) in brackets {
                    f(lo, hi);
                }
            }
            Layout::Grid { cells } => {
                let m = *cells;
                let mut cell = vec![0u64; self.d];
                loop {
                    let (lo, hi) = self.cell_numerators(&cell);
                    f(&lo, &hi);
                    // odometer increment
                    let mut axis = 0;
                    loop {
                        if axis == self.d {
                            return;
                        }
                        cell[axis] += 1;
                        if cell[axis] < m {
                            break;
                        }
                        cell[axis] = 0;
                        axis += 1;
                    }
                }
            }
        }
    }

    /// Distinct brackets, refusing to materialize more than `limit` cells.
    pub fn brackets(&self, limit: u128) -> Result<Vec<Bracket>> {
        if self.len() > limit {
            return Err(Error::BudgetExceeded {
                required: self.len(),
                budget: limit,
            });
        }
        let mut seen = BTreeSet::new();
        self.for_each_bracket(|lo, hi| {
            seen.insert((lo.to_vec(), hi.to_vec()));
        });
        Ok(seen
            .into_iter()
            .map(|(lo, hi)| self.to_bracket(lo, hi))
            .collect())
    }

    /// A bracket containing `y`. Grid covers answer by floor-indexing the cell
    /// of `y` (clamped to the last cell on the far face), so the answer is a
    /// deterministic function of `y`; explicit covers return the first match.
    pub fn locate(&self, y: &Corner) -> Result<Option<Bracket>> {
        y.check_dim(self.d)?;
        match &self.layout {
            Layout::Grid { cells } => {
                let m = *cells as u128;
                let cell: Vec<u64> = y
                    .coords()
                    .iter()
                    .map(|&c| ((c as u128 * m / y.scale() as u128).min(m - 1)) as u64)
                    .collect();
                let (lo, hi) = self.cell_numerators(&cell);
                Ok(Some(self.to_bracket(lo, hi)))
            }
            Layout::Explicit { brackets, scale } => Ok(brackets
                .iter()
                .map(|(lo, hi)| {
                    (
                        Corner::new(lo.clone(), *scale).expect("valid corner"),
                        Corner::new(hi.clone(), *scale).expect("valid corner"),
                    )
                })
                .find(|(lo, hi)| lo.le(y) && y.le(hi))
                .map(|(lower, upper)| Bracket { lower, upper })),
        }
    }

    /// Probes `count` pseudorandom points and reports coverage and the largest
    /// weight seen.
    pub fn probe(&self, count: usize, seed: u64) -> Result<ProbeReport> {
        let mut rng = crate::rng::SplitMix64::new(seed);
        let probe_bits = 40u32;
        let mut uncovered = 0usize;
        let mut over_delta = 0usize;
        let mut max_weight = BigRational::zero();
        let grids = self.snap.map(|s| (s.lower_bits, s.upper_bits));
        let mut off_grid = 0usize;
        for _ in 0..count {
            let y = Corner::dyadic(
                (0..self.d).map(|_| rng.next_u64() >> (64 - probe_bits)).collect(),
                probe_bits,
            )?;
            match self.locate(&y)? {
                Some(b) if b.contains(&y) => {
                    let w = b.weight();
                    if w > self.delta {
                        over_delta += 1;
                    }
                    if let Some((lb, ub)) = grids {
                        if !b.lower.on_dyadic_grid(lb) || !b.upper.on_dyadic_grid(ub) {
                            off_grid += 1;
                        }
                    }
                    if w > max_weight {
                        max_weight = w;
                    }
                }
                _ => uncovered += 1,
            }
        }
        Ok(ProbeReport {
            probes: count,
            uncovered,
            over_delta,
            off_grid,
            max_weight,
        })
    }
}

/// Outcome of [`BracketingCover::probe`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeReport {
    pub probes: usize,
    pub uncovered: usize,
    pub over_delta: usize,
    pub off_grid: usize,
    pub max_weight: BigRational,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.uncovered == 0 && self.over_delta == 0 && self.off_grid == 0
    }
}

/// Smallest `m` with `1 - (1 - 1/m)^d <= delta`.
pub fn grid_cells_for(d: usize, delta: &BigRational) -> Result<u64> {
    if d == 0 {
        return Err(invalid("d", "must be at least 1"));
    }
    if !delta.is_positive() || delta > &BigRational::one() {
        return Err(invalid("delta", format!("must lie in (0, 1], got {delta}")));
    }
    let p: BigUint = delta.numer().to_biguint().expect("positive");
    let q: BigUint = delta.denom().to_biguint().expect("positive");
    // (m-1)^d * q >= (q - p) * m^d
    let ok = |m: u64| num_traits::pow(BigUint::from(m - 1), d) * &q >= (&q - &p) * num_traits::pow(BigUint::from(m), d);
    // 1 - (1-1/m)^d <= d/m, so m = ceil(d / delta) always qualifies.
    let hi_big = (BigInt::from(d) * delta.denom()).div_ceil(delta.numer());
    let mut hi = hi_big
        .to_u64()
        .ok_or_else(|| invalid("delta", "too small for a grid cover"))?;
    let mut lo = 1u64;
    if ok(lo) {
        return Ok(lo);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// The uniform-grid `delta`-cover: `m^d` cells with `m` minimal such that the
/// heaviest cell, `1 - (1 - 1/m)^d`, weighs at most `delta`.
pub fn build_base_cover(d: usize, delta: &BigRational) -> Result<BracketingCover> {
    let cells = grid_cells_for(d, delta)?;
    Ok(BracketingCover {
        d,
        delta: delta.clone(),
        layout: Layout::Grid { cells },
        snap: None,
    })
}

/// `2^-k` as a rational.
pub fn dyadic_delta(k: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::one() << k)
}

/// Rounds every lower corner down to multiples of `2^-(h+1+ceil(log2 d))` and
/// every upper corner up to multiples of `2^-(h+2+ceil(log2 d))`, turning a
/// `2^-(h+2)`-cover into a `2^-h`-cover on dyadic corners.
pub fn dyadic_snap(cover: &BracketingCover, h: u32) -> Result<BracketingCover> {
    if cover.snap.is_some() {
        return Err(Error::MalformedCover("cover is already snapped".into()));
    }
    if cover.delta > dyadic_delta(h + 2) {
        return Err(invalid(
            "delta",
            format!("snapping at h = {h} needs a 2^-{} cover, got delta = {}", h + 2, cover.delta),
        ));
    }
    let grid = SnapGrid::new(h, cover.d)?;
    let layout = match &cover.layout {
        Layout::Grid { cells } => Layout::Grid { cells: *cells },
        Layout::Explicit { scale, brackets } => {
            let snapped: BTreeSet<(Vec<u64>, Vec<u64>)> = brackets
                .iter()
                .map(|(lo, hi)| grid.snap(lo, hi, *scale))
                .collect();
            return Ok(BracketingCover {
                d: cover.d,
                delta: dyadic_delta(h),
                layout: Layout::Explicit {
                    scale: grid.scale(),
                    brackets: snapped.into_iter().collect(),
                },
                snap: Some(grid),
            });
        }
    };
    Ok(BracketingCover {
        d: cover.d,
        delta: dyadic_delta(h),
        layout,
        snap: Some(grid),
    })
}

/// The level-`h` cover used by chaining: the `2^-(h+2)` grid cover snapped to
/// a `2^-h` dyadic cover.
pub fn chain_cover(d: usize, h: u32) -> Result<BracketingCover> {
    dyadic_snap(&build_base_cover(d, &dyadic_delta(h + 2))?, h)
}

/// A layer `K_h = [0, beta_{h+1}) \ [0, beta_h)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer<'a> {
    pub level: usize,
    pub low: &'a Corner,
    pub high: &'a Corner,
}

impl Layer<'_> {
    pub fn volume(&self) -> BigRational {
        self.high.volume() - self.low.volume()
    }

    /// Membership of a point (given as a corner) in the layer.
    pub fn contains(&self, x: &Corner) -> bool {
        x.lt_all(self.high) && !x.lt_all(self.low)
    }
}

/// The chain `0 = beta_0 <= beta_1 <= ... <= beta_H <= y <= beta_{H+1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainingDecomposition {
    y: Corner,
    depth: usize,
    betas: Vec<Corner>,
}

impl ChainingDecomposition {
    pub fn target(&self) -> &Corner {
        &self.y
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `beta_0 ..= beta_{H+1}`.
    pub fn betas(&self) -> &[Corner] {
        &self.betas
    }

    /// `K_0 ..= K_H`; empty layers are kept with volume 0.
    pub fn layers(&self) -> Vec<Layer<'_>> {
        self.betas
            .windows(2)
            .enumerate()
            .map(|(level, w)| Layer {
                level,
                low: &w[0],
                high: &w[1],
            })
            .collect()
    }
}

/// Builds chains for a fixed `(d, H)`, holding the covers `Delta_1 ..= Delta_H`.
#[derive(Debug, Clone)]
pub struct ChainBuilder {
    d: usize,
    covers: Vec<BracketingCover>,
}

impl ChainBuilder {
    /// Uses the chaining depth `H(N, d)`; fails when `H < 1`.
    pub fn new(d: usize, n: u64) -> Result<Self> {
        let depth = chaining_depth(n, d)?;
        if depth < 1 {
            return Err(Error::ChainInfeasible { n, d, depth });
        }
        Self::with_depth(d, depth as usize)
    }

    pub fn with_depth(d: usize, depth: usize) -> Result<Self> {
        if depth < 1 {
            return Err(invalid("depth", "must be at least 1"));
        }
        let covers = (1..=depth as u32)
            .map(|h| chain_cover(d, h))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { d, covers })
    }

    pub fn depth(&self) -> usize {
        self.covers.len()
    }

    /// `Delta_h` for `h` in `1..=H`.
    pub fn cover(&self, h: usize) -> &BracketingCover {
        &self.covers[h - 1]
    }

    pub fn chain(&self, y: &Corner) -> Result<ChainingDecomposition> {
        y.check_dim(self.d)?;
        let depth = self.depth();
        let mut betas = vec![Corner::zero(self.d); depth + 2];
        let top = self
            .cover(depth)
            .locate(y)?
            .expect("grid covers contain every point");
        betas[depth] = top.lower;
        betas[depth + 1] = top.upper;
        for h in (1..depth).rev() {
            let b = self
                .cover(h)
                .locate(&betas[h + 1])?
                .expect("grid covers contain every point");
            betas[h] = b.lower;
        }
        Ok(ChainingDecomposition {
            y: y.clone(),
            depth,
            betas,
        })
    }
}

/// One-shot chain for target `y` with depth `H(N, d)`.
pub fn build_chain(y: &Corner, d: usize, n: u64) -> Result<ChainingDecomposition> {
    ChainBuilder::new(d, n)?.chain(y)
}

/// Exact check of every chain invariant; returns a description of the first
/// violation.
pub fn check_chain(chain: &ChainingDecomposition) -> std::result::Result<(), String> {
    let d = chain.y.d();
    let c = ceil_log2(d as u64);
    let betas = &chain.betas;
    let depth = chain.depth;
    if betas[0] != Corner::zero(d) && betas[0].coords().iter().any(|&x| x != 0) {
        return Err("beta_0 is not the origin".into());
    }
    for (h, w) in betas.windows(2).enumerate() {
        if !w[0].le(&w[1]) {
            return Err(format!("beta_{h} is not below beta_{}", h + 1));
        }
    }
    if !betas[depth].le(&chain.y) || !chain.y.le(&betas[depth + 1]) {
        return Err("target is not sandwiched by beta_H and beta_{H+1}".into());
    }
    let mut total = BigRational::zero();
    for layer in chain.layers() {
        let v = layer.volume();
        if v.is_negative() {
            return Err(format!("layer {} has negative volume", layer.level));
        }
        if v > dyadic_delta(layer.level as u32) {
            return Err(format!("layer {} has volume {v} > 2^-{}", layer.level, layer.level));
        }
        total += v;
    }
    if total != betas[depth + 1].volume() {
        return Err("layer volumes do not telescope to lambda([0, beta_{H+1}))".into());
    }
    for (h, b) in betas.iter().enumerate() {
        if !b.on_dyadic_grid(h as u32 + 1 + c) {
            return Err(format!("beta_{h} is off the 2^-{} grid", h as u32 + 1 + c));
        }
    }
    Ok(())
}

/// `1/2 (2e)^d (1/delta + 1)^d`, the size of the best known `delta`-cover.
pub fn estimated_cover_size(d: usize, delta: f64) -> f64 {
    0.5 * (2.0 * std::f64::consts::E * (1.0 / delta + 1.0)).powi(d as i32)
}

/// `m^d` as an exact integer.
pub fn grid_cover_size(d: usize, cells: u64) -> BigUint {
    pow_big(cells, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn one_dimensional_base_cover() {
        let c = build_base_cover(1, &q(1, 4)).unwrap();
        assert_eq!(c.grid_cells(), Some(4));
        let bs = c.brackets(100).unwrap();
        assert_eq!(bs.len(), 4);
        for b in bs {
            assert_eq!(b.weight(), q(1, 4));
        }
    }

    #[test]
    fn two_dimensional_mesh_condition() {
        // 1 - (7/8)^2 = 15/64 <= 1/4 while 1 - (6/7)^2 = 13/49 > 1/4
        let c = build_base_cover(2, &q(1, 4)).unwrap();
        assert_eq!(c.grid_cells(), Some(8));
        assert_eq!(c.len(), 64);
        assert_eq!(grid_cells_for(2, &q(1, 256)).unwrap(), 512);
        assert_eq!(grid_cells_for(1, &BigRational::one()).unwrap(), 1);
        assert_eq!(grid_cells_for(3, &q(1, 8)).unwrap(), 23);
    }

    #[test]
    fn base_cover_rejects_bad_delta() {
        assert!(build_base_cover(2, &q(0, 1)).is_err());
        assert!(build_base_cover(2, &q(-1, 4)).is_err());
        assert!(build_base_cover(2, &q(3, 2)).is_err());
    }

    #[test]
    fn base_cover_probe() {
        let c = build_base_cover(3, &q(1, 8)).unwrap();
        let r = c.probe(100_000, 11).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.max_weight <= q(1, 8));
    }

    #[test]
    fn snapping_hand_examples() {
        let grid = SnapGrid::new(1, 2).unwrap();
        assert_eq!((grid.lower_bits, grid.upper_bits), (3, 4));
        // v = w = (0.3, 0.3) written over 10
        let (lo, hi) = grid.snap(&[3, 3], &[3, 3], 10);
        assert_eq!(Corner::new(lo, 16).unwrap().to_f64(), vec![0.25, 0.25]);
        assert_eq!(Corner::new(hi, 16).unwrap().to_f64(), vec![0.3125, 0.3125]);
        // already on the grids
        let (lo, hi) = grid.snap(&[2, 4], &[5, 16], 16);
        assert_eq!((lo, hi), (vec![2, 4], vec![5, 16]));
    }

    #[test]
    fn snap_requires_fine_enough_cover() {
        let c = build_base_cover(2, &q(1, 4)).unwrap();
        assert!(dyadic_snap(&c, 1).is_err());
        let fine = build_base_cover(2, &q(1, 8)).unwrap();
        let s = dyadic_snap(&fine, 1).unwrap();
        assert_eq!(s.delta(), &q(1, 2));
        assert!(dyadic_snap(&s, 1).is_err());
        let distinct = s.brackets(1 << 20).unwrap();
        assert!(distinct.len() as u128 <= fine.len());
        for b in &distinct {
            assert!(b.weight() <= q(1, 2));
            assert!(b.lower().on_dyadic_grid(3) && b.upper().on_dyadic_grid(4));
        }
    }

    #[test]
    fn snapped_explicit_cover_dedups() {
        let c = BracketingCover::from_brackets(
            1,
            q(1, 8),
            (0..10)
                .map(|k| {
                    Bracket::new(
                        Corner::new(vec![k], 10).unwrap(),
                        Corner::new(vec![k + 1], 10).unwrap(),
                    )
                    .unwrap()
                })
                .collect(),
        )
        .unwrap();
        let s = dyadic_snap(&c, 1).unwrap();
        assert!(s.len() <= 10);
        assert!(s.probe(10_000, 3).unwrap().passed());
    }

    #[test]
    fn explicit_cover_weight_is_checked() {
        let b = Bracket::new(Corner::zero(2), Corner::one(2)).unwrap();
        assert!(BracketingCover::from_brackets(2, q(1, 2), vec![b]).is_err());
        assert!(Bracket::new(Corner::one(1), Corner::zero(1)).is_err());
    }

    #[test]
    fn chain_of_origin_is_flat() {
        let chain = build_chain(&Corner::zero(2), 2, 1024).unwrap();
        assert_eq!(chain.depth(), 3);
        for b in &chain.betas()[..=3] {
            assert!(b.coords().iter().all(|&c| c == 0));
        }
        for layer in &chain.layers()[..3] {
            assert!(layer.volume().is_zero());
        }
        check_chain(&chain).unwrap();
    }

    #[test]
    fn chain_invariants_on_sample_targets() {
        let builder = ChainBuilder::new(2, 1024).unwrap();
        assert_eq!(builder.depth(), 3);
        let mut rng = crate::rng::SplitMix64::new(5);
        for _ in 0..500 {
            let y = Corner::dyadic(vec![rng.next_u64() >> 34, rng.next_u64() >> 34], 30).unwrap();
            check_chain(&builder.chain(&y).unwrap()).unwrap();
        }
    }

    #[test]
    fn chain_is_a_function_of_successor() {
        let builder = ChainBuilder::with_depth(2, 4).unwrap();
        let a = builder.chain(&Corner::dyadic(vec![100, 200], 10).unwrap()).unwrap();
        let b = builder.chain(&Corner::dyadic(vec![101, 201], 10).unwrap()).unwrap();
        if a.betas()[4] == b.betas()[4] {
            assert_eq!(a.betas()[..4], b.betas()[..4]);
        }
    }

    #[test]
    fn infeasible_chain_is_rejected() {
        assert!(matches!(
            build_chain(&Corner::zero(2), 2, 16),
            Err(Error::ChainInfeasible { depth: 0, .. })
        ));
    }

    #[test]
    fn layer_volume_arithmetic() {
        let low = Corner::new(vec![1, 2], 4).unwrap();
        let high = Corner::new(vec![2, 2], 4).unwrap();
        let layer = Layer {
            level: 1,
            low: &low,
            high: &high,
        };
        assert_eq!(layer.volume(), q(1, 8));
    }
}
