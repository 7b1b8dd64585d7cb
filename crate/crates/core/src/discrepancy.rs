//! Star discrepancy: exact critical-grid evaluation and bracket enclosures.
//!
//! Everything is exact. Coordinates are dyadic numerators over `2^H`, box
//! volumes are integer products over `2^{dH}`, and maxima are taken over
//! numerators sharing the denominator `N * 2^{dH}` (or `N * M^d` for cover
//! corners over `M`).
//!
//! For a corner `y`, `under(y) = lambda([0,y)) - #{x < y}/N` and
//! `over(y) = #{x <= y}/N - lambda([0,y))`. The supremum over anchored boxes
//! is the larger of `under` over the grid `prod (Gamma_i + {1})` and `over`
//! over `prod Gamma_i`, where `Gamma_i` holds the distinct `i`-th coordinates.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;

use crate::covers::BracketingCover;
use crate::error::{Error, Result};
use crate::exact::{bit_len, fits_i128, pow_big, ExactInt};
use crate::geometry::Corner;
use crate::points::PointSet;

/// Default cap on candidate-grid evaluations for the exact algorithm.
pub const DEFAULT_GRID_BUDGET: u128 = 100_000_000;

/// Prefix-count grids are used for bracket bounds when `M^d` is at most this.
pub const PREFIX_GRID_LIMIT: u128 = 1 << 26;

/// Cap on `brackets * N` for per-corner counting.
pub const PER_CORNER_BUDGET: u128 = 4_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMode {
    /// `x_i < y_i` for all `i`.
    Strict,
    /// `x_i <= y_i` for all `i`.
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalDiscrepancy {
    pub under: BigRational,
    pub over: BigRational,
    pub y: Corner,
}

impl LocalDiscrepancy {
    pub fn magnitude(&self) -> BigRational {
        self.under.clone().max(self.over.clone())
    }
}

/// A two-sided enclosure `lower <= D*_N <= upper` from a `delta`-cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscrepancyBounds {
    pub lower: BigRational,
    pub upper: BigRational,
    pub delta: BigRational,
}

#[inline]
fn point_cmp(x: u64, precision: u32, y: u64, scale: u64) -> Ordering {
    // x / 2^H  vs  y / scale
    ((x as u128) * scale as u128).cmp(&((y as u128) << precision))
}

/// `sum_n 1_{[0,y)}(x_n)` (strict) or the closed-box count.
pub fn box_count(points: &PointSet, y: &Corner, mode: CountMode) -> Result<usize> {
    y.check_dim(points.d())?;
    let h = points.precision();
    let s = y.scale();
    let yc = y.coords();
    Ok(points
        .points()
        .filter(|x| {
            x.iter().zip(yc).all(|(&xi, &yi)| match mode {
                CountMode::Strict => point_cmp(xi, h, yi, s) == Ordering::Less,
                CountMode::Closed => point_cmp(xi, h, yi, s) != Ordering::Greater,
            })
        })
        .count())
}

pub fn local_discrepancy(points: &PointSet, y: &Corner) -> Result<LocalDiscrepancy> {
    let strict = box_count(points, y, CountMode::Strict)?;
    let closed = box_count(points, y, CountMode::Closed)?;
    let n = BigInt::from(points.n());
    let vol = y.volume();
    Ok(LocalDiscrepancy {
        under: &vol - BigRational::new(BigInt::from(strict), n.clone()),
        over: BigRational::new(BigInt::from(closed), n) - vol,
        y: y.clone(),
    })
}

/// Sorted distinct coordinate numerators per axis.
fn axis_grids(points: &PointSet) -> Vec<Vec<u64>> {
    (0..points.d())
        .map(|i| {
            let mut g: Vec<u64> = points.points().map(|x| x[i]).collect();
            g.sort_unstable();
            g.dedup();
            g
        })
        .collect()
}

/// Number of evaluations the exact algorithm needs: `prod |Gamma_i + {1}|`.
pub fn exact_grid_size(points: &PointSet) -> u128 {
    axis_grids(points)
        .iter()
        .map(|g| g.len() as u128 + 1)
        .fold(1u128, |a, b| a.saturating_mul(b))
}

pub fn exact_star_discrepancy(points: &PointSet) -> Result<BigRational> {
    exact_star_discrepancy_with_budget(points, DEFAULT_GRID_BUDGET)
}

pub fn exact_star_discrepancy_with_budget(points: &PointSet, budget: u128) -> Result<BigRational> {
    let required = exact_grid_size(points);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let d = points.d() as u64;
    let bits = d * points.precision() as u64 + bit_len(points.n() as u64) + 1;
    let numer: BigInt = if fits_i128(bits) {
        critical_grid_max::<i128>(points).into()
    } else {
        critical_grid_max::<BigInt>(points).into()
    };
    let denom = BigInt::from(points.n()) * BigInt::from(pow_big(1u64 << points.precision(), points.d()));
    Ok(BigRational::new(numer, denom))
}

struct GridCtx<'a, T> {
    points: &'a PointSet,
    grids: Vec<Vec<u64>>,
    /// Per point and axis, the index of its coordinate in `grids[axis]`.
    ranks: Vec<Vec<usize>>,
    /// Grid values as `T`, with the extra value `2^H` appended.
    values: Vec<Vec<T>>,
    n: T,
    full: T,
}

/// Maximum numerator over `N * 2^{dH}` of under/over across the critical grid.
fn critical_grid_max<T: ExactInt>(points: &PointSet) -> T {
    let d = points.d();
    let grids = axis_grids(points);
    let ranks: Vec<Vec<usize>> = (0..d)
        .map(|i| {
            points
                .points()
                .map(|x| grids[i].binary_search(&x[i]).expect("coordinate is in its grid"))
                .collect()
        })
        .collect();
    let one = 1u64 << points.precision();
    let values = grids
        .iter()
        .map(|g| g.iter().chain(std::iter::once(&one)).map(|&v| T::from(v)).collect())
        .collect();
    let full = (0..d).fold(T::from(1), |acc, _| acc * T::from(one));
    let ctx = GridCtx {
        points,
        grids,
        ranks,
        values,
        n: T::from(points.n() as u64),
        full,
    };
    let all: Vec<usize> = (0..points.n()).collect();
    if d == 1 {
        return last_axis(&ctx, T::from(1), &all, Some(&all));
    }
    // Parallel over the first axis.
    let top = ctx.grids[0].len() + 1;
    (0..top)
        .into_par_iter()
        .map(|k| {
            let (strict, closed) = filter_axis(&ctx, 0, k, &all, Some(&all));
            recurse(&ctx, 1, ctx.values[0][k].clone(), &strict, closed.as_deref())
        })
        .reduce(T::zero, |a, b| a.max(b))
}

/// Points of `strict` with rank on `axis` below `k`, and points of `closed`
/// with rank at most `k` (the latter only while `k` indexes a real coordinate).
fn filter_axis<T>(
    ctx: &GridCtx<'_, T>,
    axis: usize,
    k: usize,
    strict: &[usize],
    closed: Option<&[usize]>,
) -> (Vec<usize>, Option<Vec<usize>>) {
    let r = &ctx.ranks[axis];
    let s = strict.iter().copied().filter(|&p| r[p] < k).collect();
    let c = closed
        .filter(|_| k < ctx.grids[axis].len())
        .map(|c| c.iter().copied().filter(|&p| r[p] <= k).collect());
    (s, c)
}

fn recurse<T: ExactInt>(
    ctx: &GridCtx<'_, T>,
    axis: usize,
    vol: T,
    strict: &[usize],
    closed: Option<&[usize]>,
) -> T {
    if axis + 1 == ctx.points.d() {
        return last_axis(ctx, vol, strict, closed);
    }
    let mut best = T::zero();
    for k in 0..=ctx.grids[axis].len() {
        let (s, c) = filter_axis(ctx, axis, k, strict, closed);
        let v = vol.clone() * ctx.values[axis][k].clone();
        best = best.max(recurse(ctx, axis + 1, v, &s, c.as_deref()));
    }
    best
}

fn last_axis<T: ExactInt>(ctx: &GridCtx<'_, T>, vol: T, strict: &[usize], closed: Option<&[usize]>) -> T {
    let axis = ctx.points.d() - 1;
    let g = ctx.grids[axis].len();
    let r = &ctx.ranks[axis];
    let mut hist_s = vec![0u64; g];
    for &p in strict {
        hist_s[r[p]] += 1;
    }
    let mut hist_c = vec![0u64; g];
    if let Some(c) = closed {
        for &p in c {
            hist_c[r[p]] += 1;
        }
    }
    let mut best = T::zero();
    let mut below = 0u64; // strict count at grid index k
    let mut at_or_below = 0u64;
    for k in 0..=g {
        let v = vol.clone() * ctx.values[axis][k].clone();
        let vn = v * ctx.n.clone();
        let under = vn.clone() - T::from(below) * ctx.full.clone();
        best = best.max(under);
        if k < g {
            at_or_below += hist_c[k];
            if closed.is_some() {
                let over = T::from(at_or_below) * ctx.full.clone() - vn;
                best = best.max(over);
            }
            below += hist_s[k];
        }
    }
    best
}

/// `max_i max((i+1)/N - x_(i), x_(i) - i/N)` over the sorted coordinates.
pub fn star_discrepancy_1d(points: &PointSet) -> Result<BigRational> {
    if points.d() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: points.d(),
        });
    }
    let mut xs: Vec<u64> = points.numerators().to_vec();
    xs.sort_unstable();
    let n = xs.len() as i128;
    let h = points.precision();
    let one = 1i128 << h;
    // numerators over N * 2^H
    let best = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x as i128;
            let i = i as i128;
            ((i + 1) * one - x * n).max(x * n - i * one)
        })
        .max()
        .expect("non-empty point set");
    Ok(BigRational::new(BigInt::from(best), BigInt::from(n) * BigInt::from(one)))
}

/// Counts of points strictly below / weakly below each corner numerator over `scale`.
trait CornerCounter: Sync {
    fn strict(&self, corner: &[u64]) -> u64;
    fn closed(&self, corner: &[u64]) -> u64;
}

/// Prefix sums over the `(M+1)^d` corner lattice.
struct PrefixGrid {
    side: usize,
    strict: Vec<u32>,
    closed: Vec<u32>,
}

impl PrefixGrid {
    fn new(points: &PointSet, scale: u64) -> Self {
        let d = points.d();
        let side = scale as usize + 1;
        let size = side.pow(d as u32);
        let mut strict = vec![0u32; size];
        let mut closed = vec![0u32; size];
        let h = points.precision();
        for x in points.points() {
            let mut si = 0usize;
            let mut ci = 0usize;
            for &xi in x.iter().rev() {
                // x < k/M  <=>  k >= floor(xM / 2^H) + 1, and x <= k/M  <=>  k >= ceil(xM / 2^H).
                // Both indices are at most M because x < 1.
                let prod = xi as u128 * scale as u128;
                let fl = (prod >> h) as usize;
                let ce = prod.div_ceil(1u128 << h) as usize;
                si = si * side + fl + 1;
                ci = ci * side + ce;
            }
            strict[si] += 1;
            closed[ci] += 1;
        }
        for grid in [&mut strict, &mut closed] {
            let mut stride = 1usize;
            for _ in 0..d {
                for idx in 0..size {
                    if (idx / stride) % side != 0 {
                        grid[idx] += grid[idx - stride];
                    }
                }
                stride *= side;
            }
        }
        Self {
            side,
            strict,
            closed,
        }
    }

    fn index(&self, corner: &[u64]) -> usize {
        corner
            .iter()
            .rev()
            .fold(0usize, |acc, &c| acc * self.side + c as usize)
    }
}

impl CornerCounter for PrefixGrid {
    fn strict(&self, corner: &[u64]) -> u64 {
        self.strict[self.index(corner)] as u64
    }
    fn closed(&self, corner: &[u64]) -> u64 {
        self.closed[self.index(corner)] as u64
    }
}

struct DirectCounter<'a> {
    points: &'a PointSet,
    scale: u64,
}

impl CornerCounter for DirectCounter<'_> {
    fn strict(&self, corner: &[u64]) -> u64 {
        let h = self.points.precision();
        self.points
            .points()
            .filter(|x| x.iter().zip(corner).all(|(&a, &c)| point_cmp(a, h, c, self.scale) == Ordering::Less))
            .count() as u64
    }
    fn closed(&self, corner: &[u64]) -> u64 {
        let h = self.points.precision();
        self.points
            .points()
            .filter(|x| x.iter().zip(corner).all(|(&a, &c)| point_cmp(a, h, c, self.scale) != Ordering::Greater))
            .count() as u64
    }
}

/// Encloses `D*_N` using a bracketing cover.
///
/// For `v <= y <= w` the local discrepancy at `y` is at most
/// `max(strict(w)/N - lambda(v), lambda(w) - strict(v)/N)`, which gives
/// `upper`; `lower` is the largest exact local discrepancy at a corner.
pub fn bracket_bounds(points: &PointSet, cover: &BracketingCover) -> Result<DiscrepancyBounds> {
    if cover.d() != points.d() {
        return Err(Error::DimensionMismatch {
            expected: points.d(),
            actual: cover.d(),
        });
    }
    let scale = cover.scale();
    let d = points.d();
    let lattice = (scale as u128 + 1).checked_pow(d as u32).unwrap_or(u128::MAX);
    let bits = d as u64 * bit_len(scale) + bit_len(points.n() as u64) + 1;
    let (lo, hi): (BigInt, BigInt) = if lattice <= PREFIX_GRID_LIMIT {
        let counter = PrefixGrid::new(points, scale);
        if fits_i128(bits) {
            let (a, b) = enclosure::<i128, _>(points, cover, &counter);
            (a.into(), b.into())
        } else {
            let (a, b) = enclosure::<BigInt, _>(points, cover, &counter);
            (a.into(), b.into())
        }
    } else {
        let work = cover.len().saturating_mul(points.n() as u128);
        if work > PER_CORNER_BUDGET {
            return Err(Error::BudgetExceeded {
                required: work,
                budget: PER_CORNER_BUDGET,
            });
        }
        let counter = DirectCounter { points, scale };
        if fits_i128(bits) {
            let (a, b) = enclosure::<i128, _>(points, cover, &counter);
            (a.into(), b.into())
        } else {
            let (a, b) = enclosure::<BigInt, _>(points, cover, &counter);
            (a.into(), b.into())
        }
    };
    let denom = BigInt::from(points.n()) * BigInt::from(pow_big(scale, d));
    let lower = BigRational::new(lo, denom.clone());
    let upper = BigRational::new(hi, denom).min(BigRational::one());
    Ok(DiscrepancyBounds {
        lower,
        upper,
        delta: cover.delta().clone(),
    })
}

fn enclosure<T: ExactInt, C: CornerCounter>(
    points: &PointSet,
    cover: &BracketingCover,
    counter: &C,
) -> (T, T) {
    let n = T::from(points.n() as u64);
    let full = (0..points.d()).fold(T::from(1), |acc, _| acc * T::from(cover.scale()));
    let volume = |c: &[u64]| c.iter().fold(T::from(1), |acc, &x| acc * T::from(x));
    let mut lower = T::zero();
    let mut upper = T::zero();
    cover.for_each_bracket(|v, w| {
        let vol_v = volume(v) * n.clone();
        let vol_w = volume(w) * n.clone();
        let sv = T::from(counter.strict(v)) * full.clone();
        let sw = T::from(counter.strict(w)) * full.clone();
        let cv = T::from(counter.closed(v)) * full.clone();
        let cw = T::from(counter.closed(w)) * full.clone();
        let local = (vol_v.clone() - sv.clone())
            .max(cv - vol_v.clone())
            .max(vol_w.clone() - sw.clone())
            .max(cw - vol_w.clone());
        lower = lower.clone().max(local);
        let bound = (sw - vol_v).max(vol_w - sv);
        upper = upper.clone().max(bound);
    });
    (lower, upper)
}
