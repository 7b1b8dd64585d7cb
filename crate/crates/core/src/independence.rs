//! Exact joint laws of centered layer indicators along a lacunary orbit.
//!
//! Under a uniform seed `x_1`, the value `f_K(x_n) = 1_K(x_n) - lambda(K)`
//! depends only on finitely many binary digits of `x_1` when `K` has dyadic
//! corners. Enumerating every cell of the dyadic partition of `[0,1)^d` that
//! fixes those digits gives the joint law of `(f_K(x_{n_1}), ..., f_K(x_{n_k}))`
//! exactly, so independence claims can be checked with zero tolerance.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::covers::dyadic_delta;
use crate::error::{invalid, Error, Result};
use crate::exact::ceil_log2;
use crate::geometry::Corner;

/// Upper limit on `cell_bits * d`.
pub const ENUMERATION_GUARD: u32 = 24;

/// `f_K` for `K = [0, high) \ [0, low)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerFunction {
    low: Corner,
    high: Corner,
    level: u32,
    /// Smallest `r` with all corners on the `2^-r` grid.
    bits: u32,
    mean: BigRational,
}

impl LayerFunction {
    /// Checks that both corners lie on the `2^-(h+2+ceil(log2 d))` grid and
    /// that `lambda(K) <= 2^-h`.
    pub fn new(low: Corner, high: Corner, level: u32) -> Result<Self> {
        low.check_dim(high.d())?;
        if !low.le(&high) {
            return Err(invalid("box", "lower corner must be below the upper corner"));
        }
        let d = low.d();
        let grid_bits = level + 2 + ceil_log2(d as u64);
        if !low.on_dyadic_grid(grid_bits) || !high.on_dyadic_grid(grid_bits) {
            return Err(invalid(
                "box",
                format!("corners must be multiples of 2^-{grid_bits} at level {level}"),
            ));
        }
        let mean = high.volume() - low.volume();
        if mean > dyadic_delta(level) {
            return Err(invalid(
                "box",
                format!("lambda(K) = {mean} exceeds 2^-{level}"),
            ));
        }
        let bits = (0..=grid_bits)
            .find(|&b| low.on_dyadic_grid(b) && high.on_dyadic_grid(b))
            .expect("grid_bits qualifies");
        Ok(Self {
            low,
            high,
            level,
            bits,
            mean,
        })
    }

    pub fn d(&self) -> usize {
        self.low.d()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn mean(&self) -> &BigRational {
        &self.mean
    }

    pub fn low(&self) -> &Corner {
        &self.low
    }

    pub fn high(&self) -> &Corner {
        &self.high
    }

    /// Digits of each coordinate that decide membership.
    pub fn resolution_bits(&self) -> u32 {
        self.bits
    }

    /// `(value outside K, value inside K)` = `(-lambda, 1 - lambda)`.
    pub fn values(&self) -> (BigRational, BigRational) {
        let one = BigRational::from_integer(1.into());
        (-self.mean.clone(), one - &self.mean)
    }
}

/// Exact joint law of membership outcomes at the chosen orbit indices.
///
/// Outcome bit `j` is set when `x_{indices[j]}` lies in `K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointDistribution {
    pub indices: Vec<u64>,
    /// Cells have side `2^-cell_bits`.
    pub cell_bits: u32,
    pub cells: u64,
    /// Cell counts per outcome mask.
    pub counts: Vec<u64>,
    pub mean: BigRational,
}

impl JointDistribution {
    fn ratio(&self, count: u64) -> BigRational {
        BigRational::new(BigInt::from(count), BigInt::from(self.cells))
    }

    pub fn probability(&self, outcome: usize) -> BigRational {
        self.ratio(self.counts[outcome])
    }

    /// `P(x_{indices[j]} in K)`.
    pub fn marginal_inside(&self, j: usize) -> BigRational {
        let c: u64 = self
            .counts
            .iter()
            .enumerate()
            .filter(|(o, _)| o >> j & 1 == 1)
            .map(|(_, c)| c)
            .sum();
        self.ratio(c)
    }

    pub fn total(&self) -> BigRational {
        self.ratio(self.counts.iter().sum())
    }
}

/// Joint law of `(f_K(x_n), f_K(x_{n'}))`.
pub fn exact_joint(k: &LayerFunction, n: u64, n_prime: u64) -> Result<JointDistribution> {
    if n >= n_prime {
        return Err(invalid("n_prime", "must exceed n"));
    }
    exact_joint_multi(k, &[n, n_prime])
}

/// Joint law at increasing 1-based orbit indices, by enumerating all cells of
/// side `2^-(n_last - 1 + r)` where `r` is the digit resolution of `K`. Both
/// the earliest and the latest point are then constant on every cell.
pub fn exact_joint_multi(k: &LayerFunction, indices: &[u64]) -> Result<JointDistribution> {
    if indices.is_empty() || indices.len() > 16 {
        return Err(invalid("indices", "need between 1 and 16 orbit indices"));
    }
    if indices[0] == 0 || indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("indices", "must be strictly increasing and 1-based"));
    }
    let d = k.d() as u32;
    let r = k.resolution_bits();
    let last = *indices.last().expect("non-empty");
    let cell_bits = (last - 1) as u32 + r;
    let total_bits = cell_bits.saturating_mul(d);
    if total_bits > ENUMERATION_GUARD {
        return Err(Error::GuardExceeded {
            cells_log2: total_bits,
            limit: ENUMERATION_GUARD,
        });
    }
    let to_grid = |c: &Corner| -> Vec<u64> {
        c.rescale(1u64 << r)
            .expect("corners lie on the resolution grid")
            .coords()
            .to_vec()
    };
    let low = to_grid(&k.low);
    let high = to_grid(&k.high);
    let mask = (1u64 << r) - 1;
    let shifts: Vec<u32> = indices.iter().map(|&j| cell_bits - (j - 1) as u32 - r).collect();
    let outcomes = 1usize << indices.len();
    let per_axis = 1u64 << cell_bits;
    let rest_cells = 1u64 << (cell_bits * (d - 1));

    let counts = (0..per_axis)
        .into_par_iter()
        .fold(
            || vec![0u64; outcomes],
            |mut acc, first| {
                let mut cell = vec![0u64; d as usize];
                cell[0] = first;
                for rest in 0..rest_cells {
                    let mut rem = rest;
                    for c in cell.iter_mut().skip(1) {
                        *c = rem & (per_axis - 1);
                        rem >>= cell_bits;
                    }
                    let mut outcome = 0usize;
                    for (j, &s) in shifts.iter().enumerate() {
                        // digits of x_{indices[j]} at resolution 2^-r
                        let mut below_high = true;
                        let mut below_low = true;
                        for (i, &a) in cell.iter().enumerate() {
                            let p = (a >> s) & mask;
                            below_high &= p < high[i];
                            below_low &= p < low[i];
                        }
                        if below_high && !below_low {
                            outcome |= 1 << j;
                        }
                    }
                    acc[outcome] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; outcomes],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    Ok(JointDistribution {
        indices: indices.to_vec(),
        cell_bits,
        cells: per_axis.pow(d),
        counts,
        mean: k.mean.clone(),
    })
}

/// `max |P(c_1, ..., c_k) - prod_j P(c_j)|` over all outcome vectors; zero iff
/// the variables are independent.
pub fn factorization_gap(joint: &JointDistribution) -> BigRational {
    let k = joint.indices.len();
    let inside: Vec<BigRational> = (0..k).map(|j| joint.marginal_inside(j)).collect();
    let one = BigRational::from_integer(1.into());
    (0..1usize << k)
        .map(|o| {
            let product = (0..k).fold(one.clone(), |acc, j| {
                if o >> j & 1 == 1 {
                    acc * &inside[j]
                } else {
                    acc * (&one - &inside[j])
                }
            });
            (joint.probability(o) - product).abs()
        })
        .fold(BigRational::zero(), |a, b| a.max(b))
}

/// Serializable summary of a joint law.
#[derive(Debug, Clone, Serialize)]
pub struct JointTable {
    pub indices: Vec<u64>,
    pub cell_bits: u32,
    pub cells: u64,
    pub mean: String,
    /// `(values of f_K per index, probability)`.
    pub rows: Vec<(Vec<String>, String)>,
    pub factorization_gap: String,
}

impl JointTable {
    pub fn new(k: &LayerFunction, joint: &JointDistribution) -> Self {
        let (outside, inside) = k.values();
        let rows = (0..joint.counts.len())
            .map(|o| {
                let vals = (0..joint.indices.len())
                    .map(|j| {
                        if o >> j & 1 == 1 {
                            inside.to_string()
                        } else {
                            outside.to_string()
                        }
                    })
                    .collect();
                (vals, joint.probability(o).to_string())
            })
            .collect();
        Self {
            indices: joint.indices.clone(),
            cell_bits: joint.cell_bits,
            cells: joint.cells,
            mean: joint.mean.to_string(),
            rows,
            factorization_gap: factorization_gap(joint).to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn interval(lo: u64, hi: u64, bits: u32, level: u32) -> LayerFunction {
        LayerFunction::new(
            Corner::dyadic(vec![lo], bits).unwrap(),
            Corner::dyadic(vec![hi], bits).unwrap(),
            level,
        )
        .unwrap()
    }

    #[test]
    fn half_interval_gap_two_is_independent() {
        let k = interval(0, 1, 1, 0);
        let j = exact_joint(&k, 1, 3).unwrap();
        assert_eq!(j.cells, 8);
        assert_eq!(j.probability(0b11), q(1, 4));
        assert_eq!(j.marginal_inside(0), q(1, 2));
        assert_eq!(j.marginal_inside(1), q(1, 2));
        assert!(factorization_gap(&j).is_zero());
    }

    #[test]
    fn quarter_interval_gap_two_is_independent() {
        let k = interval(0, 1, 2, 0);
        let j = exact_joint(&k, 1, 3).unwrap();
        assert_eq!(j.cells, 16);
        assert_eq!(j.probability(0b11), q(1, 16));
        assert!(factorization_gap(&j).is_zero());
    }

    #[test]
    fn quarter_interval_gap_one_is_dependent() {
        let k = interval(0, 1, 2, 0);
        let j = exact_joint(&k, 1, 2).unwrap();
        assert_eq!(j.probability(0b11), q(1, 8));
        assert_eq!(factorization_gap(&j), q(1, 16));
    }

    #[test]
    fn full_cube_is_degenerate() {
        let k = LayerFunction::new(Corner::zero(2), Corner::one(2), 0).unwrap();
        let j = exact_joint(&k, 1, 2).unwrap();
        assert_eq!(j.probability(0b11), q(1, 1));
        assert!(factorization_gap(&j).is_zero());
        assert_eq!(k.values(), (q(-1, 1), q(0, 1)));
    }

    #[test]
    fn triple_factorizes() {
        let k = interval(0, 1, 1, 0);
        let j = exact_joint_multi(&k, &[1, 3, 5]).unwrap();
        assert_eq!(j.total(), q(1, 1));
        assert!(factorization_gap(&j).is_zero());
    }

    #[test]
    fn guard_and_argument_errors() {
        let k = interval(0, 1, 2, 0);
        assert!(matches!(exact_joint(&k, 1, 30), Err(Error::GuardExceeded { .. })));
        assert!(exact_joint(&k, 3, 3).is_err());
        assert!(exact_joint_multi(&k, &[0, 2]).is_err());
    }

    #[test]
    fn layer_function_validation() {
        // 3/8 is off the 2^-2 grid at level 0 in d = 1.
        assert!(LayerFunction::new(Corner::zero(1), Corner::dyadic(vec![3], 3).unwrap(), 0).is_err());
        // weight 3/4 exceeds 2^-1 at level 1.
        assert!(LayerFunction::new(Corner::zero(1), Corner::dyadic(vec![6], 3).unwrap(), 1).is_err());
        let ok = LayerFunction::new(Corner::dyadic(vec![1], 3).unwrap(), Corner::dyadic(vec![4], 3).unwrap(), 1).unwrap();
        assert_eq!(ok.resolution_bits(), 3);
        assert_eq!(ok.mean(), &q(3, 8));
    }

    #[test]
    fn marginals_equal_volume_in_two_dimensions() {
        let k = LayerFunction::new(
            Corner::dyadic(vec![2, 1], 4).unwrap(),
            Corner::dyadic(vec![5, 4], 4).unwrap(),
            1,
        )
        .unwrap();
        let j = exact_joint(&k, 2, 6).unwrap();
        assert_eq!(j.marginal_inside(0), k.mean().clone());
        assert_eq!(j.marginal_inside(1), k.mean().clone());
        assert!(factorization_gap(&j).is_zero());
    }
}
