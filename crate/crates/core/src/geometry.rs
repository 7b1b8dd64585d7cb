//! Anchored-box corners with exact rational coordinates.

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exact::pow_big;

/// A point of `[0,1]^d` whose coordinates are `coords[i] / scale`.
///
/// Covers built on a uniform `m`-grid use `scale = m`; dyadic corners use a
/// power of two. The upper end `1` is allowed so boxes can reach the far face.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Corner {
    coords: Vec<u64>,
    scale: u64,
}

impl Corner {
    pub fn new(coords: Vec<u64>, scale: u64) -> Result<Self> {
        if scale == 0 {
            return Err(invalid("scale", "must be positive"));
        }
        if coords.is_empty() {
            return Err(invalid("coords", "corner needs at least one coordinate"));
        }
        if let Some(c) = coords.iter().find(|&&c| c > scale) {
            return Err(invalid(
                "coords",
                format!("{c}/{scale} lies outside [0, 1]"),
            ));
        }
        Ok(Self { coords, scale })
    }

    /// Corner with coordinates `coords[i] / 2^bits`.
    pub fn dyadic(coords: Vec<u64>, bits: u32) -> Result<Self> {
        if bits > 63 {
            return Err(invalid("bits", "at most 63"));
        }
        Self::new(coords, 1u64 << bits)
    }

    pub fn zero(d: usize) -> Self {
        Self {
            coords: vec![0; d],
            scale: 1,
        }
    }

    pub fn one(d: usize) -> Self {
        Self {
            coords: vec![1; d],
            scale: 1,
        }
    }

    pub fn d(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn value(&self, i: usize) -> BigRational {
        BigRational::new(BigInt::from(self.coords[i]), BigInt::from(self.scale))
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coords
            .iter()
            .map(|&c| c as f64 / self.scale as f64)
            .collect()
    }

    /// Numerator of the box volume over `scale^d`.
    pub fn volume_numerator(&self) -> BigUint {
        self.coords
            .iter()
            .fold(BigUint::from(1u32), |acc, &c| acc * c)
    }

    /// `lambda([0, y))`.
    pub fn volume(&self) -> BigRational {
        BigRational::new(
            self.volume_numerator().into(),
            pow_big(self.scale, self.d()).into(),
        )
    }

    /// Compares coordinate `i` with `other`'s coordinate `j`.
    pub fn cmp_coord(&self, i: usize, other: &Corner, j: usize) -> Ordering {
        let a = self.coords[i] as u128 * other.scale as u128;
        let b = other.coords[j] as u128 * self.scale as u128;
        a.cmp(&b)
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &Corner) -> bool {
        self.d() == other.d() && (0..self.d()).all(|i| self.cmp_coord(i, other, i) != Ordering::Greater)
    }

    /// Componentwise `self < other` (every coordinate strictly).
    pub fn lt_all(&self, other: &Corner) -> bool {
        self.d() == other.d() && (0..self.d()).all(|i| self.cmp_coord(i, other, i) == Ordering::Less)
    }

    /// Whether every coordinate is a multiple of `2^-bits`.
    pub fn on_dyadic_grid(&self, bits: u32) -> bool {
        // c / s = k / 2^bits  <=>  c * 2^bits divisible by s
        self.coords
            .iter()
            .all(|&c| ((c as u128) << bits) % self.scale as u128 == 0)
    }

    /// Re-expresses the corner over a different denominator, if exact.
    pub fn rescale(&self, scale: u64) -> Option<Corner> {
        let coords = self
            .coords
            .iter()
            .map(|&c| {
                let num = c as u128 * scale as u128;
                (num % self.scale as u128 == 0).then(|| (num / self.scale as u128) as u64)
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Corner { coords, scale })
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if self.d() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: self.d(),
            });
        }
        Ok(())
    }
}
