//! Integer backends for exact comparisons over a fixed common denominator.
//!
//! Discrepancy maxima are taken over numerators that all share the
//! denominator `N * scale^d`; when that fits comfortably in 128 bits the hot
//! loops run on `i128`, otherwise they fall back to `BigInt`.

use std::ops::{Add, Mul, Sub};

use num_bigint::{BigInt, BigUint};

pub(crate) trait ExactInt:
    Clone
    + Ord
    + Send
    + Sync
    + From<u64>
    + Into<BigInt>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
{
    fn zero() -> Self {
        Self::from(0)
    }
}

impl ExactInt for i128 {}
impl ExactInt for BigInt {}

/// Whether values below `2^bits` (plus sign and one carry) fit in `i128`.
pub(crate) fn fits_i128(bits: u64) -> bool {
    bits <= 124
}

/// `ceil(log2(x))` for `x >= 1`.
pub(crate) fn bit_len(x: u64) -> u64 {
    (64 - x.leading_zeros()) as u64
}

pub(crate) fn pow_big(base: u64, exp: usize) -> BigUint {
    num_traits::pow(BigUint::from(base), exp)
}

/// `ceil(log2 d)` for `d >= 1`.
pub fn ceil_log2(d: u64) -> u32 {
    assert!(d >= 1);
    if d == 1 {
        0
    } else {
        64 - (d - 1).leading_zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_log2_values() {
        let cases = [(1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (8, 3), (9, 4), (64, 6), (65, 7)];
        for (d, e) in cases {
            assert_eq!(ceil_log2(d), e, "d = {d}");
        }
    }
}
