//! Lacunary and i.i.d. point sets over exact dyadic coordinates.
//!
//! A lacunary set is the orbit of a random seed `x_1` under the coordinatewise
//! doubling map `x -> frac(2x)`. With `x_1` stored as explicit binary digits,
//! point `n` is just the `H`-bit window of each seed row starting at bit `n`,
//! so `N` points at `H` bits cost `d(H + N - 1)` random bits instead of the
//! `dHN` an independent sample needs.

use std::fmt;
use std::io::{Read, Write};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{derive, SplitMix64};

/// Largest supported coordinate precision in bits.
pub const MAX_PRECISION: u32 = 63;

/// Default coordinate precision.
pub const DEFAULT_PRECISION: u32 = 32;

const DOMAIN_LACUNARY: u64 = 0x6c61_6375_6e61_7279;
const DOMAIN_IID: u64 = 0x0069_6964_0069_6964;

/// A packed, fixed-length row of bits; bit 0 is the most significant binary
/// digit after the point.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitRow {
    words: Vec<u64>,
    len: usize,
}

impl BitRow {
    fn from_stream(seed: u64, len: usize) -> Self {
        let mut rng = SplitMix64::new(seed);
        let mut words: Vec<u64> = (0..len.div_ceil(64)).map(|_| rng.next_u64()).collect();
        if len % 64 != 0 {
            if let Some(last) = words.last_mut() {
                *last &= !(u64::MAX >> (len % 64));
            }
        }
        Self { words, len }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (j, &b) in bits.iter().enumerate() {
            if b {
                words[j / 64] |= 1u64 << (63 - j % 64);
            }
        }
        Self {
            words,
            len: bits.len(),
        }
    }

    /// Parses a string of `0`/`1` characters.
    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_bits(&bits))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, j: usize) -> bool {
        assert!(j < self.len, "bit index {j} out of range {}", self.len);
        (self.words[j / 64] >> (63 - j % 64)) & 1 == 1
    }

    /// Reads bits `start .. start + width` as an unsigned integer, first bit
    /// most significant. `width` is at most 64.
    pub fn window(&self, start: usize, width: u32) -> u64 {
        assert!(width <= 64);
        assert!(start + width as usize <= self.len, "window past end of row");
        if width == 0 {
            return 0;
        }
        let word = start / 64;
        let offset = (start % 64) as u32;
        let hi = self.words[word] << offset;
        let joined = if offset == 0 || word + 1 >= self.words.len() {
            hi
        } else {
            hi | (self.words[word + 1] >> (64 - offset))
        };
        joined >> (64 - width)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

impl fmt::Display for BitRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.len {
            f.write_str(if self.bit(j) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// The random seed point `x_1`, one row of binary digits per coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedBits {
    rows: Vec<BitRow>,
    master_seed: u64,
}

impl SeedBits {
    /// Wraps explicit rows, e.g. for hand-built examples. All rows must have
    /// the same length.
    pub fn from_rows(rows: Vec<BitRow>, master_seed: u64) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("d", "at least one row is required"));
        }
        let len = rows[0].len();
        if rows.iter().any(|r| r.len() != len) {
            return Err(invalid("rows", "all rows must have the same length"));
        }
        Ok(Self { rows, master_seed })
    }

    pub fn d(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[BitRow] {
        &self.rows
    }

    pub fn row_len(&self) -> usize {
        self.rows[0].len()
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn total_bits(&self) -> usize {
        self.rows.iter().map(BitRow::len).sum()
    }
}

/// Checks the common `(d, N, H)` preconditions.
fn check_shape(d: usize, n: usize, precision: u32) -> Result<()> {
    if d == 0 {
        return Err(invalid("d", "must be at least 1"));
    }
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if precision == 0 || precision > MAX_PRECISION {
        return Err(invalid(
            "h_precision",
            format!("must lie in 1..={MAX_PRECISION}, got {precision}"),
        ));
    }
    Ok(())
}

/// Derives `d` seed rows of `H + N - 1` bits from `master_seed`.
///
/// Row `i` is the SplitMix64 stream seeded with `derive(derive(master, tag), i)`,
/// so a row depends only on the master seed and its own coordinate index:
/// growing `d` appends rows, and growing `N` or `H` extends each row without
/// changing its prefix.
pub fn derive_seed(master_seed: u64, d: usize, n: usize, precision: u32) -> Result<SeedBits> {
    check_shape(d, n, precision)?;
    let len = precision as usize + n - 1;
    let domain = derive(master_seed, DOMAIN_LACUNARY);
    let rows = (0..d)
        .map(|i| BitRow::from_stream(derive(domain, i as u64), len))
        .collect();
    Ok(SeedBits { rows, master_seed })
}

/// One coordinate `numerator / 2^precision` in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCoord {
    numerator: u64,
    precision: u32,
}

impl DyadicCoord {
    pub fn new(numerator: u64, precision: u32) -> Result<Self> {
        if precision > MAX_PRECISION {
            return Err(invalid("precision", format!("at most {MAX_PRECISION}")));
        }
        if numerator >= 1u64 << precision {
            return Err(invalid("numerator", "coordinate must lie in [0, 1)"));
        }
        Ok(Self {
            numerator,
            precision,
        })
    }

    pub fn numerator(self) -> u64 {
        self.numerator
    }

    pub fn precision(self) -> u32 {
        self.precision
    }

    pub fn to_f64(self) -> f64 {
        self.numerator as f64 / (1u64 << self.precision) as f64
    }

    /// Exact decimal expansion, e.g. `0.375`; trailing zeros are trimmed.
    pub fn to_decimal(self) -> String {
        if self.numerator == 0 {
            return "0.0".to_string();
        }
        // k / 2^H = k * 5^H / 10^H
        let scaled = BigUint::from(self.numerator) * BigUint::from(5u32).pow(self.precision);
        let digits = scaled.to_str_radix(10);
        let width = self.precision as usize;
        let padded = format!("{digits:0>width$}");
        format!("0.{}", padded.trim_end_matches('0'))
    }

    /// The `precision` binary digits after the point.
    pub fn to_bits(self) -> String {
        (0..self.precision)
            .map(|j| {
                if (self.numerator >> (self.precision - 1 - j)) & 1 == 1 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }

    /// Parses an exact decimal like `0.8125` into `(numerator, precision)` with
    /// the smallest precision that represents it. Non-dyadic input is rejected.
    pub fn parse_decimal(s: &str) -> Result<(u64, u32)> {
        let s = s.trim();
        let (int_part, frac_part) = s.split_once('.').unwrap_or((s, ""));
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
        {
            return Err(Error::Parse(format!("not a decimal number: {s:?}")));
        }
        if int_part.trim_start_matches('0') != "" {
            return Err(Error::Parse(format!("coordinate {s:?} is not in [0, 1)")));
        }
        let frac = frac_part.trim_end_matches('0');
        if frac.is_empty() {
            return Ok((0, 0));
        }
        let k = frac.len() as u32;
        let digits = BigUint::parse_bytes(frac.as_bytes(), 10)
            .ok_or_else(|| Error::Parse(format!("bad digits in {s:?}")))?;
        // digits / 10^k = (digits / 5^k) / 2^k, dyadic iff 5^k divides digits.
        let five_k = BigUint::from(5u32).pow(k);
        if !(&digits % &five_k).is_zero() {
            return Err(Error::Parse(format!("{s:?} is not a dyadic rational")));
        }
        if k > MAX_PRECISION {
            return Err(Error::Parse(format!(
                "{s:?} needs more than {MAX_PRECISION} bits"
            )));
        }
        let mut num = (digits / five_k)
            .to_u64()
            .ok_or_else(|| Error::Parse(format!("{s:?} out of range")))?;
        let mut prec = k;
        while prec > 0 && num % 2 == 0 {
            num /= 2;
            prec -= 1;
        }
        Ok((num, prec))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Lacunary,
    Iid,
    /// Supplied by the caller; no random bits accounted.
    Explicit,
}

/// `N` points in `[0,1)^d`, all coordinates sharing precision `H`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointSet {
    d: usize,
    n: usize,
    precision: u32,
    /// Row-major `N x d` numerators over `2^precision`.
    coords: Vec<u64>,
    bits_consumed: u64,
    kind: PointKind,
}

impl PointSet {
    /// Builds a set from row-major numerators over `2^precision`.
    pub fn from_numerators(d: usize, precision: u32, coords: Vec<u64>) -> Result<Self> {
        if d == 0 || coords.is_empty() || coords.len() % d != 0 {
            return Err(invalid(
                "coords",
                "need a non-empty row-major array whose length is a multiple of d",
            ));
        }
        check_shape(d, coords.len() / d, precision)?;
        if let Some(bad) = coords.iter().find(|&&c| c >= 1u64 << precision) {
            return Err(invalid(
                "coords",
                format!("numerator {bad} is not below 2^{precision}"),
            ));
        }
        Ok(Self {
            d,
            n: coords.len() / d,
            precision,
            coords,
            bits_consumed: 0,
            kind: PointKind::Explicit,
        })
    }

    /// Convenience constructor from `f64` coordinates that are exact
    /// multiples of `2^-precision`.
    pub fn from_f64_rows(precision: u32, rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let scale = (1u64 << precision) as f64;
        let mut coords = Vec::with_capacity(rows.len() * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: row.len(),
                });
            }
            for &x in row {
                let scaled = x * scale;
                if !(0.0..scale).contains(&scaled) || scaled.fract() != 0.0 {
                    return Err(invalid(
                        "coords",
                        format!("{x} is not a multiple of 2^-{precision} in [0, 1)"),
                    ));
                }
                coords.push(scaled as u64);
            }
        }
        Self::from_numerators(d, precision, coords)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn kind(&self) -> PointKind {
        self.kind
    }

    pub fn bits_consumed(&self) -> u64 {
        self.bits_consumed
    }

    /// Numerators of point `n` (0-based).
    pub fn point(&self, n: usize) -> &[u64] {
        &self.coords[n * self.d..(n + 1) * self.d]
    }

    pub fn numerators(&self) -> &[u64] {
        &self.coords
    }

    pub fn coord(&self, n: usize, i: usize) -> DyadicCoord {
        DyadicCoord {
            numerator: self.coords[n * self.d + i],
            precision: self.precision,
        }
    }

    pub fn points(&self) -> impl Iterator<Item = &[u64]> + '_ {
        self.coords.chunks_exact(self.d)
    }
}

/// Generates the first `N` points of the doubling-map orbit of `seed`.
///
/// `x_{n,i} = 0.b_n b_{n+1} ... b_{n+H-1}` in binary, where `b` is row `i`.
pub fn generate_lacunary(seed: &SeedBits, n: usize, precision: u32) -> Result<PointSet> {
    check_shape(seed.d(), n, precision)?;
    let required = precision as usize + n - 1;
    if seed.row_len() < required {
        return Err(Error::InsufficientSeedBits {
            required,
            available: seed.row_len(),
        });
    }
    let d = seed.d();
    let mut coords = Vec::with_capacity(n * d);
    for start in 0..n {
        for row in seed.rows() {
            coords.push(row.window(start, precision));
        }
    }
    Ok(PointSet {
        d,
        n,
        precision,
        coords,
        bits_consumed: (d * required) as u64,
        kind: PointKind::Lacunary,
    })
}

/// Generates `N` independent uniform points with `H`-bit coordinates.
pub fn generate_iid(master_seed: u64, d: usize, n: usize, precision: u32) -> Result<PointSet> {
    check_shape(d, n, precision)?;
    let domain = derive(master_seed, DOMAIN_IID);
    let h = precision as usize;
    let rows: Vec<BitRow> = (0..d)
        .map(|i| BitRow::from_stream(derive(domain, i as u64), h * n))
        .collect();
    let mut coords = Vec::with_capacity(n * d);
    for k in 0..n {
        for row in &rows {
            coords.push(row.window(k * h, precision));
        }
    }
    Ok(PointSet {
        d,
        n,
        precision,
        coords,
        bits_consumed: (d * h * n) as u64,
        kind: PointKind::Iid,
    })
}

/// Coordinate rendering for [`write_csv`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoordFormat {
    /// Exact decimal expansion of `numerator / 2^H`.
    #[default]
    Decimal,
    /// `H` binary digits.
    Bits,
}

/// Writes `n,x1,...,xd` rows with 1-based `n`.
pub fn write_csv<W: Write>(points: &PointSet, format: CoordFormat, out: W) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let header = std::iter::once("n".to_string()).chain((1..=points.d()).map(|i| format!("x{i}")));
    w.write_record(header).map_err(csv_err)?;
    for k in 0..points.n() {
        let coords = (0..points.d()).map(|i| {
            let c = points.coord(k, i);
            match format {
                CoordFormat::Decimal => c.to_decimal(),
                CoordFormat::Bits => c.to_bits(),
            }
        });
        let row = std::iter::once((k + 1).to_string()).chain(coords);
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

/// Reads the decimal form written by [`write_csv`]. The precision is the
/// smallest one that represents every coordinate exactly (at least 1).
pub fn read_csv<R: Read>(input: R) -> Result<PointSet> {
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let d = r.headers().map_err(csv_err)?.len().saturating_sub(1);
    if d == 0 {
        return Err(Error::Parse("expected header n,x1,...,xd".into()));
    }
    let mut parsed = Vec::new();
    let mut precision = 1;
    for record in r.records() {
        let record = record.map_err(csv_err)?;
        if record.len() != d + 1 {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: record.len().saturating_sub(1),
            });
        }
        for field in record.iter().skip(1) {
            let (num, prec) = DyadicCoord::parse_decimal(field)?;
            precision = precision.max(prec);
            parsed.push((num, prec));
        }
    }
    if parsed.is_empty() {
        return Err(Error::Parse("no points in input".into()));
    }
    let coords = parsed
        .into_iter()
        .map(|(num, prec)| num << (precision - prec))
        .collect();
    PointSet::from_numerators(d, precision, coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(s: &str) -> BitRow {
        BitRow::parse(s).unwrap()
    }

    #[test]
    fn derive_seed_is_deterministic_with_expected_lengths() {
        let a = derive_seed(7, 2, 4, 3).unwrap();
        let b = derive_seed(7, 2, 4, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.d(), 2);
        assert!(a.rows().iter().all(|r| r.len() == 6));

        let one = derive_seed(7, 1, 1, 1).unwrap();
        assert_eq!(one.rows()[0].len(), 1);

        let big = derive_seed(7, 3, 100, 32).unwrap();
        assert_eq!(big.total_bits(), 393);
    }

    #[test]
    fn derive_seed_rejects_zero_parameters() {
        assert!(derive_seed(1, 0, 4, 3).is_err());
        assert!(derive_seed(1, 2, 0, 3).is_err());
        assert!(derive_seed(1, 2, 4, 0).is_err());
    }

    #[test]
    fn rows_are_stable_under_growing_d_and_n() {
        let small = derive_seed(42, 2, 10, 8).unwrap();
        let large = derive_seed(42, 4, 50, 8).unwrap();
        for i in 0..2 {
            let s = &small.rows()[i];
            let l = &large.rows()[i];
            for j in 0..s.len() {
                assert_eq!(s.bit(j), l.bit(j));
            }
        }
    }

    #[test]
    fn lacunary_windows_match_hand_example() {
        let seed = SeedBits::from_rows(vec![row("0110110001")], 0).unwrap();
        let p = generate_lacunary(&seed, 3, 4).unwrap();
        let xs: Vec<f64> = (0..3).map(|n| p.coord(n, 0).to_f64()).collect();
        assert_eq!(xs, vec![0.375, 0.8125, 0.6875]);
        assert_eq!(p.bits_consumed(), 6);
    }

    #[test]
    fn doubling_one_half_goes_to_zero() {
        let seed = SeedBits::from_rows(vec![row("100")], 0).unwrap();
        let p = generate_lacunary(&seed, 3, 1).unwrap();
        let xs: Vec<f64> = (0..3).map(|n| p.coord(n, 0).to_f64()).collect();
        assert_eq!(xs, vec![0.5, 0.0, 0.0]);
    }

    #[test]
    fn lacunary_bit_accounting() {
        let seed = derive_seed(3, 2, 5, 8).unwrap();
        let p = generate_lacunary(&seed, 5, 8).unwrap();
        assert_eq!(p.bits_consumed(), 24);
        assert_eq!(p.kind(), PointKind::Lacunary);
    }

    #[test]
    fn lacunary_rejects_short_seed() {
        let seed = derive_seed(3, 2, 5, 8).unwrap();
        assert_eq!(
            generate_lacunary(&seed, 6, 8),
            Err(Error::InsufficientSeedBits {
                required: 13,
                available: 12
            })
        );
    }

    #[test]
    fn iid_accounting_and_determinism() {
        let p = generate_iid(5, 3, 100, 32).unwrap();
        assert_eq!(p.bits_consumed(), 9600);
        assert_eq!(p, generate_iid(5, 3, 100, 32).unwrap());
        assert_ne!(p, generate_iid(6, 3, 100, 32).unwrap());

        let single = generate_iid(5, 1, 1, 1).unwrap();
        assert_eq!(single.bits_consumed(), 1);
        assert!([0.0, 0.5].contains(&single.coord(0, 0).to_f64()));
        assert!(generate_iid(5, 0, 1, 1).is_err());
    }

    #[test]
    fn decimal_and_bit_rendering() {
        let c = DyadicCoord::new(13, 4).unwrap();
        assert_eq!(c.to_decimal(), "0.8125");
        assert_eq!(c.to_bits(), "1101");
        assert_eq!(DyadicCoord::new(0, 4).unwrap().to_decimal(), "0.0");
        let tiny = DyadicCoord::new(1, 32).unwrap();
        assert_eq!(tiny.to_decimal(), "0.00000000023283064365386962890625");
        assert_eq!(DyadicCoord::parse_decimal("0.8125").unwrap(), (13, 4));
        assert_eq!(DyadicCoord::parse_decimal("0.50").unwrap(), (1, 1));
        assert_eq!(DyadicCoord::parse_decimal("0").unwrap(), (0, 0));
        assert!(DyadicCoord::parse_decimal("0.1").is_err());
        assert!(DyadicCoord::parse_decimal("1.5").is_err());
        assert!(DyadicCoord::new(16, 4).is_err());
    }

    #[test]
    fn bit_frequencies_are_balanced_across_seeds() {
        let (d, n, h) = (2usize, 4usize, 8u32);
        let seeds = 10_000u64;
        let mut ones = vec![0u32; n * d * h as usize];
        for s in 0..seeds {
            let p = generate_lacunary(&derive_seed(s, d, n, h).unwrap(), n, h).unwrap();
            for (k, &num) in p.numerators().iter().enumerate() {
                for j in 0..h {
                    ones[k * h as usize + j as usize] += ((num >> j) & 1) as u32;
                }
            }
        }
        for c in ones {
            let f = c as f64 / seeds as f64;
            assert!((f - 0.5).abs() <= 0.02, "bit frequency {f}");
        }
    }

    proptest! {
        #[test]
        fn shift_property_holds(seed in any::<u64>(), d in 1usize..4, n in 2usize..40, h in 1u32..=63) {
            let p = generate_lacunary(&derive_seed(seed, d, n, h).unwrap(), n, h).unwrap();
            let mask = (1u64 << h) - 1;
            for k in 0..n - 1 {
                for i in 0..d {
                    // floor(x_{n+1} 2^{H-1}) == floor(frac(2 x_n) 2^{H-1})
                    let next = p.coord(k + 1, i).numerator() >> 1;
                    let doubled = ((p.coord(k, i).numerator() << 1) & mask) >> 1;
                    prop_assert_eq!(next, doubled);
                }
            }
        }

        #[test]
        fn decimal_round_trip(num in any::<u64>(), h in 1u32..=63) {
            let c = DyadicCoord::new(num & ((1u64 << h) - 1), h).unwrap();
            let (k, p) = DyadicCoord::parse_decimal(&c.to_decimal()).unwrap();
            prop_assert_eq!((k as u128) << (h - p), c.numerator() as u128);
        }
    }
    #[test]
    fn csv_round_trip_and_formats() {
        let p = PointSet::from_f64_rows(4, &[vec![0.375, 0.8125], vec![0.0, 0.5]]).unwrap();
        let mut buf = Vec::new();
        write_csv(&p, CoordFormat::Decimal, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "n,x1,x2\n1,0.375,0.8125\n2,0.0,0.5\n");
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.precision(), 4);
        assert_eq!(back.numerators(), p.numerators());
        let mut bits = Vec::new();
        write_csv(&p, CoordFormat::Bits, &mut bits).unwrap();
        assert!(String::from_utf8(bits).unwrap().contains("1,0110,1101"));
        assert!(read_csv("n,x1\n1,0.3\n".as_bytes()).is_err());
        assert!(read_csv("n,x1\n".as_bytes()).is_err());
    }
}
