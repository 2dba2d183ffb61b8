//! b-bit per-group activation quantization.
//!
//! Each group of `group_size` consecutive values (row-major) keeps its
//! minimum `z` and range `r`; values become integer codes in `0..=B` with
//! `B = 2^b - 1`:
//!
//! ```text
//! code = round((h - z) / r * B)        h' = z + r * code / B
//! ```
//!
//! Codes are bit-packed, so a block costs `ceil(count * b / 8)` bytes plus
//! two floats per group.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rounding {
    /// Round half away from zero. Deterministic.
    #[default]
    Nearest,
    /// Unbiased stochastic rounding from a seeded stream.
    Stochastic { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedBlock {
    codes: Vec<u8>,
    mins: Vec<f64>,
    ranges: Vec<f64>,
    group_size: usize,
    bits: u8,
    rows: usize,
    cols: usize,
}

fn packed_len(count: usize, bits: u8) -> usize {
    (count * bits as usize).div_ceil(8)
}

fn check_bits(bits: u8) -> Result<()> {
    if (1..=8).contains(&bits) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("bit width must lie in 1..=8, got {bits}")))
    }
}

fn write_code(packed: &mut [u8], index: usize, bits: u8, code: u8) {
    let bit = index * bits as usize;
    let (byte, shift) = (bit / 8, bit % 8);
    let wide = (code as u16) << shift;
    packed[byte] |= wide as u8;
    if shift + bits as usize > 8 {
        packed[byte + 1] |= (wide >> 8) as u8;
    }
}

fn read_code(packed: &[u8], index: usize, bits: u8) -> u8 {
    let bit = index * bits as usize;
    let (byte, shift) = (bit / 8, bit % 8);
    let mut wide = packed[byte] as u16;
    if shift + bits as usize > 8 {
        wide |= (packed[byte + 1] as u16) << 8;
    }
    ((wide >> shift) & ((1u16 << bits) - 1)) as u8
}

impl QuantizedBlock {
    /// Reassembles a block from stored parts, checking that they agree.
    pub fn from_parts(
        codes: Vec<u8>,
        mins: Vec<f64>,
        ranges: Vec<f64>,
        group_size: usize,
        bits: u8,
        shape: (usize, usize),
    ) -> Result<Self> {
        let block = Self {
            codes,
            mins,
            ranges,
            group_size,
            bits,
            rows: shape.0,
            cols: shape.1,
        };
        block.validate()?;
        Ok(block)
    }

    fn validate(&self) -> Result<()> {
        check_bits(self.bits).map_err(|_| Error::Corrupt(format!("bit width {}", self.bits)))?;
        if self.group_size == 0 {
            return Err(Error::Corrupt("group size is zero".into()));
        }
        let count = self.rows * self.cols;
        if self.codes.len() != packed_len(count, self.bits) {
            return Err(Error::Corrupt(format!(
                "{} code bytes for {count} values at {} bits",
                self.codes.len(),
                self.bits
            )));
        }
        let groups = count.div_ceil(self.group_size);
        if self.mins.len() != groups || self.ranges.len() != groups {
            return Err(Error::Corrupt(format!(
                "{groups} groups but {} minima and {} ranges",
                self.mins.len(),
                self.ranges.len()
            )));
        }
        if self.ranges.iter().any(|&r| r < 0.0 || !r.is_finite()) || self.mins.iter().any(|z| !z.is_finite()) {
            return Err(Error::Corrupt("group statistics must be finite with non-negative range".into()));
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_groups(&self) -> usize {
        self.mins.len()
    }

    pub fn mins(&self) -> &[f64] {
        &self.mins
    }

    pub fn ranges(&self) -> &[f64] {
        &self.ranges
    }

    pub fn packed_codes(&self) -> &[u8] {
        &self.codes
    }

    pub fn code(&self, index: usize) -> u8 {
        read_code(&self.codes, index, self.bits)
    }

    pub fn codes(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.code(i)).collect()
    }

    /// Bytes held by the packed codes and the per-group statistics.
    pub fn storage_bytes(&self) -> usize {
        self.codes.len() + 2 * self.num_groups() * core::mem::size_of::<f64>()
    }

    fn levels(&self) -> f64 {
        ((1u16 << self.bits) - 1) as f64
    }
}

/// Quantizes with round-to-nearest.
pub fn quantize(h: &Matrix, bits: u8, group_size: usize) -> Result<QuantizedBlock> {
    quantize_with(h, bits, group_size, Rounding::Nearest)
}

pub fn quantize_with(h: &Matrix, bits: u8, group_size: usize, rounding: Rounding) -> Result<QuantizedBlock> {
    check_bits(bits)?;
    if group_size == 0 {
        return Err(Error::InvalidParameter("group size must be positive".into()));
    }
    if !h.all_finite() {
        return Err(Error::Data("cannot quantize NaN or infinite activations".into()));
    }
    let values = h.as_slice();
    let top = ((1u16 << bits) - 1) as f64;
    let mut rng = match rounding {
        Rounding::Stochastic { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Rounding::Nearest => None,
    };
    let groups = values.len().div_ceil(group_size);
    let mut mins = Vec::with_capacity(groups);
    let mut ranges = Vec::with_capacity(groups);
    let mut codes = vec![0u8; packed_len(values.len(), bits)];
    for (g, chunk) in values.chunks(group_size).enumerate() {
        let lo = chunk.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = chunk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        mins.push(lo);
        ranges.push(range);
        if range == 0.0 {
            continue;
        }
        for (i, &v) in chunk.iter().enumerate() {
            let scaled = (v - lo) / range * top;
            let rounded = match rng.as_mut() {
                None => libm::round(scaled),
                Some(rng) => libm::floor(scaled + rng.random::<f64>()),
            };
            let code = rounded.clamp(0.0, top) as u8;
            write_code(&mut codes, g * group_size + i, bits, code);
        }
    }
    Ok(QuantizedBlock {
        codes,
        mins,
        ranges,
        group_size,
        bits,
        rows: h.rows(),
        cols: h.cols(),
    })
}

pub fn dequantize(q: &QuantizedBlock) -> Result<Matrix> {
    q.validate()?;
    let top = q.levels();
    let data = (0..q.len())
        .map(|i| {
            let g = i / q.group_size;
            q.mins[g] + q.ranges[g] * q.code(i) as f64 / top
        })
        .collect();
    Matrix::from_vec(q.rows, q.cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(values: &[f64]) -> Matrix {
        Matrix::from_vec(1, values.len(), values.to_vec()).unwrap()
    }

    #[test]
    fn lattice_values_round_trip() {
        let h = row(&[0.0, 1.0, 2.0, 3.0]);
        let q = quantize(&h, 2, 4).unwrap();
        assert_eq!(q.codes(), [0, 1, 2, 3]);
        assert_eq!((q.mins(), q.ranges()), (&[0.0][..], &[3.0][..]));
        assert_eq!(dequantize(&q).unwrap(), h);
    }

    #[test]
    fn constant_group() {
        let h = row(&[5.0, 5.0, 5.0]);
        let q = quantize(&h, 2, 3).unwrap();
        assert_eq!(q.codes(), [0, 0, 0]);
        assert_eq!(dequantize(&q).unwrap(), h);
    }

    #[test]
    fn endpoints_are_exact() {
        let h = row(&[0.1, 0.7, 0.3, -2.25, 9.5]);
        for bits in 1..=8 {
            let q = quantize(&h, bits, 5).unwrap();
            let d = dequantize(&q).unwrap();
            assert_eq!(d.get(0, 3), -2.25);
            assert_eq!(d.get(0, 4), 9.5);
        }
    }

    #[test]
    fn packing_straddles_bytes() {
        let h = Matrix::from_vec(3, 7, (0..21).map(|i| (i * 37 % 11) as f64).collect()).unwrap();
        for bits in [3u8, 5, 6, 7] {
            let q = quantize(&h, bits, 7).unwrap();
            assert_eq!(q.packed_codes().len(), (21 * bits as usize).div_ceil(8));
            let again = quantize(&dequantize(&q).unwrap(), bits, 7).unwrap();
            assert_eq!(again.codes(), q.codes());
        }
    }

    #[test]
    fn storage_accounting() {
        let h = Matrix::zeros(10, 6);
        let q = quantize(&h, 2, 6).unwrap();
        assert_eq!(q.num_groups(), 10);
        assert_eq!(q.storage_bytes(), 15 + 2 * 10 * 8);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(quantize(&row(&[1.0, f64::NAN]), 2, 2), Err(Error::Data(_))));
        assert!(matches!(quantize(&row(&[1.0]), 0, 1), Err(Error::InvalidParameter(_))));
        assert!(matches!(quantize(&row(&[1.0]), 9, 1), Err(Error::InvalidParameter(_))));
        assert!(matches!(quantize(&row(&[1.0]), 2, 0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn detects_corrupt_metadata() {
        let err = QuantizedBlock::from_parts(vec![0; 2], vec![0.0], vec![1.0], 4, 2, (1, 4));
        assert!(matches!(err, Err(Error::Corrupt(_))));
        let err = QuantizedBlock::from_parts(vec![0; 1], vec![0.0, 0.0], vec![1.0], 4, 2, (1, 4));
        assert!(matches!(err, Err(Error::Corrupt(_))));
        assert!(QuantizedBlock::from_parts(vec![0; 1], vec![0.0], vec![1.0], 4, 2, (1, 4)).is_ok());
    }

    #[test]
    fn stochastic_rounding_is_seeded_and_unbiased() {
        let h = Matrix::from_vec(1, 2001, (0..2001).map(|i| if i == 0 { 0.0 } else if i == 1 { 3.0 } else { 1.25 }).collect()).unwrap();
        let q = quantize_with(&h, 2, 2001, Rounding::Stochastic { seed: 3 }).unwrap();
        let q2 = quantize_with(&h, 2, 2001, Rounding::Stochastic { seed: 3 }).unwrap();
        assert_eq!(q, q2);
        let codes = q.codes();
        assert!(codes[2..].iter().all(|&c| c == 1 || c == 2));
        let mean = codes[2..].iter().map(|&c| c as f64).sum::<f64>() / 1999.0;
        assert!((mean - 1.25).abs() < 0.05, "mean code {mean}");
    }
}
