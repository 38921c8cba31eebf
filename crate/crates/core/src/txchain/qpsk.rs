//! Gray-mapped, unit-energy QPSK.
//!
//! Bit pair `(b0, b1)` maps to `((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)`.
//! Hard decisions pick the nearest constellation point, which for this map
//! is a per-axis sign test. Points on an axis (including the origin) are
//! resolved toward the `(+, +)` quadrant, i.e. a zero component decides bit 0.

use std::f64::consts::FRAC_1_SQRT_2;

use thiserror::Error;

use crate::linalg::c64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QpskError {
    #[error("QPSK needs an even number of bits, got {0}")]
    OddBitCount(usize),
}

/// Maps bits (values 0/1) to symbols, two bits per symbol.
pub fn modulate_qpsk(bits: &[u8]) -> Result<Vec<c64>, QpskError> {
    if bits.len() % 2 != 0 {
        return Err(QpskError::OddBitCount(bits.len()));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|pair| {
            let re = 1.0 - 2.0 * f64::from(pair[0] & 1);
            let im = 1.0 - 2.0 * f64::from(pair[1] & 1);
            c64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
        })
        .collect())
}

/// Minimum-distance hard decisions, two bits per symbol.
pub fn demodulate_qpsk(symbols: &[c64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [u8::from(s.re < 0.0), u8::from(s.im < 0.0)])
        .collect()
}
