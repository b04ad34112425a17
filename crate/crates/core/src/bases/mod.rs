//! Measurement bases: mutually unbiased bases, generalised Pauli
//! operators and bookkeeping for the measurement grid.

pub mod gellmann;
pub mod gf;
pub mod mub;

pub use gellmann::{gellmann_ops, verify_two_mode_support, Family, OperatorSet};
pub use mub::{mub_set, MubSet};

use crate::error::{Error, Result};

/// Number of measurement settings for complete N-qudit tomography.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MeasurementCounts {
    /// Local MUB settings, (d+1)^N.
    pub local_mub: u128,
    /// Local generalised-Pauli settings, (d²−1)^N.
    pub gellmann: u128,
    /// Joint MUB settings, d^N + 1.
    pub joint_mub: u128,
}

pub fn measurement_counts(d: usize, n: usize) -> Result<MeasurementCounts> {
    if d < 2 || n < 1 {
        return Err(Error::InvalidArgument(format!("need d >= 2 and N >= 1, got d={d}, N={n}")));
    }
    let pow = |b: u128| -> Result<u128> {
        (0..n).try_fold(1u128, |acc, _| acc.checked_mul(b)).ok_or_else(|| Error::InvalidArgument("count overflows".into()))
    };
    let d = d as u128;
    Ok(MeasurementCounts { local_mub: pow(d + 1)?, gellmann: pow(d * d - 1)?, joint_mub: pow(d)? + 1 })
}

/// Flat index p = n + m·d of outcome n in basis m.
pub fn projector_index(m: usize, n: usize, d: usize) -> Result<usize> {
    if n >= d {
        return Err(Error::InvalidArgument(format!("outcome {n} out of range for d={d}")));
    }
    Ok(n + m * d)
}

/// Inverse of [`projector_index`]: (m, n).
pub fn decode_projector_index(p: usize, d: usize) -> (usize, usize) {
    (p / d, p % d)
}
