//! Dimension witness from two-basis correlation data.

use serde::{Deserialize, Serialize};

use crate::channel::DetectorEfficiencies;
use crate::error::{Error, Result};

use super::counts::{frequencies, CountsRecord};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// B = Σ_{b,b'} (Σ_a √(P_{a,b} P_{a,b'}))².
    pub overlap: f64,
    /// ⌈1/B⌉.
    pub dimension: usize,
}

/// Dimension witness from Alice measuring basis `m_a` while Bob measures
/// bases `m_b` and `m_b2`.
pub fn dimension_witness(records: &[CountsRecord], eta: &[DetectorEfficiencies], m_a: usize, m_b: usize, m_b2: usize) -> Result<Witness> {
    if m_b == m_b2 {
        return Err(Error::InvalidArgument("the witness needs two distinct bases for the second party".into()));
    }
    let find = |mb: usize| {
        records
            .iter()
            .find(|r| r.settings == [m_a, mb])
            .ok_or_else(|| Error::IncompleteSettings(format!("no record for setting ({m_a}, {mb})")))
    };
    let (r1, r2) = (find(m_b)?, find(m_b2)?);
    if r1.d != r2.d {
        return Err(Error::Dimension("records disagree on d".into()));
    }
    let d = r1.d;
    let p1 = frequencies(r1, eta)?;
    let p2 = frequencies(r2, eta)?;
    let mut overlap = 0.0;
    for b in 0..d {
        for b2 in 0..d {
            let s: f64 = (0..d).map(|a| (p1[a * d + b] * p2[a * d + b2]).sqrt()).sum();
            overlap += s * s;
        }
    }
    if !(overlap > 0.0) {
        return Err(Error::WitnessUndefined);
    }
    let dimension = (1.0 / overlap - 1e-9).ceil().max(1.0) as usize;
    Ok(Witness { overlap, dimension })
}
