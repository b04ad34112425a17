//! Coincidence-count records and their simulation.

use std::collections::BTreeMap;

use rand::RngCore;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::bases::MubSet;
use crate::channel::DetectorEfficiencies;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::state::DensityMatrix;

/// Counts for one local measurement setting of N qudits.
///
/// Outcomes are flattened with the first party most significant, so for
/// two parties cell a·d + b holds outcome a for Alice and b for Bob.
/// Counts are stored as reals so exact expected counts can stand in for
/// sampled data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountsRecord {
    pub d: usize,
    pub settings: Vec<usize>,
    pub counts: Vec<f64>,
    pub acquisition_time: f64,
}

impl CountsRecord {
    pub fn parties(&self) -> usize {
        self.settings.len()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.d.pow(self.parties() as u32);
        if self.counts.len() != expected {
            return Err(Error::Dimension(format!("record has {} cells, expected {expected}", self.counts.len())));
        }
        if self.counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidArgument("counts must be finite and non-negative".into()));
        }
        if self.settings.iter().any(|&m| m > self.d) {
            return Err(Error::InvalidArgument(format!("basis index out of range for d={}", self.d)));
        }
        Ok(())
    }

    /// Two-party count at (a, b).
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.counts[a * self.d + b]
    }
}

/// How counts are drawn from the outcome probabilities.
pub enum Shots<'a> {
    /// Exact expected counts, no shot noise.
    Exact,
    /// Independent Poisson counts per cell.
    Poisson(&'a mut dyn RngCore),
}

/// Product of the per-party measurement unitaries for `settings`.
pub fn setting_unitary(bases: &MubSet, settings: &[usize]) -> CMatrix {
    settings
        .iter()
        .fold(CMatrix::identity(1), |acc, &m| crate::linalg::tensor(&acc, &bases.measurement_unitary(m)))
}

/// Outcome probabilities of `rho` for one setting.
pub fn outcome_probabilities(rho: &DensityMatrix, bases: &MubSet, settings: &[usize]) -> Result<Vec<f64>> {
    Ok(outcome_expectations(rho, bases, settings)?.into_iter().map(|p| p.max(0.0)).collect())
}

/// Tr(Γ ρ) for every outcome of `settings`, without clipping negative
/// values of unphysical inputs.
pub(crate) fn outcome_expectations(rho: &DensityMatrix, bases: &MubSet, settings: &[usize]) -> Result<Vec<f64>> {
    let dim = bases.d.pow(settings.len() as u32);
    if rho.dim() != dim {
        return Err(Error::Dimension(format!("state dimension {} does not match {} parties of d={}", rho.dim(), settings.len(), bases.d)));
    }
    if settings.iter().any(|&m| m >= bases.len()) {
        return Err(Error::InvalidArgument("basis index out of range".into()));
    }
    let u = setting_unitary(bases, settings);
    let rotated = u.matmul(rho.matrix()).matmul(&u.adjoint());
    Ok((0..dim).map(|k| rotated[(k, k)].re).collect())
}

fn outcome_digits(mut index: usize, d: usize, parties: usize) -> Vec<usize> {
    let mut digits = vec![0; parties];
    for k in (0..parties).rev() {
        digits[k] = index % d;
        index /= d;
    }
    digits
}

/// Simulated coincidence counts for one setting with mean
/// `n_events · p · Π η` per cell.
pub fn simulate_counts(
    rho: &DensityMatrix,
    bases: &MubSet,
    settings: &[usize],
    n_events: f64,
    eta: &[DetectorEfficiencies],
    shots: &mut Shots<'_>,
) -> Result<CountsRecord> {
    if !(n_events >= 0.0) || !n_events.is_finite() {
        return Err(Error::InvalidArgument("event count must be finite and non-negative".into()));
    }
    if eta.len() != settings.len() || eta.iter().any(|e| e.len() != bases.d) {
        return Err(Error::Dimension("one efficiency vector of length d is needed per party".into()));
    }
    let probs = outcome_probabilities(rho, bases, settings)?;
    let mut counts = Vec::with_capacity(probs.len());
    for (k, p) in probs.iter().enumerate() {
        let thin: f64 = outcome_digits(k, bases.d, settings.len()).iter().zip(eta).map(|(&o, e)| e.eta[o]).product();
        let mean = n_events * p * thin;
        counts.push(match shots {
            Shots::Exact => mean,
            Shots::Poisson(rng) => poisson(mean, &mut **rng),
        });
    }
    Ok(CountsRecord { d: bases.d, settings: settings.to_vec(), counts, acquisition_time: 0.0 })
}

/// Poisson draw that treats a zero mean as a certain zero.
pub fn poisson(mean: f64, rng: &mut dyn RngCore) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).map(|p| p.sample(rng)).unwrap_or(0.0)
}

/// Every local setting, lexicographic with the first party slowest.
pub fn all_settings(d: usize, parties: usize) -> Vec<Vec<usize>> {
    let per = d + 1;
    (0..per.pow(parties as u32)).map(|k| outcome_digits(k, per, parties)).collect()
}

/// Counts for every local MUB setting.
pub fn simulate_tomography(
    rho: &DensityMatrix,
    bases: &MubSet,
    parties: usize,
    n_events: f64,
    eta: &[DetectorEfficiencies],
    shots: &mut Shots<'_>,
) -> Result<Vec<CountsRecord>> {
    all_settings(bases.d, parties).iter().map(|s| simulate_counts(rho, bases, s, n_events, eta, shots)).collect()
}

/// Efficiency-corrected outcome frequencies of one record, summing to 1.
pub fn frequencies(record: &CountsRecord, eta: &[DetectorEfficiencies]) -> Result<Vec<f64>> {
    record.validate()?;
    if eta.len() != record.parties() || eta.iter().any(|e| e.len() != record.d) {
        return Err(Error::Dimension("one efficiency vector of length d is needed per party".into()));
    }
    let corrected: Vec<f64> = record
        .counts
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let thin: f64 = outcome_digits(k, record.d, record.parties()).iter().zip(eta).map(|(&o, e)| e.eta[o]).product();
            c / thin
        })
        .collect();
    let total: f64 = corrected.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroCounts);
    }
    Ok(corrected.into_iter().map(|c| c / total).collect())
}

/// Frequencies for every setting, keyed by setting; duplicate settings
/// are pooled. Fails unless all (d+1)^N settings are present.
pub fn frequency_table(records: &[CountsRecord], eta: &[DetectorEfficiencies], d: usize, parties: usize) -> Result<BTreeMap<Vec<usize>, Vec<f64>>> {
    let mut pooled: BTreeMap<Vec<usize>, CountsRecord> = BTreeMap::new();
    for r in records {
        if r.d != d || r.parties() != parties {
            return Err(Error::Dimension(format!("record for d={}, N={} in a d={d}, N={parties} data set", r.d, r.parties())));
        }
        r.validate()?;
        pooled
            .entry(r.settings.clone())
            .and_modify(|acc| acc.counts.iter_mut().zip(&r.counts).for_each(|(a, b)| *a += b))
            .or_insert_with(|| r.clone());
    }
    let missing: Vec<Vec<usize>> = all_settings(d, parties).into_iter().filter(|s| !pooled.contains_key(s)).collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteSettings(format!("{} of {} settings missing, first {:?}", missing.len(), (d + 1).pow(parties as u32), missing[0])));
    }
    pooled.into_iter().map(|(s, r)| Ok((s, frequencies(&r, eta)?))).collect()
}
