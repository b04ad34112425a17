//! Two-qudit state tomography from local MUB coincidence counts.

pub mod counts;
pub mod estimate;
pub mod linear;
pub mod metrics;
pub mod montecarlo;

pub use counts::{all_settings, frequencies, outcome_probabilities, simulate_counts, simulate_tomography, CountsRecord, Shots};
pub use estimate::{physical_estimate, physical_estimate_from_records, CostTarget, EstimateOptions, PhysicalEstimate};
pub use linear::{linear_reconstruct, stokes_reconstruct_qubit};
pub use metrics::{dimension_witness, Witness};
pub use montecarlo::{monte_carlo_errors, MonteCarloErrors, Stat};

use crate::bases::MubSet;
use crate::channel::DetectorEfficiencies;
use crate::error::{Error, Result};
use crate::state::{entanglement_entropy, fidelity_pure, DensityMatrix, PureState};

/// Witness settings: Alice computational, Bob computational and Fourier.
pub const WITNESS_SETTINGS: (usize, usize, usize) = (0, 0, 1);

/// Point estimates from one data set.
#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub rho_linear: DensityMatrix,
    pub estimate: PhysicalEstimate,
    pub fidelity: f64,
    pub entropy: f64,
    pub witness: Witness,
}

/// Linear reconstruction, physical estimate, fidelity to `target`,
/// entanglement entropy and dimension witness for two-qudit records.
pub fn analyse(records: &[CountsRecord], eta: &[DetectorEfficiencies], bases: &MubSet, target: &PureState, opts: &EstimateOptions) -> Result<Analysis> {
    let d = bases.d;
    if target.dim() != d * d {
        return Err(Error::Dimension(format!("target has dimension {}, expected {}", target.dim(), d * d)));
    }
    let rho_linear = linear_reconstruct(records, eta, bases, 2)?;
    let estimate = physical_estimate_from_records(records, eta, bases, 2, &rho_linear, opts)?;
    let fidelity = fidelity_pure(target, &estimate.rho)?;
    let entropy = entanglement_entropy(&estimate.rho, d)?;
    let (ma, mb, mb2) = WITNESS_SETTINGS;
    let witness = dimension_witness(records, eta, ma, mb, mb2)?;
    Ok(Analysis { rho_linear, estimate, fidelity, entropy, witness })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TomographyResult {
    pub d: usize,
    pub analysis: Analysis,
    pub monte_carlo: Option<MonteCarloErrors>,
}

/// Full analysis plus optional Monte-Carlo error bars (`mc_reps` = 0 skips them).
pub fn tomography(
    records: &[CountsRecord],
    eta: &[DetectorEfficiencies],
    bases: &MubSet,
    target: &PureState,
    opts: &EstimateOptions,
    mc_reps: usize,
    seed: u64,
) -> Result<TomographyResult> {
    let analysis = analyse(records, eta, bases, target, opts)?;
    let monte_carlo = if mc_reps > 0 { Some(monte_carlo_errors(records, eta, bases, target, mc_reps, seed, opts)?) } else { None };
    Ok(TomographyResult { d: bases.d, analysis, monte_carlo })
}
