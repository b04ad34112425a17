//! Monte-Carlo error bars: resample every count from a Poisson
//! distribution centred on the measured value and repeat the analysis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::MubSet;
use crate::channel::DetectorEfficiencies;
use crate::error::{Error, Result};
use crate::seed::{rng_for, trial_seed};
use crate::state::PureState;

use super::counts::{poisson, CountsRecord};
use super::{analyse, EstimateOptions};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(samples: &[f64]) -> Stat {
        let n = samples.len() as f64;
        if samples.is_empty() {
            return Stat { mean: f64::NAN, std: f64::NAN };
        }
        let mean = samples.iter().sum::<f64>() / n;
        let std = if samples.len() > 1 { (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        Stat { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloErrors {
    pub reps: usize,
    pub fidelity: Stat,
    pub entropy: Stat,
    pub witness: Stat,
    pub fidelity_samples: Vec<f64>,
    pub entropy_samples: Vec<f64>,
    pub witness_samples: Vec<f64>,
}

/// Copy of `records` with every cell redrawn as Poisson(count).
pub fn resample(records: &[CountsRecord], seed: u64) -> Vec<CountsRecord> {
    let mut rng = rng_for(seed, "resample");
    records
        .iter()
        .map(|r| CountsRecord { counts: r.counts.iter().map(|&c| poisson(c, &mut rng)).collect(), ..r.clone() })
        .collect()
}

/// Repeats reconstruction, estimation and metrics on `reps` resampled
/// data sets, in parallel, with per-rep seeds derived from `seed`.
pub fn monte_carlo_errors(
    records: &[CountsRecord],
    eta: &[DetectorEfficiencies],
    bases: &MubSet,
    target: &PureState,
    reps: usize,
    seed: u64,
    opts: &EstimateOptions,
) -> Result<MonteCarloErrors> {
    if reps < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 Monte-Carlo repetitions, got {reps}")));
    }
    let samples: Vec<(f64, f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|k| {
            let data = resample(records, trial_seed(seed, "monte-carlo", k as u64));
            let a = analyse(&data, eta, bases, target, opts)?;
            Ok((a.fidelity, a.entropy, a.witness.dimension as f64))
        })
        .collect::<Result<_>>()?;
    let fidelity_samples: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let entropy_samples: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let witness_samples: Vec<f64> = samples.iter().map(|s| s.2).collect();
    Ok(MonteCarloErrors {
        reps,
        fidelity: Stat::of(&fidelity_samples),
        entropy: Stat::of(&entropy_samples),
        witness: Stat::of(&witness_samples),
        fidelity_samples,
        entropy_samples,
        witness_samples,
    })
}
