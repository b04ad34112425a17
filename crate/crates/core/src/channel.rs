//! The multimode link between the two chips: phase drift, loss,
//! path-length mismatch, loss balancing and detector-efficiency correction.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fringe::FringeFit;
use crate::linalg::{wrap_phase, C64};
use crate::state::BipartiteState;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    /// Drift phase per mode, wrapped to (−π, π].
    pub phases: Vec<f64>,
    /// Power transmission per mode.
    pub transmissivities: Vec<f64>,
    /// Path-length mismatch per mode relative to an arbitrary reference, metres.
    pub mismatches: Vec<f64>,
    /// MZI attenuator phase per mode; transmission is sin²(φ/2), so π is fully open.
    pub attenuator_settings: Vec<f64>,
    /// Correction phase-shifter setting per mode.
    pub corrections: Vec<f64>,
    /// Simulated time, seconds.
    pub time: f64,
}

impl ChannelState {
    /// Lossless, drift-free, perfectly matched link.
    pub fn ideal(d: usize) -> Self {
        ChannelState {
            phases: vec![0.0; d],
            transmissivities: vec![1.0; d],
            mismatches: vec![0.0; d],
            attenuator_settings: vec![PI; d],
            corrections: vec![0.0; d],
            time: 0.0,
        }
    }

    pub fn with_phases(phases: &[f64]) -> Self {
        let mut s = Self::ideal(phases.len());
        s.phases = phases.iter().map(|&p| wrap_phase(p)).collect();
        s
    }

    /// Ideal link with phases drawn uniformly from (−π, π].
    pub fn random_phases<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let phases: Vec<f64> = (0..d).map(|_| rng.random_range(-PI..PI)).collect();
        Self::with_phases(&phases)
    }

    pub fn d(&self) -> usize {
        self.phases.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        for (name, len) in [
            ("transmissivities", self.transmissivities.len()),
            ("mismatches", self.mismatches.len()),
            ("attenuator_settings", self.attenuator_settings.len()),
            ("corrections", self.corrections.len()),
        ] {
            if len != d {
                return Err(Error::Dimension(format!("{name} has {len} entries for {d} modes")));
            }
        }
        if self.transmissivities.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidArgument("transmissivities must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Power transmission of the attenuator on mode `n`.
    pub fn attenuation(&self, n: usize) -> f64 {
        (self.attenuator_settings[n] / 2.0).sin().powi(2)
    }

    /// Total phase a photon in mode `n` acquires: drift plus correction.
    pub fn effective_phase(&self, n: usize) -> f64 {
        wrap_phase(self.phases[n] + self.corrections[n])
    }

    /// Effective phases relative to mode 0.
    pub fn relative_phases(&self) -> Vec<f64> {
        let p0 = self.effective_phase(0);
        (0..self.d()).map(|n| wrap_phase(self.effective_phase(n) - p0)).collect()
    }

    /// Relative phase offset Δ_{n,n'} between two modes.
    pub fn offset(&self, n: usize, n2: usize) -> f64 {
        wrap_phase(self.effective_phase(n2) - self.effective_phase(n))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
}

impl Sinusoid {
    fn value(&self, t: f64) -> f64 {
        self.amplitude * (2.0 * PI * self.frequency * t + self.phase).sin()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftModel {
    /// Random-walk strength per mode, rad/√s.
    pub random_walk_sigma: Vec<f64>,
    /// Deterministic sinusoidal wander per mode.
    pub sinusoids: Vec<Vec<Sinusoid>>,
    /// σ of optical-power readout noise relative to the fringe maximum.
    pub readout_noise_rel: f64,
}

impl DriftModel {
    pub fn none(d: usize) -> Self {
        DriftModel { random_walk_sigma: vec![0.0; d], sinusoids: vec![Vec::new(); d], readout_noise_rel: 0.0 }
    }

    pub fn uniform(d: usize, sigma: f64, readout_noise_rel: f64) -> Self {
        DriftModel { random_walk_sigma: vec![sigma; d], sinusoids: vec![Vec::new(); d], readout_noise_rel }
    }

    /// Named presets: `none`, `onchip`, `scf`, `scf+mcf`, `dephased`.
    ///
    /// The fibre presets add one slow sinusoid per mode, with staggered
    /// frequencies and phases.
    pub fn preset(name: &str, d: usize) -> Result<Self> {
        let (sigma, amp, freq, noise) = match name {
            "none" => return Ok(Self::none(d)),
            "onchip" => (0.01, 0.0, 0.0, 0.005),
            "scf" => (0.12, 0.6, 0.02, 0.01),
            "scf+mcf" => (0.2, 0.9, 0.03, 0.01),
            "dephased" => (30.0, 0.0, 0.0, 0.01),
            other => return Err(Error::InvalidArgument(format!("unknown drift preset '{other}'"))),
        };
        let sinusoids = (0..d)
            .map(|n| {
                if amp == 0.0 {
                    Vec::new()
                } else {
                    let k = n as f64;
                    vec![Sinusoid { frequency: freq * (1.0 + 0.37 * k), amplitude: amp, phase: 1.3 * k }]
                }
            })
            .collect();
        Ok(DriftModel { random_walk_sigma: vec![sigma; d], sinusoids, readout_noise_rel: noise })
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.random_walk_sigma.len() != d || self.sinusoids.len() != d {
            return Err(Error::Dimension(format!("drift model does not describe {d} modes")));
        }
        let bad = self.random_walk_sigma.iter().any(|&s| !(s >= 0.0))
            || self.readout_noise_rel < 0.0
            || self.sinusoids.iter().flatten().any(|s| s.amplitude < 0.0 || s.frequency < 0.0);
        if bad {
            return Err(Error::InvalidArgument("drift magnitudes must be non-negative".into()));
        }
        Ok(())
    }
}

/// Advances the channel by `dt` seconds using `rng` for the random walk.
pub fn step_drift_with<R: Rng + ?Sized>(state: &ChannelState, model: &DriftModel, dt: f64, rng: &mut R) -> ChannelState {
    let mut next = state.clone();
    let (t0, t1) = (state.time, state.time + dt);
    for n in 0..state.d() {
        let z: f64 = StandardNormal.sample(rng);
        let mut inc = model.random_walk_sigma[n] * dt.sqrt() * z;
        for s in &model.sinusoids[n] {
            inc += s.value(t1) - s.value(t0);
        }
        next.phases[n] = wrap_phase(state.phases[n] + inc);
    }
    next.time = t1;
    next
}

/// Seeded form of [`step_drift_with`].
pub fn step_drift(state: &ChannelState, model: &DriftModel, dt: f64, seed: u64) -> Result<ChannelState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    model.validate(state.d())?;
    Ok(step_drift_with(state, model, dt, &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Sends the signal photon through the link. Returns the renormalised
/// state and the probability that the photon survived.
pub fn apply_channel(state: &ChannelState, psi: &BipartiteState) -> Result<(BipartiteState, f64)> {
    let d = psi.d();
    if state.d() != d {
        return Err(Error::Dimension(format!("channel has {} modes but state has d={d}", state.d())));
    }
    let factors: Vec<C64> = (0..d)
        .map(|m| C64::from_polar((state.transmissivities[m] * state.attenuation(m)).sqrt(), state.effective_phase(m)))
        .collect();
    let mut amps: Vec<C64> = psi.amplitudes().to_vec();
    for n in 0..d {
        for m in 0..d {
            amps[n * d + m] *= factors[m];
        }
    }
    let survival: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    if survival <= 0.0 {
        return Err(Error::ZeroCounts);
    }
    let s = survival.sqrt();
    amps.iter_mut().for_each(|a| *a /= s);
    Ok((BipartiteState::new(d, amps)?, survival))
}

/// Dark-port power of the interferometer combining modes `n` and `n2`
/// with analyser phase `theta` on mode `n`, normalised to the total input.
///
/// For balanced modes this is sin²(πΔL/λ + (θ + Δ_{n,n2})/2).
pub fn classical_fringe(state: &ChannelState, modes: (usize, usize), theta: f64, wavelength: f64) -> Result<f64> {
    let (n, n2) = modes;
    if n == n2 || n >= state.d() || n2 >= state.d() {
        return Err(Error::InvalidArgument(format!("invalid mode pair ({n}, {n2})")));
    }
    let a = state.transmissivities[n] * state.attenuation(n);
    let b = state.transmissivities[n2] * state.attenuation(n2);
    if a + b <= 0.0 {
        return Ok(0.0);
    }
    let dl = state.mismatches[n2] - state.mismatches[n];
    let delta = 2.0 * PI * dl / wavelength + theta + state.offset(n, n2);
    Ok((a + b - 2.0 * (a * b).sqrt() * delta.cos()) / (2.0 * (a + b)))
}

/// Adds Gaussian readout noise of σ = `rel` × `full_scale`, where
/// `full_scale` is the fringe maximum.
pub fn add_readout_noise<R: Rng + ?Sized>(power: f64, rel: f64, full_scale: f64, rng: &mut R) -> f64 {
    if rel == 0.0 {
        return power;
    }
    let z: f64 = StandardNormal.sample(rng);
    power + rel * full_scale * z
}

/// Path-length mismatch from the phase offsets of signal- and
/// pump-wavelength fringes, taking the branch nearest zero.
pub fn estimate_mismatch(fit_signal: &FringeFit, fit_pump: &FringeFit, lambda_s: f64, lambda_p: f64) -> Result<f64> {
    let k = 1.0 / lambda_s - 1.0 / lambda_p;
    if k == 0.0 || !k.is_finite() {
        return Err(Error::InvalidArgument("signal and pump wavelengths must differ".into()));
    }
    let diff = wrap_phase(fit_signal.phase_offset() - fit_pump.phase_offset());
    Ok(diff / (2.0 * PI * k))
}

/// MZI attenuator phases that bring every mode down to the lossiest one.
pub fn balance_losses(efficiencies: &[f64]) -> Result<Vec<f64>> {
    if efficiencies.is_empty() {
        return Err(Error::InvalidArgument("no efficiencies given".into()));
    }
    if efficiencies.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
        return Err(Error::InvalidArgument("efficiencies must lie in (0, 1]".into()));
    }
    let lossiest = efficiencies.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(efficiencies.iter().map(|&a| 2.0 * (lossiest / a).sqrt().min(1.0).asin()).collect())
}

/// Relative efficiency per detector port.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorEfficiencies {
    pub eta: Vec<f64>,
}

impl DetectorEfficiencies {
    pub fn ideal(d: usize) -> Self {
        DetectorEfficiencies { eta: vec![1.0; d] }
    }

    pub fn new(eta: Vec<f64>) -> Result<Self> {
        if eta.is_empty() || eta.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::InvalidArgument("detector efficiencies must lie in (0, 1]".into()));
        }
        Ok(DetectorEfficiencies { eta })
    }

    /// Scales raw efficiencies so the best detector counts as 1.
    pub fn relative(raw: &[f64]) -> Result<Self> {
        let max = raw.iter().copied().fold(0.0, f64::max);
        if !(max > 0.0) {
            return Err(Error::InvalidArgument("at least one efficiency must be positive".into()));
        }
        Self::new(raw.iter().map(|e| e / max).collect())
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }
}

/// Divides each coincidence count by η_a η_b and normalises to unit sum.
pub fn correct_efficiencies(counts: &[Vec<f64>], eta_a: &DetectorEfficiencies, eta_b: &DetectorEfficiencies) -> Result<Vec<Vec<f64>>> {
    if counts.len() != eta_a.len() || counts.iter().any(|r| r.len() != eta_b.len()) {
        return Err(Error::Dimension("count matrix does not match detector count".into()));
    }
    if counts.iter().flatten().any(|&c| !(c >= 0.0) || !c.is_finite()) {
        return Err(Error::InvalidArgument("counts must be finite and non-negative".into()));
    }
    let corrected: Vec<Vec<f64>> = counts
        .iter()
        .enumerate()
        .map(|(a, row)| row.iter().enumerate().map(|(b, &c)| c / (eta_a.eta[a] * eta_b.eta[b])).collect())
        .collect();
    let total: f64 = corrected.iter().flatten().sum();
    if total <= 0.0 {
        return Err(Error::ZeroCounts);
    }
    Ok(corrected.into_iter().map(|row| row.into_iter().map(|c| c / total).collect()).collect())
}

/// Fidelity of the classical Hadamard-state fringe through a phase-only
/// channel: |Σ_n e^{iψ_n}|² / d².
pub fn hadamard_fidelity(phases: &[f64]) -> f64 {
    let d = phases.len() as f64;
    let s: C64 = phases.iter().map(|&p| C64::from_polar(1.0, p)).sum();
    s.norm_sqr() / (d * d)
}

/// Gaussian sample helper for callers that only need N(0, σ²).
pub fn gaussian<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).map(|n| n.sample(rng)).unwrap_or(0.0)
}
