//! Two-round multimode phase stabilisation: plan construction, fringe
//! acquisition on the pump light, offset inference, correction, and an
//! interleaved session scheduler on simulated time.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{add_readout_noise, classical_fringe, gaussian, hadamard_fidelity, step_drift_with, ChannelState, DriftModel};
use crate::error::{Error, Result};
use crate::fringe::{fit_fringe, scan_drives, FitPriors, Prior, PHASE_DRIVE_NU};
use crate::linalg::wrap_phase;
use crate::seed::{rng_for, trial_seed};

/// Pump wavelength used for the classical stabilisation fringes, metres.
pub const PUMP_WAVELENGTH: f64 = 1550e-9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilisationPlan {
    pub d: usize,
    pub round1: Vec<(usize, usize)>,
    pub round2: Vec<(usize, usize)>,
}

impl StabilisationPlan {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.round1.iter().chain(&self.round2).copied()
    }

    pub fn rounds(&self) -> Vec<&[(usize, usize)]> {
        [self.round1.as_slice(), self.round2.as_slice()].into_iter().filter(|r| !r.is_empty()).collect()
    }

    /// Number of measured offsets summed to reach each mode from mode 0
    /// (0 for mode 0 itself, `None` if unreachable).
    pub fn inference_depth(&self) -> Vec<Option<usize>> {
        bfs_tree(self).into_iter().map(|n| n.map(|(_, _, depth)| depth)).collect()
    }
}

/// Round 1 pairs (n, n+1) for even n. Round 2 pairs the odd/even
/// neighbours (n+1, n+2); for even d this closes the ring with (d−1, 0),
/// for odd d the last mode is paired directly with mode 0.
pub fn build_plan(d: usize) -> Result<StabilisationPlan> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("stabilisation needs d >= 2, got {d}")));
    }
    let round1: Vec<(usize, usize)> = (0..d - 1).step_by(2).map(|n| (n, n + 1)).collect();
    let mut round2 = Vec::new();
    if d > 2 {
        if d % 2 == 0 {
            round2.extend((1..d - 1).step_by(2).map(|n| (n, n + 1)));
            round2.push((d - 1, 0));
        } else {
            round2.extend((1..d.saturating_sub(3)).step_by(2).map(|n| (n, n + 1)));
            round2.push((d - 1, 0));
        }
    }
    Ok(StabilisationPlan { d, round1, round2 })
}

/// Breadth-first tree from mode 0 with neighbours visited in ascending
/// order. Entry n holds (parent, pair, depth).
fn bfs_tree(plan: &StabilisationPlan) -> Vec<Option<(usize, (usize, usize), usize)>> {
    let d = plan.d;
    let mut adj: Vec<Vec<(usize, (usize, usize))>> = vec![Vec::new(); d];
    for (a, b) in plan.pairs() {
        adj[a].push((b, (a, b)));
        adj[b].push((a, (a, b)));
    }
    adj.iter_mut().for_each(|v| v.sort());
    let mut tree = vec![None; d];
    tree[0] = Some((0, (0, 0), 0));
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        let depth = tree[u].map(|t| t.2).unwrap_or(0);
        for &(v, pair) in &adj[u] {
            if tree[v].is_none() {
                tree[v] = Some((u, pair, depth + 1));
                queue.push_back(v);
            }
        }
    }
    tree
}

/// Relative offsets Δ_{0,n} for n = 1..d−1 from the measured pair offsets.
///
/// `measured` maps a pair (a, b) to Δ_{a,b} = φ_b − φ_a; a value supplied
/// for (b, a) is used negated. Modes adjacent to 0 are read directly, the
/// rest accumulate along the chain, wrapping after every addition.
pub fn infer_offsets(plan: &StabilisationPlan, measured: &[((usize, usize), f64)]) -> Result<Vec<f64>> {
    let lookup = |a: usize, b: usize| -> Result<f64> {
        for &((x, y), v) in measured {
            if (x, y) == (a, b) {
                return Ok(v);
            }
            if (x, y) == (b, a) {
                return Ok(-v);
            }
        }
        Err(Error::MissingPair(a, b))
    };
    for (a, b) in plan.pairs() {
        lookup(a, b)?;
    }
    let tree = bfs_tree(plan);
    let mut order: Vec<usize> = (1..plan.d).collect();
    order.sort_by_key(|&n| tree[n].map(|t| t.2).unwrap_or(usize::MAX));
    let mut offsets = vec![None; plan.d];
    offsets[0] = Some(0.0);
    for n in order {
        let (parent, _, _) = tree[n].ok_or(Error::MissingPair(0, n))?;
        let base = offsets[parent].ok_or(Error::MissingPair(0, parent))?;
        offsets[n] = Some(wrap_phase(base + lookup(parent, n)?));
    }
    Ok(offsets[1..].iter().map(|o| o.unwrap_or(0.0)).collect())
}

/// Applies θ_n = −Δ_{0,n} on top of the current corrections, where the
/// offsets were measured through those corrections.
pub fn apply_corrections(channel: &ChannelState, offsets: &[f64]) -> Result<ChannelState> {
    let d = channel.d();
    if offsets.len() + 1 != d {
        return Err(Error::Dimension(format!("expected {} offsets for d={d}, got {}", d.saturating_sub(1), offsets.len())));
    }
    let mut next = channel.clone();
    for n in 1..d {
        next.corrections[n] = wrap_phase(channel.corrections[n] - offsets[n - 1]);
    }
    Ok(next)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingBudget {
    /// Time to switch the on-chip configuration (one per round, plus one
    /// to apply corrections).
    pub t_set_config: f64,
    pub t_measure_point: f64,
    pub t_fit: f64,
    pub t_quantum_window: f64,
    pub points_per_fringe: usize,
}

impl Default for TimingBudget {
    /// 0.94 s per four-mode iteration, 82% of it spent on configuration changes.
    fn default() -> Self {
        TimingBudget {
            t_set_config: 0.2569333333333333,
            t_measure_point: 0.0173,
            t_fit: 0.0154,
            t_quantum_window: 0.2,
            points_per_fringe: 4,
        }
    }
}

impl TimingBudget {
    pub fn validate(&self) -> Result<()> {
        let t = [self.t_set_config, self.t_measure_point, self.t_fit, self.t_quantum_window];
        if t.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument("timing budget entries must be finite and non-negative".into()));
        }
        if self.points_per_fringe < 4 {
            return Err(Error::InvalidArgument("need at least 4 points per fringe".into()));
        }
        Ok(())
    }

    pub fn round_time(&self) -> f64 {
        self.t_set_config + self.points_per_fringe as f64 * self.t_measure_point + self.t_fit
    }

    pub fn iteration_time(&self, plan: &StabilisationPlan) -> f64 {
        plan.rounds().len() as f64 * self.round_time() + self.t_set_config
    }

    pub fn duty_cycle(&self, plan: &StabilisationPlan) -> f64 {
        self.t_quantum_window / (self.t_quantum_window + self.iteration_time(plan))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabiliserSettings {
    pub priors: FitPriors,
    /// Drive spacing between consecutive fringe points, radians.
    pub spacing: f64,
    pub wavelength: f64,
}

impl Default for StabiliserSettings {
    fn default() -> Self {
        StabiliserSettings { priors: default_priors(), spacing: 1.5, wavelength: PUMP_WAVELENGTH }
    }
}

/// Priors matching the simulated interferometers: unit bright-port
/// amplitude, no floor, and the phase-drive gain.
pub fn default_priors() -> FitPriors {
    FitPriors::new(
        Prior { mean: 1.0, sigma: 0.02 },
        Prior { mean: 0.0, sigma: 0.01 },
        Prior { mean: PHASE_DRIVE_NU, sigma: 0.002 },
    )
    .expect("valid default priors")
}

/// Bright-port power of the pair interferometer, maximal at θ = −Δ_{a,b}.
pub fn bright_port(channel: &ChannelState, pair: (usize, usize), theta: f64, wavelength: f64) -> Result<f64> {
    Ok(1.0 - classical_fringe(channel, pair, theta, wavelength)?)
}

/// Outcome of one stabilisation iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationOutcome {
    /// Inferred offsets, or `None` if a fringe failed twice and the
    /// previous correction was kept.
    pub offsets: Option<Vec<f64>>,
    pub rescans: usize,
}

/// Drives the channel through one stabilisation iteration. When
/// `enabled` is false the same time elapses but nothing is measured.
pub struct Stabiliser<'a> {
    pub plan: &'a StabilisationPlan,
    pub drift: &'a DriftModel,
    pub budget: &'a TimingBudget,
    pub settings: &'a StabiliserSettings,
    pub drift_rng: ChaCha8Rng,
    pub noise_rng: ChaCha8Rng,
}

impl Stabiliser<'_> {
    fn step(&mut self, ch: &ChannelState, dt: f64) -> ChannelState {
        if dt > 0.0 {
            step_drift_with(ch, self.drift, dt, &mut self.drift_rng)
        } else {
            ch.clone()
        }
    }

    /// Scans every pair of a round simultaneously, returning the new channel
    /// and the per-pair scans.
    fn scan_round(&mut self, mut ch: ChannelState, pairs: &[(usize, usize)]) -> Result<(ChannelState, Vec<Vec<(f64, f64)>>)> {
        let n = self.budget.points_per_fringe;
        let sp = self.settings.spacing;
        let drives = scan_drives(-sp * (n as f64 - 1.0) / 2.0, sp, n);
        let mut scans = vec![Vec::with_capacity(n); pairs.len()];
        for &x in &drives {
            for (k, &pair) in pairs.iter().enumerate() {
                let p = bright_port(&ch, pair, x, self.settings.wavelength)?;
                scans[k].push((x, add_readout_noise(p, self.drift.readout_noise_rel, 1.0, &mut self.noise_rng)));
            }
            ch = self.step(&ch, self.budget.t_measure_point);
        }
        Ok((ch, scans))
    }

    pub fn iterate(&mut self, channel: &ChannelState, enabled: bool) -> Result<(ChannelState, IterationOutcome)> {
        let mut ch = channel.clone();
        let mut measured = Vec::new();
        let mut rescans = 0;
        let mut failed = false;
        for round in self.plan.rounds() {
            ch = self.step(&ch, self.budget.t_set_config);
            if !enabled {
                for _ in 0..self.budget.points_per_fringe {
                    ch = self.step(&ch, self.budget.t_measure_point);
                }
                ch = self.step(&ch, self.budget.t_fit);
                continue;
            }
            let (next, scans) = self.scan_round(ch, round)?;
            ch = self.step(&next, self.budget.t_fit);
            for (k, scan) in scans.iter().enumerate() {
                let fit = match fit_fringe(scan, &self.settings.priors) {
                    Ok(f) => Ok(f),
                    Err(_) => {
                        rescans += 1;
                        let (next, again) = self.scan_round(ch, &round[k..k + 1])?;
                        ch = self.step(&next, self.budget.t_fit);
                        fit_fringe(&again[0], &self.settings.priors)
                    }
                };
                match fit {
                    Ok(f) => measured.push((round[k], f.phase_offset())),
                    Err(_) => failed = true,
                }
            }
        }
        ch = self.step(&ch, self.budget.t_set_config);
        if !enabled || failed {
            return Ok((ch, IterationOutcome { offsets: None, rescans }));
        }
        let offsets = infer_offsets(self.plan, &measured)?;
        let ch = apply_corrections(&ch, &offsets)?;
        Ok((ch, IterationOutcome { offsets: Some(offsets), rescans }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowType {
    Stabilise,
    Quantum,
}

impl WindowType {
    pub fn as_str(&self) -> &'static str {
        match self {
            WindowType::Stabilise => "stabilise",
            WindowType::Quantum => "quantum",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub window_type: WindowType,
    pub fidelity: f64,
    /// Effective phases of modes 1..d−1 relative to mode 0.
    pub residual_phases: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub rows: Vec<TraceRow>,
    pub duty_cycle: f64,
    pub failed_iterations: usize,
}

impl SessionTrace {
    pub fn mean_quantum_fidelity(&self) -> f64 {
        let q: Vec<f64> = self.rows.iter().filter(|r| r.window_type == WindowType::Quantum).map(|r| r.fidelity).collect();
        if q.is_empty() {
            f64::NAN
        } else {
            q.iter().sum::<f64>() / q.len() as f64
        }
    }
}

/// Channel snapshots taken during one quantum acquisition window.
#[derive(Clone, Debug)]
pub struct QuantumWindow {
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub snapshots: Vec<ChannelState>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub duration: f64,
    pub stabilise: bool,
    /// Snapshots taken within each quantum window.
    pub substeps: usize,
    pub settings: StabiliserSettings,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig { duration: 60.0, stabilise: true, substeps: 4, settings: StabiliserSettings::default() }
    }
}

fn residuals(ch: &ChannelState) -> Vec<f64> {
    ch.relative_phases()[1..].to_vec()
}

/// Alternates stabilisation iterations with quantum windows until
/// `config.duration` of simulated time has elapsed.
///
/// Drift and readout noise use separate streams derived from `seed`.
pub fn run_session(
    channel: ChannelState,
    drift: &DriftModel,
    plan: &StabilisationPlan,
    budget: &TimingBudget,
    config: &SessionConfig,
    seed: u64,
    quantum_callback: &mut dyn FnMut(&QuantumWindow),
) -> Result<SessionTrace> {
    budget.validate()?;
    drift.validate(plan.d)?;
    if channel.d() != plan.d {
        return Err(Error::Dimension("channel and plan disagree on d".into()));
    }
    let substeps = config.substeps.max(1);
    let mut stab = Stabiliser {
        plan,
        drift,
        budget,
        settings: &config.settings,
        drift_rng: rng_for(seed, "drift"),
        noise_rng: rng_for(seed, "readout"),
    };
    let mut ch = channel;
    let mut rows = Vec::new();
    let mut failed = 0;
    let mut index = 0;
    let t0 = ch.time;
    while ch.time - t0 < config.duration {
        let (next, outcome) = stab.iterate(&ch, config.stabilise)?;
        if config.stabilise && outcome.offsets.is_none() {
            failed += 1;
        }
        ch = next;
        rows.push(TraceRow {
            t: ch.time,
            window_type: WindowType::Stabilise,
            fidelity: hadamard_fidelity(&ch.relative_phases()),
            residual_phases: residuals(&ch),
        });
        let t_start = ch.time;
        let dt = budget.t_quantum_window / substeps as f64;
        let mut snapshots = Vec::with_capacity(substeps);
        for _ in 0..substeps {
            let mid = stab.step(&ch, dt / 2.0);
            snapshots.push(mid.clone());
            ch = stab.step(&mid, dt / 2.0);
        }
        let fid = snapshots.iter().map(|s| hadamard_fidelity(&s.relative_phases())).sum::<f64>() / substeps as f64;
        rows.push(TraceRow { t: ch.time, window_type: WindowType::Quantum, fidelity: fid, residual_phases: residuals(&snapshots[0]) });
        quantum_callback(&QuantumWindow { index, t_start, t_end: ch.time, snapshots });
        index += 1;
    }
    Ok(SessionTrace { rows, duty_cycle: budget.duty_cycle(plan), failed_iterations: failed })
}

/// Fidelity decay after a single correction with no further feedback,
/// sampled every `dt` for `duration` seconds.
pub fn decay_after_correction(
    channel: ChannelState,
    drift: &DriftModel,
    plan: &StabilisationPlan,
    budget: &TimingBudget,
    settings: &StabiliserSettings,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("sampling interval must be positive".into()));
    }
    let mut stab = Stabiliser {
        plan,
        drift,
        budget,
        settings,
        drift_rng: rng_for(seed, "decay-drift"),
        noise_rng: rng_for(seed, "decay-readout"),
    };
    let (mut ch, _) = stab.iterate(&channel, true)?;
    let t0 = ch.time;
    let mut out = vec![(0.0, hadamard_fidelity(&ch.relative_phases()))];
    while ch.time - t0 < duration - 1e-12 {
        ch = stab.step(&ch, dt);
        out.push((ch.time - t0, hadamard_fidelity(&ch.relative_phases())));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub d: usize,
    pub epsilon: f64,
    pub mean_fidelity: f64,
    pub std_fidelity: f64,
}

/// Width of the Gaussian whose mean absolute value is `epsilon`.
pub fn sigma_for_mean_abs_error(epsilon: f64) -> f64 {
    epsilon * (PI / 2.0).sqrt()
}

/// Hadamard-state fidelity after one noisy stabilisation, averaged over trials.
///
/// Each measured pair offset carries an independent Gaussian error whose
/// mean absolute value is ε; errors propagate through the plan's
/// inference chain into the residual phases.
pub fn error_scaling_study(d_list: &[usize], eps_list: &[f64], trials: usize, seed: u64) -> Result<Vec<ScalingRow>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if d_list.is_empty() || eps_list.is_empty() {
        return Err(Error::InvalidArgument("dimension and error lists must be non-empty".into()));
    }
    if eps_list.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::InvalidArgument("phase errors must be non-negative".into()));
    }
    let mut cells: Vec<(usize, f64)> = d_list.iter().flat_map(|&d| eps_list.iter().map(move |&e| (d, e))).collect();
    cells.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    cells.dedup();
    cells
        .par_iter()
        .map(|&(d, eps)| {
            let plan = build_plan(d)?;
            let sigma = sigma_for_mean_abs_error(eps);
            let label = format!("scaling-{d}-{eps:e}");
            let fids: Vec<f64> = (0..trials)
                .map(|k| {
                    let mut rng = rng_for(trial_seed(seed, &label, k as u64), "errors");
                    let measured: Vec<((usize, usize), f64)> = plan.pairs().map(|p| (p, gaussian(sigma, &mut rng))).collect();
                    let inferred = infer_offsets(&plan, &measured).expect("complete measurement set");
                    let mut phases = vec![0.0];
                    phases.extend(inferred.iter().map(|e| -e));
                    hadamard_fidelity(&phases)
                })
                .collect();
            let n = trials as f64;
            let mean = fids.iter().sum::<f64>() / n;
            let std = if trials > 1 { (fids.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
            Ok(ScalingRow { d, epsilon: eps, mean_fidelity: mean, std_fidelity: std })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn plan_examples() {
        let p = build_plan(4).unwrap();
        assert_eq!(p.round1, vec![(0, 1), (2, 3)]);
        assert_eq!(p.round2, vec![(1, 2), (3, 0)]);
        let p = build_plan(2).unwrap();
        assert_eq!(p.round1, vec![(0, 1)]);
        assert!(p.round2.is_empty());
        assert!(build_plan(1).is_err());
    }

    #[test]
    fn plans_are_connected_with_bounded_depth() {
        for d in 2..=16 {
            let depth = build_plan(d).unwrap().inference_depth();
            for (n, dep) in depth.iter().enumerate() {
                let dep = dep.unwrap_or_else(|| panic!("mode {n} unreachable for d={d}"));
                let bound = if d % 2 == 0 { d / 2 } else { d - 2 };
                assert!(dep <= bound, "d={d} mode {n} depth {dep}");
            }
        }
        // d = 6: offsets reach every mode as sums of measured offsets
        let depth = build_plan(6).unwrap().inference_depth();
        assert_eq!(depth, vec![Some(0), Some(1), Some(2), Some(3), Some(2), Some(1)]);
    }

    #[test]
    fn infer_example() {
        let plan = build_plan(4).unwrap();
        let m = [((0, 1), 0.1), ((2, 3), 0.3), ((1, 2), 0.2), ((0, 3), 0.6)];
        let off = infer_offsets(&plan, &m).unwrap();
        assert!((off[0] - 0.1).abs() < 1e-15);
        assert!((off[1] - 0.3).abs() < 1e-15);
        assert!((off[2] - 0.6).abs() < 1e-15);
        let zero: Vec<_> = plan.pairs().map(|p| (p, 0.0)).collect();
        assert!(infer_offsets(&plan, &zero).unwrap().iter().all(|&x| x == 0.0));
        assert!(matches!(infer_offsets(&plan, &m[..3]), Err(Error::MissingPair(3, 0))));
    }

    #[test]
    fn exact_inputs_give_exact_offsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for d in 2..=16 {
            let plan = build_plan(d).unwrap();
            let ch = ChannelState::random_phases(d, &mut rng);
            let m: Vec<_> = plan.pairs().map(|(a, b)| ((a, b), ch.offset(a, b))).collect();
            let off = infer_offsets(&plan, &m).unwrap();
            for n in 1..d {
                assert!(wrap_phase(off[n - 1] - ch.offset(0, n)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn worst_case_chain_bound() {
        let d = 8;
        let eps = 0.05;
        let plan = build_plan(d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let m: Vec<_> = plan.pairs().map(|p| (p, rng.random_range(-eps..=eps))).collect();
            let off = infer_offsets(&plan, &m).unwrap();
            worst = off.iter().fold(worst, |w, x| w.max(x.abs()));
        }
        assert!(worst <= eps * d as f64 / 2.0 + 1e-12, "{worst}");
        assert!(worst > eps * 2.0);
    }

    #[test]
    fn corrections_cancel_offsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let ch = ChannelState::random_phases(5, &mut rng);
        let exact: Vec<f64> = (1..5).map(|n| ch.offset(0, n)).collect();
        let fixed = apply_corrections(&ch, &exact).unwrap();
        assert!(fixed.relative_phases().iter().all(|r| r.abs() < 1e-12));
        assert!((hadamard_fidelity(&fixed.relative_phases()) - 1.0).abs() < 1e-9);
        let off: Vec<f64> = exact.iter().map(|x| x + 0.01).collect();
        let fixed = apply_corrections(&ch, &off).unwrap();
        assert!(fixed.relative_phases()[1..].iter().all(|r| (r + 0.01).abs() < 1e-12));
        assert!(apply_corrections(&ch, &exact[..2]).is_err());
    }

    #[test]
    fn noiseless_pipeline_restores_hadamard_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for d in [2usize, 3, 4, 5, 8] {
            let plan = build_plan(d).unwrap();
            let budget = TimingBudget::default();
            let settings = StabiliserSettings::default();
            let drift = DriftModel::none(d);
            let mut stab = Stabiliser {
                plan: &plan,
                drift: &drift,
                budget: &budget,
                settings: &settings,
                drift_rng: ChaCha8Rng::seed_from_u64(1),
                noise_rng: ChaCha8Rng::seed_from_u64(2),
            };
            let ch = ChannelState::random_phases(d, &mut rng);
            let (out, outcome) = stab.iterate(&ch, true).unwrap();
            assert!(outcome.offsets.is_some());
            assert!((hadamard_fidelity(&out.relative_phases()) - 1.0).abs() < 1e-9, "d={d}");
        }
    }

    #[test]
    fn duty_cycle_matches_closed_form() {
        let plan = build_plan(4).unwrap();
        let b = TimingBudget::default();
        assert!((b.iteration_time(&plan) - 0.94).abs() < 1e-12);
        assert!((b.duty_cycle(&plan) - 0.2 / 1.14).abs() < 1e-12);
        assert!((b.duty_cycle(&plan) - 0.175).abs() < 0.001);
        let config_share = 3.0 * b.t_set_config / b.iteration_time(&plan);
        assert!((config_share - 0.82).abs() < 1e-9);
    }

    #[test]
    fn zero_drift_session_stays_perfect() {
        let d = 4;
        let plan = build_plan(d).unwrap();
        let config = SessionConfig { duration: 10.0, ..Default::default() };
        let mut windows = 0;
        let trace = run_session(ChannelState::ideal(d), &DriftModel::none(d), &plan, &TimingBudget::default(), &config, 3, &mut |_| windows += 1).unwrap();
        assert!(windows > 5);
        assert!(trace.rows.iter().all(|r| (r.fidelity - 1.0).abs() < 1e-9));
        let expected = 0.2 / (0.2 + 0.94);
        assert!((trace.duty_cycle - expected).abs() < 1e-12);
    }

    #[test]
    fn sessions_are_reproducible() {
        let d = 4;
        let plan = build_plan(d).unwrap();
        let drift = DriftModel::preset("scf", d).unwrap();
        let config = SessionConfig { duration: 20.0, ..Default::default() };
        let run = || {
            run_session(ChannelState::with_phases(&[0.0, 1.0, -2.0, 2.5]), &drift, &plan, &TimingBudget::default(), &config, 77, &mut |_| {})
                .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn scaling_examples() {
        let rows = error_scaling_study(&[2, 4, 8], &[0.0], 50, 1).unwrap();
        assert!(rows.iter().all(|r| (r.mean_fidelity - 1.0).abs() < 1e-12));
        assert!(error_scaling_study(&[4], &[0.1], 0, 1).is_err());
    }

    #[test]
    fn scaling_matches_analytic_d4() {
        // d = 4 chain: r1 = e01, r3 = −e30, r2 = e01 + e12, so pairwise
        // residual differences have variances σ²·(1, 2, 1, 1, 2, 3)
        let eps = 0.2;
        let s2 = sigma_for_mean_abs_error(eps).powi(2);
        let sum: f64 = [1.0f64, 2.0, 1.0, 1.0, 2.0, 3.0].iter().map(|k| (-k * s2 / 2.0).exp()).sum();
        let analytic = (4.0 + 2.0 * sum) / 16.0;
        let rows = error_scaling_study(&[4], &[eps], 20_000, 5).unwrap();
        assert!((rows[0].mean_fidelity - analytic).abs() < 3.0 * rows[0].std_fidelity / (20_000f64).sqrt() + 1e-4);
        assert!((rows[0].mean_fidelity - 0.95).abs() <= 0.02);
    }

    #[test]
    fn scaling_decreases_with_dimension() {
        let rows = error_scaling_study(&[2, 3, 4, 6, 8, 12, 16], &[0.1, 0.2], 4000, 9).unwrap();
        for eps in [0.1, 0.2] {
            let col: Vec<f64> = rows.iter().filter(|r| r.epsilon == eps).map(|r| r.mean_fidelity).collect();
            assert!(col.windows(2).all(|w| w[1] <= w[0] + 1e-3), "{col:?}");
        }
    }
}
