use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};

use hdlink::bases::{measurement_counts, mub_set, MeasurementCounts};
use hdlink::channel::{apply_channel, ChannelState};
use hdlink::fringe::{fit_fringe, FitPriors, FringeFit};
use hdlink::io::{write_counts_csv, DensityJson, TomographyJson};
use hdlink::linalg::CMatrix;
use hdlink::seed::{derive_seed, rng_for, trial_seed};
use hdlink::source::{prepare_bell_like, rhom_fringe, visibility, RhomPoint};
use hdlink::stabiliser::{build_plan, decay_after_correction, error_scaling_study, run_session, ScalingRow, SessionConfig, SessionTrace};
use hdlink::tomography::{simulate_tomography, tomography as run_tomography, Shots};
use hdlink::{DensityMatrix, Physicality};

use crate::config::{Config, InitialPhases};

/// A config together with the resolved seed, output directory and trial
/// override.
#[derive(Clone, Debug)]
pub struct Run {
    pub config: Config,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub trials: Option<usize>,
}

impl Run {
    pub fn new(config: Config, seed: Option<u64>, out: Option<PathBuf>, trials: Option<usize>) -> Self {
        let seed = seed.or(config.scenario.seed);
        let out = out.or_else(|| config.scenario.out.clone()).unwrap_or_else(|| PathBuf::from("."));
        Run { config, seed, out, trials }
    }

    fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| anyhow!("no seed given: pass --seed or set scenario.seed"))
    }

    fn path(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(self.out.join(name))
    }

    fn initial_channel(&self, seed: u64) -> ChannelState {
        let d = self.config.scenario.d;
        match self.config.scenario.initial_phases {
            InitialPhases::Zero => ChannelState::ideal(d),
            InitialPhases::Random => ChannelState::random_phases(d, &mut rng_for(seed, "initial-phases")),
        }
    }

    fn session_config(&self, stabilise: bool) -> SessionConfig {
        SessionConfig {
            duration: self.config.scenario.duration,
            stabilise,
            substeps: self.config.scenario.substeps,
            settings: self.config.stabiliser_settings(),
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

pub fn write_session_csv(path: &Path, trace: &SessionTrace, d: usize) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["t_seconds".to_string(), "window_type".into(), "fidelity".into()];
    header.extend((1..d).map(|n| format!("residual_phase_{n}")));
    w.write_record(&header)?;
    for row in &trace.rows {
        let mut rec = vec![row.t.to_string(), row.window_type.as_str().to_string(), row.fidelity.to_string()];
        rec.extend(row.residual_phases.iter().map(|p| p.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabiliseSummary {
    pub d: usize,
    pub trials: usize,
    pub duty_cycle: f64,
    pub iteration_time: f64,
    pub mean_fidelity_stabilised: f64,
    pub mean_fidelity_unstabilised: f64,
    pub fidelity_stabilised: Vec<f64>,
    pub fidelity_unstabilised: Vec<f64>,
    pub failed_iterations: usize,
}

/// Runs each session with stabilisation off and on, writes the first
/// pair of traces, the free-running decay after one correction, and a
/// summary over all trials.
pub fn stabilise(run: &Run) -> Result<StabiliseSummary> {
    let cfg = &run.config;
    let seed = run.seed()?;
    let d = cfg.scenario.d;
    let plan = build_plan(d)?;
    let budget = cfg.timing.budget()?;
    let drift = cfg.drift.model(d)?;
    let trials = run.trials.unwrap_or(1).max(1);
    let mut on = Vec::with_capacity(trials);
    let mut off = Vec::with_capacity(trials);
    let mut failed = 0;
    for k in 0..trials {
        let s = trial_seed(seed, "session", k as u64);
        let ch = run.initial_channel(s);
        for stabilise in [false, true] {
            let trace = run_session(ch.clone(), &drift, &plan, &budget, &run.session_config(stabilise), s, &mut |_| {})?;
            if k == 0 {
                let name = if stabilise { "session_stabilised.csv" } else { "session_unstabilised.csv" };
                write_session_csv(&run.path(name)?, &trace, d)?;
            }
            if stabilise {
                failed += trace.failed_iterations;
                on.push(trace.mean_quantum_fidelity());
            } else {
                off.push(trace.mean_quantum_fidelity());
            }
        }
    }
    let decay_seed = derive_seed(seed, "decay");
    let decay = decay_after_correction(
        run.initial_channel(decay_seed),
        &drift,
        &plan,
        &budget,
        &cfg.stabiliser_settings(),
        cfg.timing.decay_duration.unwrap_or(30.0),
        cfg.timing.decay_dt.unwrap_or(0.5),
        decay_seed,
    )?;
    let mut w = csv_writer(&run.path("decay.csv")?)?;
    w.write_record(["t_seconds", "fidelity"])?;
    for (t, f) in &decay {
        w.write_record([t.to_string(), f.to_string()])?;
    }
    w.flush()?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let summary = StabiliseSummary {
        d,
        trials,
        duty_cycle: budget.duty_cycle(&plan),
        iteration_time: budget.iteration_time(&plan),
        mean_fidelity_stabilised: mean(&on),
        mean_fidelity_unstabilised: mean(&off),
        fidelity_stabilised: on,
        fidelity_unstabilised: off,
        failed_iterations: failed,
    };
    write_json(&run.path("stabilise_summary.json")?, &summary)?;
    Ok(summary)
}

/// State delivered over a session: the prepared state through every
/// quantum-window snapshot of the channel, mixed with survival weights.
pub fn delivered_state(run: &Run, seed: u64) -> Result<DensityMatrix> {
    let cfg = &run.config;
    let d = cfg.scenario.d;
    let psi = prepare_bell_like(&cfg.scenario.source()?)?;
    let plan = build_plan(d)?;
    let budget = cfg.timing.budget()?;
    let drift = cfg.drift.model(d)?;
    let mut snapshots = Vec::new();
    run_session(run.initial_channel(seed), &drift, &plan, &budget, &run.session_config(cfg.scenario.stabilise), seed, &mut |w| {
        snapshots.extend(w.snapshots.iter().cloned())
    })?;
    let dim = d * d;
    let mut acc = CMatrix::zeros(dim, dim);
    for ch in &snapshots {
        let (out, survival) = apply_channel(ch, &psi)?;
        acc = &acc + &out.to_density().matrix().scale_real(survival);
    }
    Ok(DensityMatrix::from_unnormalized(acc.hermitian_part(), Physicality::Physical)?)
}

fn write_density_csv(path: &Path, rho: &DensityMatrix) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["row", "col", "re", "im"])?;
    let m = rho.matrix();
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            w.write_record([r.to_string(), c.to_string(), m[(r, c)].re.to_string(), m[(r, c)].im.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Prepare, distribute, measure all local MUB settings, reconstruct and
/// estimate, with optional Monte-Carlo error bars.
pub fn tomography(run: &Run) -> Result<TomographyJson> {
    let cfg = &run.config;
    let seed = run.seed()?;
    let d = cfg.scenario.d;
    let target = prepare_bell_like(&cfg.scenario.source()?)?;
    let rho = delivered_state(run, derive_seed(seed, "session"))?;
    let bases = mub_set(d)?;
    let eta = cfg.tomography.efficiencies(d)?;
    let n = cfg.tomography.events_per_setting;
    let records = if cfg.tomography.shot_noise {
        let mut rng = rng_for(seed, "counts");
        simulate_tomography(&rho, &bases, 2, n, &eta, &mut Shots::Poisson(&mut rng))?
    } else {
        simulate_tomography(&rho, &bases, 2, n, &eta, &mut Shots::Exact)?
    };
    write_counts_csv(&records, File::create(run.path("counts.csv")?)?)?;
    let reps = run.trials.unwrap_or(cfg.tomography.mc_reps);
    let result = run_tomography(&records, &eta, &bases, target.as_pure(), &cfg.tomography.options(), reps, derive_seed(seed, "monte-carlo"))?;
    let json = TomographyJson::from(&result);
    write_json(&run.path("tomography.json")?, &json)?;
    write_json(&run.path("density_linear.json")?, &DensityJson::from_density(d, &result.analysis.rho_linear))?;
    write_json(&run.path("density_physical.json")?, &DensityJson::from_density(d, &result.analysis.estimate.rho))?;
    write_density_csv(&run.path("density_physical.csv")?, &result.analysis.estimate.rho)?;
    Ok(json)
}

/// Fidelity after one noisy stabilisation over the configured grid of
/// dimensions and phase errors.
pub fn scaling(run: &Run) -> Result<Vec<ScalingRow>> {
    let sc = &run.config.scaling;
    let trials = run.trials.unwrap_or(sc.trials);
    let rows = error_scaling_study(&sc.d_list, &sc.eps_list, trials, run.seed()?)?;
    let mut w = csv_writer(&run.path("scaling.csv")?)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows)
}

pub fn counts(d: usize, parties: usize) -> Result<MeasurementCounts> {
    Ok(measurement_counts(d, parties)?)
}

pub fn counts_table(d: usize, parties: usize) -> Result<String> {
    let c = counts(d, parties)?;
    Ok(format!(
        "d = {d}, parties = {parties}\nlocal MUB settings        {}\ngeneralised Pauli settings {}\njoint MUB settings        {}\n",
        c.local_mub, c.gellmann, c.joint_mub
    ))
}

/// RHOM fringe over one period of the source phase; returns the points
/// and the coincidence visibility.
pub fn rhom(run: &Run, indistinguishability: f64, points: usize) -> Result<(Vec<(f64, RhomPoint)>, f64)> {
    if points < 2 {
        return Err(anyhow!("need at least 2 points"));
    }
    let sweep: Vec<(f64, RhomPoint)> = (0..points)
        .map(|k| {
            let phi = std::f64::consts::PI * k as f64 / (points - 1) as f64;
            Ok((phi, rhom_fringe(phi, indistinguishability)?))
        })
        .collect::<Result<_>>()?;
    let v = visibility(&sweep.iter().map(|(_, p)| p.coincidence).collect::<Vec<_>>())?;
    let mut w = csv_writer(&run.path("rhom.csv")?)?;
    w.write_record(["phi", "coincidence", "classical"])?;
    for (phi, p) in &sweep {
        w.write_record([phi.to_string(), p.coincidence.to_string(), p.classical.to_string()])?;
    }
    w.flush()?;
    Ok((sweep, v))
}

#[derive(Debug, Deserialize)]
struct ScanRow {
    drive: f64,
    power: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeFitReport {
    pub fit: FringeFit,
    pub phase_offset: f64,
}

/// Fits one fringe read from a CSV with columns `drive,power`.
pub fn fringe_fit(run: &Run, input: &Path) -> Result<FringeFitReport> {
    let mut rdr = csv::Reader::from_path(input).with_context(|| format!("reading {}", input.display()))?;
    let scan: Vec<(f64, f64)> = rdr.deserialize::<ScanRow>().map(|r| r.map(|r| (r.drive, r.power))).collect::<std::result::Result<_, _>>()?;
    let priors = match run.config.fringe.unconstrained_nu {
        Some(nu) => FitPriors::unconstrained(nu),
        None => run.config.stabiliser_settings().priors,
    };
    let fit = fit_fringe(&scan, &priors)?;
    let report = FringeFitReport { fit, phase_offset: fit.phase_offset() };
    write_json(&run.path("fringe_fit.json")?, &report)?;
    Ok(report)
}
