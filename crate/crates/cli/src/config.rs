use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use hdlink::channel::{DetectorEfficiencies, DriftModel};
use hdlink::source::SourceConfig;
use hdlink::stabiliser::{StabiliserSettings, TimingBudget};
use hdlink::tomography::{CostTarget, EstimateOptions};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scenario: Scenario,
    pub drift: DriftSection,
    pub timing: TimingSection,
    pub tomography: TomographySection,
    pub scaling: ScalingSection,
    pub fringe: FringeSection,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialPhases {
    Zero,
    #[default]
    Random,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub d: usize,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Simulated session length, seconds.
    pub duration: f64,
    pub stabilise: bool,
    pub initial_phases: InitialPhases,
    pub substeps: usize,
    /// Source amplitudes; balanced when absent.
    pub magnitudes: Option<Vec<f64>>,
    pub phases: Option<Vec<f64>>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            d: 4,
            seed: None,
            out: None,
            duration: 60.0,
            stabilise: true,
            initial_phases: InitialPhases::Random,
            substeps: 4,
            magnitudes: None,
            phases: None,
        }
    }
}

impl Scenario {
    pub fn source(&self) -> Result<SourceConfig> {
        let d = self.d;
        let mut src = SourceConfig::balanced(d);
        if let Some(m) = &self.magnitudes {
            src.magnitudes = m.clone();
        }
        if let Some(p) = &self.phases {
            src.phases = p.clone();
        }
        src.validate()?;
        if src.d() != d {
            bail!("source describes {} modes but scenario.d = {d}", src.d());
        }
        Ok(src)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftSection {
    /// One of none, onchip, scf, scf+mcf, dephased. Ignored when
    /// `random_walk_sigma` is given.
    pub preset: String,
    pub random_walk_sigma: Option<Vec<f64>>,
    pub readout_noise_rel: Option<f64>,
}

impl Default for DriftSection {
    fn default() -> Self {
        DriftSection { preset: "scf".into(), random_walk_sigma: None, readout_noise_rel: None }
    }
}

impl DriftSection {
    pub fn model(&self, d: usize) -> Result<DriftModel> {
        let mut model = match &self.random_walk_sigma {
            Some(s) if s.len() == 1 => DriftModel::uniform(d, s[0], 0.0),
            Some(s) => DriftModel { random_walk_sigma: s.clone(), ..DriftModel::none(d) },
            None => DriftModel::preset(&self.preset, d)?,
        };
        if let Some(r) = self.readout_noise_rel {
            model.readout_noise_rel = r;
        }
        model.validate(d)?;
        Ok(model)
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingSection {
    pub t_set_config: Option<f64>,
    pub t_measure_point: Option<f64>,
    pub t_fit: Option<f64>,
    pub t_quantum_window: Option<f64>,
    pub points_per_fringe: Option<usize>,
    /// Length and sampling of the free-running decay curve.
    pub decay_duration: Option<f64>,
    pub decay_dt: Option<f64>,
}

impl TimingSection {
    pub fn budget(&self) -> Result<TimingBudget> {
        let base = TimingBudget::default();
        let b = TimingBudget {
            t_set_config: self.t_set_config.unwrap_or(base.t_set_config),
            t_measure_point: self.t_measure_point.unwrap_or(base.t_measure_point),
            t_fit: self.t_fit.unwrap_or(base.t_fit),
            t_quantum_window: self.t_quantum_window.unwrap_or(base.t_quantum_window),
            points_per_fringe: self.points_per_fringe.unwrap_or(base.points_per_fringe),
        };
        b.validate()?;
        Ok(b)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographySection {
    pub events_per_setting: f64,
    /// Poisson counts when true, exact expected counts otherwise.
    pub shot_noise: bool,
    pub mc_reps: usize,
    pub target: CostTarget,
    pub eta_a: Option<Vec<f64>>,
    pub eta_b: Option<Vec<f64>>,
    pub max_iter: Option<usize>,
    pub tolerance: Option<f64>,
}

impl Default for TomographySection {
    fn default() -> Self {
        TomographySection {
            events_per_setting: 1e4,
            shot_noise: true,
            mc_reps: 0,
            target: CostTarget::LinearStatistics,
            eta_a: None,
            eta_b: None,
            max_iter: None,
            tolerance: None,
        }
    }
}

impl TomographySection {
    pub fn efficiencies(&self, d: usize) -> Result<Vec<DetectorEfficiencies>> {
        let one = |e: &Option<Vec<f64>>| -> Result<DetectorEfficiencies> {
            match e {
                Some(v) if v.len() != d => bail!("efficiency list has {} entries, expected {d}", v.len()),
                Some(v) => Ok(DetectorEfficiencies::new(v.clone())?),
                None => Ok(DetectorEfficiencies::ideal(d)),
            }
        };
        Ok(vec![one(&self.eta_a)?, one(&self.eta_b)?])
    }

    pub fn options(&self) -> EstimateOptions {
        let base = EstimateOptions::default();
        EstimateOptions {
            max_iter: self.max_iter.unwrap_or(base.max_iter),
            tolerance: self.tolerance.unwrap_or(base.tolerance),
            target: self.target,
            ..base
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSection {
    pub d_list: Vec<usize>,
    pub eps_list: Vec<f64>,
    pub trials: usize,
}

impl Default for ScalingSection {
    fn default() -> Self {
        ScalingSection { d_list: (2..=8).collect(), eps_list: vec![0.0, 0.05, 0.1, 0.2, 0.3], trials: 10_000 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FringeSection {
    pub spacing: f64,
    /// Fit without priors, starting from this drive gain.
    pub unconstrained_nu: Option<f64>,
}

impl Default for FringeSection {
    fn default() -> Self {
        FringeSection { spacing: StabiliserSettings::default().spacing, unconstrained_nu: None }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).context("invalid config")?;
        if cfg.scenario.d < 2 {
            bail!("scenario.d must be at least 2");
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn stabiliser_settings(&self) -> StabiliserSettings {
        StabiliserSettings { spacing: self.fringe.spacing, ..StabiliserSettings::default() }
    }
}
