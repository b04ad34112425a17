//! Photon-pair sources: coherently pumped ring sources preparing a
//! Bell-like qudit state, the pump-power brightness model and the
//! reversed Hong-Ou-Mandel (RHOM) fringe used to measure indistinguishability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_real, C64, ZERO};
use crate::state::BipartiteState;

/// Per-source amplitude and phase of the prepared superposition, with the
/// pairwise indistinguishability of the sources.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub magnitudes: Vec<f64>,
    pub phases: Vec<f64>,
    /// Symmetric with unit diagonal. `None` means perfectly indistinguishable.
    #[serde(default)]
    pub indistinguishability: Option<Vec<Vec<f64>>>,
}

impl SourceConfig {
    /// Equal magnitudes and zero phases: the maximally entangled state.
    pub fn balanced(d: usize) -> Self {
        SourceConfig { magnitudes: vec![1.0 / (d as f64).sqrt(); d], phases: vec![0.0; d], indistinguishability: None }
    }

    pub fn d(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.magnitudes.len();
        if d < 2 {
            return Err(Error::InvalidArgument("source needs at least two modes".into()));
        }
        if self.phases.len() != d {
            return Err(Error::Dimension(format!("{} magnitudes but {} phases", d, self.phases.len())));
        }
        if self.magnitudes.iter().chain(&self.phases).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if self.magnitudes.iter().any(|&m| m < 0.0) {
            return Err(Error::InvalidArgument("magnitudes must be non-negative".into()));
        }
        let n2: f64 = self.magnitudes.iter().map(|m| m * m).sum();
        if (n2 - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(n2));
        }
        if let Some(x) = &self.indistinguishability {
            if x.len() != d || x.iter().any(|row| row.len() != d) {
                return Err(Error::Dimension("indistinguishability matrix must be d x d".into()));
            }
            for j in 0..d {
                if (x[j][j] - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidArgument("indistinguishability diagonal must be 1".into()));
                }
                for k in 0..d {
                    if !(0.0..=1.0).contains(&x[j][k]) || (x[j][k] - x[k][j]).abs() > 1e-12 {
                        return Err(Error::InvalidArgument("indistinguishability must be symmetric in [0, 1]".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Σ_n |α_n| e^{iφ_n} |n⟩_idler |n⟩_signal.
pub fn prepare_bell_like(config: &SourceConfig) -> Result<BipartiteState> {
    config.validate()?;
    let d = config.d();
    let mut amps = vec![ZERO; d * d];
    for n in 0..d {
        amps[n * d + n] = C64::from_polar(config.magnitudes[n], config.phases[n]);
    }
    BipartiteState::new(d, amps)
}

/// Fitted parameters of the pump-power brightness model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BrightnessFit {
    pub eta_s: f64,
    pub eta_i: f64,
    /// Pairs per (mW² · s).
    pub gamma_eff: f64,
    /// Linear noise, per (mW · s).
    pub beta_s: f64,
    pub beta_i: f64,
    /// Background rates per second.
    pub b_s: f64,
    pub b_i: f64,
    pub b_si: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairRates {
    pub singles_signal: f64,
    pub singles_idler: f64,
    pub coincidences: f64,
}

/// Singles and coincidence rates at pump power `power_mw`.
pub fn pair_rates(power_mw: f64, fit: &BrightnessFit) -> PairRates {
    let p2 = power_mw * power_mw;
    PairRates {
        singles_signal: fit.eta_s * fit.gamma_eff * p2 + fit.beta_s * power_mw + fit.b_s,
        singles_idler: fit.eta_i * fit.gamma_eff * p2 + fit.beta_i * power_mw + fit.b_i,
        coincidences: fit.eta_s * fit.eta_i * fit.gamma_eff * p2 + fit.b_si,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BrightnessSample {
    pub power_mw: f64,
    pub singles_signal: f64,
    pub singles_idler: f64,
    pub coincidences: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BrightnessEstimate {
    pub fit: BrightnessFit,
    /// 2-norm of the stacked residuals of all three quadratic fits.
    pub residual_norm: f64,
}

/// Least-squares fit of the three brightness quadratics.
///
/// Singles are fitted with `a P² + b P + c`, coincidences with `a P² + c`;
/// the quadratic coefficients then give γ_eff = a_s a_i / a_c,
/// η_s = a_c / a_i and η_i = a_c / a_s.
pub fn fit_brightness(samples: &[BrightnessSample]) -> Result<BrightnessEstimate> {
    let mut powers: Vec<f64> = samples.iter().map(|s| s.power_mw).collect();
    powers.sort_by(f64::total_cmp);
    powers.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    if powers.len() < 4 {
        return Err(Error::RankDeficient(format!("need at least 4 distinct pump powers, got {}", powers.len())));
    }
    let full = |s: &BrightnessSample| vec![s.power_mw * s.power_mw, s.power_mw, 1.0];
    let no_linear = |s: &BrightnessSample| vec![s.power_mw * s.power_mw, 1.0];

    let (cs, rs) = least_squares(samples.iter().map(|s| (full(s), s.singles_signal)))?;
    let (ci, ri) = least_squares(samples.iter().map(|s| (full(s), s.singles_idler)))?;
    let (cc, rc) = least_squares(samples.iter().map(|s| (no_linear(s), s.coincidences)))?;

    let (a_s, a_i, a_c) = (cs[0], ci[0], cc[0]);
    let (eta_s, eta_i, gamma_eff) = if a_c.abs() > 0.0 && a_s.abs() > 0.0 && a_i.abs() > 0.0 {
        (a_c / a_i, a_c / a_s, a_s * a_i / a_c)
    } else {
        (0.0, 0.0, 0.0)
    };
    let fit = BrightnessFit {
        eta_s,
        eta_i,
        gamma_eff,
        beta_s: cs[1],
        beta_i: ci[1],
        b_s: cs[2],
        b_i: ci[2],
        b_si: cc[1],
    };
    Ok(BrightnessEstimate { fit, residual_norm: (rs * rs + ri * ri + rc * rc).sqrt() })
}

/// Least squares on relative residuals (rows weighted by 1/|y|) via
/// normal equations with column scaling. Returns (coefficients, unweighted
/// residual 2-norm).
fn least_squares(rows: impl Iterator<Item = (Vec<f64>, f64)>) -> Result<(Vec<f64>, f64)> {
    let raw: Vec<(Vec<f64>, f64)> = rows.collect();
    let rows: Vec<(Vec<f64>, f64)> = raw
        .iter()
        .map(|(x, y)| {
            let w = if y.abs() > 0.0 { 1.0 / y.abs() } else { 1.0 };
            (x.iter().map(|v| v * w).collect(), y * w)
        })
        .collect();
    let k = rows[0].0.len();
    let scale: Vec<f64> = (0..k)
        .map(|j| rows.iter().map(|(x, _)| x[j] * x[j]).sum::<f64>().sqrt().max(f64::MIN_POSITIVE))
        .collect();
    let mut ata = vec![vec![0.0; k]; k];
    let mut atb = vec![0.0; k];
    for (x, y) in &rows {
        for i in 0..k {
            let xi = x[i] / scale[i];
            atb[i] += xi * y;
            for j in 0..k {
                ata[i][j] += xi * x[j] / scale[j];
            }
        }
    }
    let sol = solve_real(ata, atb).ok_or_else(|| Error::RankDeficient("singular normal equations".into()))?;
    let coef: Vec<f64> = sol.iter().zip(&scale).map(|(c, s)| c / s).collect();
    let resid = raw
        .iter()
        .map(|(x, y)| {
            let pred: f64 = x.iter().zip(&coef).map(|(a, b)| a * b).sum();
            (pred - y).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    Ok((coef, resid))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RhomPoint {
    /// Coincidence probability, normalised so the fringe peak is 1.
    pub coincidence: f64,
    /// Classical output power at the same port, peak 1.
    pub classical: f64,
}

/// RHOM fringe at source phase `phi` for indistinguishability `x`.
///
/// Indistinguishable pairs give the sin²φ coincidence fringe; the
/// distinguishable fraction adds a flat (1−x)/2 floor, so the visibility
/// of the fringe equals `x`. Classical light through the same circuit sees
/// cos²(φ/2), half the fringe frequency.
pub fn rhom_fringe(phi: f64, x: f64) -> Result<RhomPoint> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!("indistinguishability {x} outside [0, 1]")));
    }
    let raw = x * phi.sin().powi(2) + (1.0 - x) / 2.0;
    let peak = (1.0 + x) / 2.0;
    Ok(RhomPoint { coincidence: raw / peak, classical: (phi / 2.0).cos().powi(2) })
}

/// Output Fock amplitudes (|2,0⟩, |1,1⟩, |0,2⟩) of the normalised two-source
/// input (|2,0⟩ + e^{2iφ}|0,2⟩)/√2 after a 50:50 beamsplitter.
pub fn rhom_output_amplitudes(phi: f64) -> [C64; 3] {
    // Input (1/2)(a0†² + e^{2iφ} a1†²)|00⟩, with a†²|0⟩ = √2|2⟩.
    // Polynomial coefficients over (a0†², a0†a1†, a1†²).
    let e = C64::from_polar(1.0, 2.0 * phi);
    let input = [C64::new(0.5, 0.0), ZERO, e * 0.5];
    // a0† → (a0† + a1†)/√2, a1† → (a0† − a1†)/√2
    let a0sq = [0.5, 1.0, 0.5];
    let a1sq = [0.5, -1.0, 0.5];
    let mut out = [ZERO; 3];
    for k in 0..3 {
        out[k] = input[0] * a0sq[k] + input[2] * a1sq[k];
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    [out[0] * sqrt2, out[1], out[2] * sqrt2]
}

/// (I_max − I_min)/(I_max + I_min).
pub fn visibility(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no fringe samples".into()));
    }
    if samples.iter().any(|&s| s < 0.0 || !s.is_finite()) {
        return Err(Error::InvalidArgument("fringe samples must be finite and non-negative".into()));
    }
    let max = samples.iter().copied().fold(f64::MIN, f64::max);
    let min = samples.iter().copied().fold(f64::MAX, f64::min);
    if max + min <= 0.0 {
        return Err(Error::InvalidArgument("visibility undefined for an all-zero fringe".into()));
    }
    Ok((max - min) / (max + min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{entanglement_entropy, fidelity_pure};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    #[test]
    fn balanced_source_gives_max_entangled_state() {
        let psi = prepare_bell_like(&SourceConfig::balanced(4)).unwrap();
        let target = BipartiteState::max_entangled(4);
        assert!(psi.amplitudes().iter().zip(target.amplitudes()).all(|(a, b)| (a - b).norm() < 1e-15));
        for n in 0..4 {
            for m in 0..4 {
                if n != m {
                    assert_eq!(psi.amplitude(n, m), ZERO);
                }
            }
        }
    }

    #[test]
    fn single_source_is_product_state() {
        let cfg = SourceConfig { magnitudes: vec![1.0, 0.0], phases: vec![0.0, 0.0], indistinguishability: None };
        let psi = prepare_bell_like(&cfg).unwrap();
        assert!(entanglement_entropy(&psi.to_density(), 2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn alternating_phases_are_orthogonal_to_target() {
        let mut cfg = SourceConfig::balanced(4);
        cfg.phases = vec![0.0, PI, 0.0, PI];
        let psi = prepare_bell_like(&cfg).unwrap();
        // oracle: inner product Σ_n conj(1/2)·(1/2)e^{iφ_n}
        let overlap: C64 = cfg.phases.iter().map(|&p| C64::from_polar(0.25, p)).sum();
        assert!(overlap.norm() < 1e-15);
        let f = fidelity_pure(BipartiteState::max_entangled(4).as_pure(), &psi.to_density()).unwrap();
        assert!(f < 1e-12);
    }

    #[test]
    fn global_phase_shift_is_invisible() {
        let mut cfg = SourceConfig::balanced(3);
        cfg.phases = vec![0.3, -1.1, 2.0];
        let a = prepare_bell_like(&cfg).unwrap();
        cfg.phases.iter_mut().for_each(|p| *p += 0.77);
        let b = prepare_bell_like(&cfg).unwrap();
        let f = fidelity_pure(a.as_pure(), &b.to_density()).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unnormalised_magnitudes_rejected() {
        let cfg = SourceConfig { magnitudes: vec![1.0, 1.0], phases: vec![0.0, 0.0], indistinguishability: None };
        assert!(matches!(prepare_bell_like(&cfg), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn pair_rates_examples() {
        let fit = BrightnessFit { b_s: 3.0, b_i: 5.0, b_si: 0.5, eta_s: 0.2, eta_i: 0.3, gamma_eff: 10.0, ..Default::default() };
        let r = pair_rates(0.0, &fit);
        assert_eq!((r.singles_signal, r.singles_idler, r.coincidences), (3.0, 5.0, 0.5));
        let unit = BrightnessFit { eta_s: 1.0, eta_i: 1.0, gamma_eff: 1.0, ..Default::default() };
        let r = pair_rates(2.0, &unit);
        assert_eq!((r.singles_signal, r.singles_idler, r.coincidences), (4.0, 4.0, 4.0));
    }

    fn truth() -> BrightnessFit {
        BrightnessFit {
            eta_s: 0.12,
            eta_i: 0.09,
            gamma_eff: 2.5e5,
            beta_s: 400.0,
            beta_i: 650.0,
            b_s: 1200.0,
            b_i: 900.0,
            b_si: 15.0,
        }
    }

    fn samples_from(fit: &BrightnessFit, powers: &[f64]) -> Vec<BrightnessSample> {
        powers
            .iter()
            .map(|&p| {
                let r = pair_rates(p, fit);
                BrightnessSample { power_mw: p, singles_signal: r.singles_signal, singles_idler: r.singles_idler, coincidences: r.coincidences }
            })
            .collect()
    }

    #[test]
    fn noiseless_brightness_round_trip() {
        let t = truth();
        let est = fit_brightness(&samples_from(&t, &[0.5, 1.0, 1.5, 2.0, 3.0])).unwrap();
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        let f = est.fit;
        for (got, want) in [
            (f.eta_s, t.eta_s),
            (f.eta_i, t.eta_i),
            (f.gamma_eff, t.gamma_eff),
            (f.beta_s, t.beta_s),
            (f.beta_i, t.beta_i),
            (f.b_s, t.b_s),
            (f.b_i, t.b_i),
            (f.b_si, t.b_si),
        ] {
            assert!(rel(got, want) < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn noisy_brightness_recovers_gamma() {
        let t = truth();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let powers: Vec<f64> = (1..=12).map(|k| 0.25 * k as f64).collect();
        let mut errors = Vec::new();
        for _ in 0..200 {
            let noisy: Vec<BrightnessSample> = samples_from(&t, &powers)
                .into_iter()
                .map(|s| BrightnessSample {
                    power_mw: s.power_mw,
                    singles_signal: s.singles_signal * (1.0 + noise.sample(&mut rng)),
                    singles_idler: s.singles_idler * (1.0 + noise.sample(&mut rng)),
                    coincidences: s.coincidences * (1.0 + noise.sample(&mut rng)),
                })
                .collect();
            let est = fit_brightness(&noisy).unwrap();
            errors.push(((est.fit.gamma_eff - t.gamma_eff) / t.gamma_eff).abs());
        }
        let worst = errors.iter().cloned().fold(0.0, f64::max);
        assert!(worst < 0.05, "worst relative γ error {worst}");
    }

    #[test]
    fn zero_counts_give_zero_parameters() {
        let zero = samples_from(&BrightnessFit::default(), &[1.0, 2.0, 3.0, 4.0]);
        let est = fit_brightness(&zero).unwrap();
        assert_eq!(est.fit, BrightnessFit::default());
    }

    #[test]
    fn too_few_powers_is_rank_deficient() {
        let s = samples_from(&truth(), &[1.0, 1.0, 2.0, 3.0]);
        assert!(matches!(fit_brightness(&s), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn rhom_fringe_shape() {
        assert!(rhom_fringe(0.0, 1.0).unwrap().coincidence.abs() < 1e-15);
        assert!((rhom_fringe(PI / 2.0, 1.0).unwrap().coincidence - 1.0).abs() < 1e-15);
        for k in -3..=3 {
            assert!(rhom_fringe(k as f64 * PI, 1.0).unwrap().coincidence.abs() < 1e-12);
        }
        // quantum period π, classical period 2π
        for &phi in &[0.1, 0.7, 1.9] {
            let a = rhom_fringe(phi, 0.8).unwrap();
            let b = rhom_fringe(phi + PI, 0.8).unwrap();
            assert!((a.coincidence - b.coincidence).abs() < 1e-12);
            assert!((a.classical - b.classical).abs() > 1e-3);
            let c = rhom_fringe(phi + 2.0 * PI, 0.8).unwrap();
            assert!((a.classical - c.classical).abs() < 1e-12);
        }
        assert!(rhom_fringe(0.0, 1.2).is_err());
    }

    #[test]
    fn fock_expansion_matches_closed_form() {
        for k in 0..50 {
            let phi = -PI + k as f64 * 0.13;
            let amps = rhom_output_amplitudes(phi);
            let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
            assert!((amps[1].norm_sqr() - phi.sin().powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn visibility_examples() {
        let dense: Vec<f64> = (0..2000).map(|k| k as f64 * PI / 1000.0).collect();
        for &x in &[1.0, 0.0, 0.9, 0.37] {
            let fringe: Vec<f64> = dense.iter().map(|&p| rhom_fringe(p, x).unwrap().coincidence).collect();
            let v = visibility(&fringe).unwrap();
            assert!((v - x).abs() < 1e-6, "x={x} v={v}");
        }
        assert!(visibility(&[0.0, 0.0]).is_err());
        assert!(visibility(&[]).is_err());
    }
}
