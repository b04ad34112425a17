//! Fitting of the interferometric fringe P(E) = P_max cos²(ν(E − E₀)) + P_min
//! from a handful of scan points, with bounds taken from characterised priors.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::channel::add_readout_noise;
use crate::linalg::{solve_real, wrap_phase};
use crate::seed::{rng_for, trial_seed};

/// Drive-to-phase gain of the simulated phase shifters: the fringe is
/// cos²((θ − E₀)/2) when the drive is the applied phase θ itself.
pub const PHASE_DRIVE_NU: f64 = 0.5;

/// Relative rms residual above which a fit is rejected.
const MAX_REL_RESIDUAL: f64 = 0.25;
const GRID_POINTS: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub p_max: f64,
    pub p_min: f64,
    pub nu: f64,
    /// Position E₀ of the fringe maximum, wrapped into one period centred on 0.
    pub e0: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

impl FringeFit {
    /// Fit whose maximum sits at phase −`offset` on a phase drive.
    pub fn from_phase_offset(offset: f64, p_max: f64, p_min: f64) -> Self {
        FringeFit { p_max, p_min, nu: PHASE_DRIVE_NU, e0: wrap_phase(-offset), residual: 0.0 }
    }

    pub fn model(&self, drive: f64) -> f64 {
        fringe_model(drive, self.p_max, self.p_min, self.nu, self.e0)
    }

    /// Relative phase offset Δ implied by the fit, in (−π, π].
    pub fn phase_offset(&self) -> f64 {
        wrap_phase(-2.0 * self.nu * self.e0)
    }
}

pub fn fringe_model(drive: f64, p_max: f64, p_min: f64, nu: f64, e0: f64) -> f64 {
    p_max * (nu * (drive - e0)).cos().powi(2) + p_min
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    pub mean: f64,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPriors {
    pub p_max: Prior,
    pub p_min: Prior,
    pub nu: Prior,
    /// Bound half-widths in units of σ for (P_max, P_min, ν).
    pub multipliers: [f64; 3],
}

impl FitPriors {
    pub fn new(p_max: Prior, p_min: Prior, nu: Prior) -> Result<Self> {
        if [p_max.sigma, p_min.sigma, nu.sigma].iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidArgument("prior widths must be non-negative".into()));
        }
        Ok(FitPriors { p_max, p_min, nu, multipliers: [3.0, 2.0, 2.0] })
    }

    /// No bounds beyond positivity; `nu_guess` seeds the search.
    pub fn unconstrained(nu_guess: f64) -> Self {
        let wide = |m| Prior { mean: m, sigma: f64::INFINITY };
        FitPriors { p_max: wide(1.0), p_min: wide(0.0), nu: wide(nu_guess), multipliers: [3.0, 2.0, 2.0] }
    }

    /// Lower and upper bounds for (P_max, P_min, ν).
    pub fn bounds(&self) -> [(f64, f64); 3] {
        let b = |p: Prior, k: f64, floor: f64| {
            let half = (k * p.sigma).max(1e-9 * p.mean.abs().max(1e-3));
            ((p.mean - half).max(floor), p.mean + half)
        };
        [
            b(self.p_max, self.multipliers[0], 0.0),
            b(self.p_min, self.multipliers[1], 0.0),
            b(self.nu, self.multipliers[2], 1e-6),
        ]
    }
}

/// Bounded Levenberg-Marquardt fit of a fringe scan of (drive, power) pairs.
///
/// Starts from the best point of a grid over E₀ (with P_max, P_min solved
/// linearly at the prior ν), then refines all four parameters with steps
/// projected onto the prior bounds. Constant scans and fits whose rms
/// residual exceeds a quarter of the fitted amplitude are rejected.
pub fn fit_fringe(scan: &[(f64, f64)], priors: &FitPriors) -> Result<FringeFit> {
    if scan.len() < 4 {
        return Err(Error::FitFailed(format!("need at least 4 scan points, got {}", scan.len())));
    }
    if scan.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::NonFinite);
    }
    let ys = scan.iter().map(|p| p.1);
    let (ymin, ymax) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y)));
    let xs = scan.iter().map(|p| p.0);
    let (xmin, xmax) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if xmax - xmin <= 0.0 {
        return Err(Error::FitFailed("scan has no drive span".into()));
    }
    let scale = ymax.abs().max(ymin.abs());
    if ymax - ymin <= 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::FitFailed("degenerate fringe: constant power".into()));
    }

    let bounds = priors.bounds();
    let nu0 = priors.nu.mean.clamp(bounds[2].0, bounds[2].1);
    let period = PI / nu0;
    let mut starts: Vec<([f64; 4], f64)> = (0..GRID_POINTS)
        .map(|k| {
            let e0 = -period / 2.0 + period * k as f64 / GRID_POINTS as f64;
            let (pmax, pmin) = linear_amplitudes(scan, nu0, e0, &bounds);
            let p = [pmax, pmin, nu0, e0];
            (p, cost(scan, &p))
        })
        .collect();
    starts.sort_by(|a, b| a.1.total_cmp(&b.1));

    let mut best: Option<([f64; 4], f64)> = None;
    for (p0, _) in starts.iter().take(3) {
        let (p, c) = levenberg_marquardt(scan, *p0, &bounds);
        if best.map_or(true, |(_, bc)| c < bc) {
            best = Some((p, c));
        }
    }
    let (p, c) = best.expect("at least one start");
    let rms = (c / scan.len() as f64).sqrt();
    if p[0] <= 1e-9 * scale || rms > MAX_REL_RESIDUAL * p[0] {
        return Err(Error::FitFailed(format!("fit did not converge (rms residual {rms:.3e}, amplitude {:.3e})", p[0])));
    }
    let half = PI / (2.0 * p[2]);
    let e0 = wrap_to(p[3], half);
    Ok(FringeFit { p_max: p[0], p_min: p[1], nu: p[2], e0, residual: rms })
}

/// Wraps `x` into (−half, half].
fn wrap_to(x: f64, half: f64) -> f64 {
    wrap_phase(x * PI / half) * half / PI
}

fn cost(scan: &[(f64, f64)], p: &[f64; 4]) -> f64 {
    scan.iter().map(|&(x, y)| (fringe_model(x, p[0], p[1], p[2], p[3]) - y).powi(2)).sum()
}

fn linear_amplitudes(scan: &[(f64, f64)], nu: f64, e0: f64, bounds: &[(f64, f64); 3]) -> (f64, f64) {
    let (mut scc, mut sc, mut n, mut scy, mut sy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in scan {
        let c = (nu * (x - e0)).cos().powi(2);
        scc += c * c;
        sc += c;
        n += 1.0;
        scy += c * y;
        sy += y;
    }
    let det = scc * n - sc * sc;
    let (a, b) = if det.abs() > 1e-12 {
        ((scy * n - sc * sy) / det, (scc * sy - sc * scy) / det)
    } else {
        (bounds[0].0.max(0.0), sy / n)
    };
    (a.clamp(bounds[0].0, bounds[0].1), b.clamp(bounds[1].0, bounds[1].1))
}

fn project(p: &mut [f64; 4], bounds: &[(f64, f64); 3]) {
    for k in 0..3 {
        p[k] = p[k].clamp(bounds[k].0, bounds[k].1);
    }
}

fn levenberg_marquardt(scan: &[(f64, f64)], mut p: [f64; 4], bounds: &[(f64, f64); 3]) -> ([f64; 4], f64) {
    project(&mut p, bounds);
    let mut c = cost(scan, &p);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let mut jtj = vec![vec![0.0; 4]; 4];
        let mut jtr = vec![0.0; 4];
        for &(x, y) in scan {
            let arg = p[2] * (x - p[3]);
            let (s, co) = arg.sin_cos();
            let r = p[0] * co * co + p[1] - y;
            let j = [co * co, 1.0, -2.0 * p[0] * co * s * (x - p[3]), 2.0 * p[0] * co * s * p[2]];
            for a in 0..4 {
                jtr[a] += j[a] * r;
                for b in 0..4 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut m = jtj.clone();
            for a in 0..4 {
                m[a][a] += lambda * jtj[a][a].max(1e-12);
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(step) = solve_real(m, rhs) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2], p[3] + step[3]];
            project(&mut trial, bounds);
            let tc = cost(scan, &trial);
            if tc < c {
                let gain = c - tc;
                p = trial;
                c = tc;
                lambda = (lambda * 0.3).max(1e-12);
                improved = gain > 1e-15 * c.max(1e-300) && gain > 1e-30;
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        if !improved {
            break;
        }
    }
    (p, c)
}

/// Something that can be scanned: returns the measured power at each drive value.
pub trait FringeProbe {
    fn scan(&mut self, drives: &[f64]) -> Vec<f64>;
}

/// Estimates priors from `n_fringes` densely sampled, unconstrained fits.
pub fn characterize_priors<P: FringeProbe + ?Sized>(
    probe: &mut P,
    n_fringes: usize,
    points_per_fringe: usize,
    nu_guess: f64,
) -> Result<FitPriors> {
    if n_fringes < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 fringes to characterise priors, got {n_fringes}")));
    }
    if points_per_fringe < 4 {
        return Err(Error::InvalidArgument("need at least 4 points per fringe".into()));
    }
    let period = PI / nu_guess;
    let drives: Vec<f64> = (0..points_per_fringe).map(|k| -period / 2.0 + period * k as f64 / points_per_fringe as f64).collect();
    let free = FitPriors::unconstrained(nu_guess);
    let mut fits = Vec::with_capacity(n_fringes);
    for _ in 0..n_fringes {
        let powers = probe.scan(&drives);
        let scan: Vec<(f64, f64)> = drives.iter().copied().zip(powers).collect();
        fits.push(fit_fringe(&scan, &free)?);
    }
    let stat = |f: &dyn Fn(&FringeFit) -> f64| {
        let n = fits.len() as f64;
        let mean = fits.iter().map(f).sum::<f64>() / n;
        let var = fits.iter().map(|x| (f(x) - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Prior { mean, sigma: var.sqrt() }
    };
    FitPriors::new(stat(&|f| f.p_max), stat(&|f| f.p_min), stat(&|f| f.nu))
}

/// `n` drive values spaced by `spacing`, starting at `start`.
pub fn scan_drives(start: f64, spacing: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| start + spacing * k as f64).collect()
}

/// Mean |phase error| of four-point fits against drive spacing.
///
/// Each trial draws a random offset and scan start, reads a unit fringe
/// with additive noise of σ `rel_noise` relative to the fringe maximum, and fits with
/// `priors`. A failed fit counts as an error of π/2.
pub fn phase_error_study(spacings: &[f64], rel_noise: f64, trials: usize, seed: u64, priors: &FitPriors) -> Result<Vec<(f64, f64)>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if spacings.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidArgument("drive spacings must be positive".into()));
    }
    Ok(spacings
        .iter()
        .enumerate()
        .map(|(k, &spacing)| {
            let mut rng = rng_for(trial_seed(seed, "fringe-spacing", k as u64), "trials");
            let mut total = 0.0;
            for _ in 0..trials {
                let offset = rng.random_range(-PI..PI);
                let truth = FringeFit::from_phase_offset(offset, 1.0, 0.0);
                let scan: Vec<(f64, f64)> = scan_drives(rng.random_range(-PI..PI), spacing, 4)
                    .into_iter()
                    .map(|x| (x, add_readout_noise(truth.model(x), rel_noise, 1.0, &mut rng)))
                    .collect();
                total += match fit_fringe(&scan, priors) {
                    Ok(f) => wrap_phase(f.phase_offset() - truth.phase_offset()).abs(),
                    Err(_) => PI / 2.0,
                };
            }
            (spacing, total / trials as f64)
        })
        .collect())
}
