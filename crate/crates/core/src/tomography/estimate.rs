//! Physical state estimation: ρ = T†T / Tr(T†T) with T lower triangular,
//! fitted so the projector statistics of ρ match the reference statistics.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::bases::MubSet;
use crate::channel::DetectorEfficiencies;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, eig_hermitian, CMatrix, C64};
use crate::state::{DensityMatrix, Physicality};

use super::counts::{outcome_expectations, CountsRecord};
use super::linear::joint_probabilities;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostTarget {
    /// Statistics Tr(Γ_p ρ_lin) of the linear reconstruction.
    #[default]
    LinearStatistics,
    /// Measured frequencies directly.
    MeasuredFrequencies,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub max_iter: usize,
    /// Stop once an accepted step lowers the cost by less than this.
    pub tolerance: f64,
    /// Added to the clipped starting point before factorisation.
    pub regularisation: f64,
    pub target: CostTarget,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions { max_iter: 5000, tolerance: 1e-12, regularisation: 1e-10, target: CostTarget::LinearStatistics }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalEstimate {
    pub rho: DensityMatrix,
    pub cost: f64,
    pub iterations: usize,
    /// False if the iteration limit was hit first.
    pub converged: bool,
    /// Cost after every accepted step, starting with the initial point.
    pub cost_history: Vec<f64>,
}

/// Applies the frame operator of the complete local MUB measurement,
/// X ↦ Σ_p Tr(Γ_p X) Γ_p, which factorises as X ↦ X + Tr(X)·I on each qudit.
pub fn frame_operator(x: &CMatrix, d: usize, parties: usize) -> CMatrix {
    let mut cur = x.clone();
    let dim = x.rows();
    for k in 0..parties {
        let stride = d.pow((parties - k - 1) as u32);
        let digit = |i: usize| (i / stride) % d;
        let mut next = cur.clone();
        for r in 0..dim {
            for c in 0..dim {
                if digit(r) != digit(c) {
                    continue;
                }
                let (r0, c0) = (r - digit(r) * stride, c - digit(c) * stride);
                let mut s = C64::new(0.0, 0.0);
                for l in 0..d {
                    s += cur[(r0 + l * stride, c0 + l * stride)];
                }
                next[(r, c)] += s;
            }
        }
        cur = next;
    }
    cur
}

/// Σ_p (Tr(Γ_p ρ) − target_p)² evaluated projector by projector, with
/// `target` ordered as in the joint probability table.
pub fn statistics_cost(rho: &DensityMatrix, target: &[f64], bases: &MubSet, parties: usize) -> Result<f64> {
    let d = bases.d;
    let np = d * (d + 1);
    let mut cost = 0.0;
    for settings in super::counts::all_settings(d, parties) {
        let probs = outcome_expectations(rho, bases, &settings)?;
        for (outcome, p) in probs.iter().enumerate() {
            let mut idx = 0;
            let mut rem = outcome;
            let mut ns = vec![0; parties];
            for k in (0..parties).rev() {
                ns[k] = rem % d;
                rem /= d;
            }
            for (m, n) in settings.iter().zip(&ns) {
                idx = idx * np + n + m * d;
            }
            cost += (p - target[idx]).powi(2);
        }
    }
    Ok(cost)
}

struct Problem {
    dim: usize,
    d: usize,
    parties: usize,
    reference: CMatrix,
    offset: f64,
}

impl Problem {
    fn n_params(&self) -> usize {
        self.dim * self.dim
    }

    fn to_t(&self, x: &[f64]) -> CMatrix {
        let mut t = CMatrix::zeros(self.dim, self.dim);
        let mut k = self.dim;
        for i in 0..self.dim {
            t[(i, i)] = C64::new(x[i], 0.0);
            for j in 0..i {
                t[(i, j)] = C64::new(x[k], x[k + 1]);
                k += 2;
            }
        }
        t
    }

    fn from_t(&self, t: &CMatrix) -> Vec<f64> {
        let mut x = vec![0.0; self.n_params()];
        let mut k = self.dim;
        for i in 0..self.dim {
            x[i] = t[(i, i)].re;
            for j in 0..i {
                x[k] = t[(i, j)].re;
                x[k + 1] = t[(i, j)].im;
                k += 2;
            }
        }
        x
    }

    fn rho(&self, t: &CMatrix) -> (CMatrix, f64) {
        let tt = t.adjoint().matmul(t);
        let tr = tt.trace().re;
        (tt.scale_real(1.0 / tr), tr)
    }

    fn cost(&self, x: &[f64]) -> f64 {
        let (rho, tr) = self.rho(&self.to_t(x));
        if !(tr > 0.0) {
            return f64::INFINITY;
        }
        let delta = &rho - &self.reference;
        let f = frame_operator(&delta, self.d, self.parties);
        delta.trace_product(&f).re.max(0.0) + self.offset
    }

    fn cost_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let t = self.to_t(x);
        let (rho, tr) = self.rho(&t);
        let delta = &rho - &self.reference;
        let f = frame_operator(&delta, self.d, self.parties);
        let cost = delta.trace_product(&f).re.max(0.0) + self.offset;
        // dL = Tr(G dρ) with G = 2F(Δ); chain rule through ρ = T†T/t
        let g = f.scale_real(2.0);
        let gr = g.trace_product(&rho).re;
        let m = (&g - &CMatrix::identity(self.dim).scale_real(gr)).scale_real(1.0 / tr);
        let mt = m.matmul(&t.adjoint());
        let mut grad = vec![0.0; self.n_params()];
        let mut k = self.dim;
        for i in 0..self.dim {
            grad[i] = 2.0 * mt[(i, i)].re;
            for j in 0..i {
                grad[k] = 2.0 * mt[(j, i)].re;
                grad[k + 1] = -2.0 * mt[(j, i)].im;
                k += 2;
            }
        }
        (cost, grad)
    }
}

/// Starting point: eigenvalues clipped at 0, regularised, renormalised and
/// factorised as T†T with T lower triangular.
fn initial_t(rho_lin: &CMatrix, reg: f64) -> Result<CMatrix> {
    let dim = rho_lin.rows();
    let clipped = eig_hermitian(rho_lin)?.reconstruct_with(|l| l.max(0.0));
    let start = &clipped + &CMatrix::identity(dim).scale_real(reg);
    let start = start.scale_real(1.0 / start.trace().re);
    // reversing the index order turns a Cholesky factor into the required form
    let flip = |m: &CMatrix| CMatrix::from_fn(dim, dim, |i, j| m[(dim - 1 - i, dim - 1 - j)]);
    let l = cholesky(&flip(&start))?;
    Ok(flip(&l.adjoint()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits a physical state to the statistics of `rho_lin`.
pub fn physical_estimate(rho_lin: &DensityMatrix, d: usize, parties: usize, opts: &EstimateOptions) -> Result<PhysicalEstimate> {
    minimise(rho_lin, d, parties, 0.0, opts)
}

/// Physical estimate from measured records, using `opts.target` to pick
/// the reference statistics.
///
/// The measured-frequency cost equals the linear-statistics cost plus the
/// constant misfit of ρ_lin.
pub fn physical_estimate_from_records(
    records: &[CountsRecord],
    eta: &[DetectorEfficiencies],
    bases: &MubSet,
    parties: usize,
    rho_lin: &DensityMatrix,
    opts: &EstimateOptions,
) -> Result<PhysicalEstimate> {
    let offset = match opts.target {
        CostTarget::LinearStatistics => 0.0,
        CostTarget::MeasuredFrequencies => {
            let freqs = joint_probabilities(records, eta, bases.d, parties)?;
            statistics_cost(rho_lin, &freqs, bases, parties)?
        }
    };
    minimise(rho_lin, bases.d, parties, offset, opts)
}

fn minimise(rho_lin: &DensityMatrix, d: usize, parties: usize, offset: f64, opts: &EstimateOptions) -> Result<PhysicalEstimate> {
    let dim = rho_lin.dim();
    if d.pow(parties as u32) != dim {
        return Err(Error::Dimension(format!("{dim}x{dim} state is not {parties} qudits of d={d}")));
    }
    let problem = Problem { dim, d, parties, reference: rho_lin.matrix().clone(), offset };
    let mut x = problem.from_t(&initial_t(rho_lin.matrix(), opts.regularisation)?);
    let (mut f, mut g) = problem.cost_and_grad(&x);
    let mut history = vec![f];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let gnorm = dot(&g, &g).sqrt();
        if gnorm == 0.0 || !gnorm.is_finite() {
            converged = true;
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = memory.back().map(|(s, y, _)| dot(s, y) / dot(y, y)).unwrap_or(1.0 / gnorm);
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            memory.clear();
            dir = g.iter().map(|v| -v / gnorm).collect();
            slope = dot(&g, &dir);
        }
        // backtracking Armijo line search
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            let ft = problem.cost(&trial);
            if ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, _)) = accepted else {
            converged = true;
            break;
        };
        let (f_new, g_new) = problem.cost_and_grad(&x_new);
        let improvement = f - f_new;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            memory.push_back((s, y, 1.0 / sy));
            if memory.len() > 10 {
                memory.pop_front();
            }
        }
        x = x_new;
        f = f_new;
        g = g_new;
        history.push(f);
        if improvement < opts.tolerance {
            converged = true;
            break;
        }
    }
    let (rho, _) = problem.rho(&problem.to_t(&x));
    let rho = DensityMatrix::new(rho.hermitian_part(), Physicality::Physical)?;
    Ok(PhysicalEstimate { rho, cost: f, iterations, converged, cost_history: history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::mub_set;
    use crate::state::{fidelity, BipartiteState};
    use crate::tomography::counts::{simulate_tomography, Shots};
    use crate::tomography::linear::linear_reconstruct;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(rng: &mut ChaCha8Rng, dim: usize, rank: usize) -> DensityMatrix {
        let g = CMatrix::from_fn(dim, rank, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        DensityMatrix::from_unnormalized(g.matmul(&g.adjoint()), Physicality::Physical).unwrap()
    }

    #[test]
    fn frame_operator_matches_projector_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for (d, parties) in [(2usize, 1usize), (3, 1), (2, 2), (3, 2)] {
            let bases = mub_set(d).unwrap();
            let dim = d.pow(parties as u32);
            let x = CMatrix::from_fn(dim, dim, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).hermitian_part();
            let mut direct = CMatrix::zeros(dim, dim);
            for settings in crate::tomography::counts::all_settings(d, parties) {
                let u = crate::tomography::counts::setting_unitary(&bases, &settings);
                for o in 0..dim {
                    let v: Vec<C64> = u.row(o).iter().map(|z| z.conj()).collect();
                    let proj = CMatrix::outer(&v, &v);
                    direct = &direct + &proj.scale(proj.trace_product(&x));
                }
            }
            assert!(direct.max_abs_diff(&frame_operator(&x, d, parties)) < 1e-10);
        }
    }

    #[test]
    fn fast_cost_equals_projector_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let bases = mub_set(3).unwrap();
        let reference = random_density(&mut rng, 9, 9);
        let eta = vec![DetectorEfficiencies::ideal(3); 2];
        let recs = simulate_tomography(&reference, &bases, 2, 1.0, &eta, &mut Shots::Exact).unwrap();
        let target = joint_probabilities(&recs, &eta, 3, 2).unwrap();
        let other = random_density(&mut rng, 9, 2);
        let delta = &other.matrix().clone() - reference.matrix();
        let fast = delta.trace_product(&frame_operator(&delta, 3, 2)).re;
        let direct = statistics_cost(&other, &target, &bases, 2).unwrap();
        assert!((fast - direct).abs() < 1e-12, "{fast} vs {direct}");
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let reference = random_density(&mut rng, 4, 4);
        let p = Problem { dim: 4, d: 2, parties: 2, reference: reference.matrix().clone(), offset: 0.0 };
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, g) = p.cost_and_grad(&x);
        for k in 0..16 {
            let h = 1e-6;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let num = (p.cost(&xp) - p.cost(&xm)) / (2.0 * h);
            assert!((num - g[k]).abs() < 1e-6, "param {k}: {num} vs {}", g[k]);
        }
    }

    #[test]
    fn physical_input_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for rank in [1usize, 3, 16] {
            let rho = random_density(&mut rng, 16, rank);
            let lin = DensityMatrix::new(rho.matrix().clone(), Physicality::LinearOnly).unwrap();
            let est = physical_estimate(&lin, 4, 2, &EstimateOptions::default()).unwrap();
            assert!(est.rho.matrix().max_abs_diff(rho.matrix()) < 1e-6);
            assert!(est.cost <= 1e-10);
        }
    }

    #[test]
    fn perturbed_state_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        let psi = BipartiteState::max_entangled(2).to_density();
        let other = BipartiteState::product(2, 0, 1).to_density();
        let mix = &psi.matrix().scale_real(0.97) + &other.matrix().scale_real(0.03);
        let rho = DensityMatrix::new(mix, Physicality::Physical).unwrap();
        // rank 2, so a small traceless shift makes an eigenvalue negative
        let e = eig_hermitian(rho.matrix()).unwrap();
        let noise = CMatrix::from_fn(4, 4, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).hermitian_part();
        let noise = &noise - &CMatrix::identity(4).scale_real(noise.trace().re / 4.0);
        let noise = noise.scale_real(1e-4 / noise.frobenius_norm());
        let (lo, hi) = (e.vector(0), e.vector(3));
        let shift = (&CMatrix::outer(&hi, &hi) - &CMatrix::outer(&lo, &lo)).scale_real(5e-4);
        let lin = &(&rho.matrix().clone() + &noise) + &shift;
        let lin = DensityMatrix::new(lin.hermitian_part(), Physicality::LinearOnly).unwrap();
        assert!(lin.min_eigenvalue() < -1e-4);
        let est = physical_estimate(&lin, 2, 2, &EstimateOptions::default()).unwrap();
        assert!(est.rho.min_eigenvalue() >= -1e-9);
        assert!(fidelity(&est.rho, &rho).unwrap() >= 0.999);
    }

    #[test]
    fn cost_never_increases() {
        let bases = mub_set(4).unwrap();
        let eta = vec![DetectorEfficiencies::ideal(4); 2];
        let rho = BipartiteState::max_entangled(4).to_density();
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let recs = simulate_tomography(&rho, &bases, 2, 1e5, &eta, &mut Shots::Poisson(&mut rng)).unwrap();
        let lin = linear_reconstruct(&recs, &eta, &bases, 2).unwrap();
        assert!(lin.min_eigenvalue() < 0.0);
        let est = physical_estimate(&lin, 4, 2, &EstimateOptions::default()).unwrap();
        assert!(est.cost_history.iter().all(|c| *c >= 0.0));
        assert!(est.cost_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(est.rho.min_eigenvalue() >= -1e-9);
        let f = crate::state::fidelity_pure(BipartiteState::max_entangled(4).as_pure(), &est.rho).unwrap();
        assert!(f >= 0.99, "fidelity {f}");
    }

    #[test]
    fn frequency_target_has_same_minimiser() {
        let bases = mub_set(2).unwrap();
        let eta = vec![DetectorEfficiencies::ideal(2); 2];
        let rho = BipartiteState::max_entangled(2).to_density();
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        let recs = simulate_tomography(&rho, &bases, 2, 500.0, &eta, &mut Shots::Poisson(&mut rng)).unwrap();
        let lin = linear_reconstruct(&recs, &eta, &bases, 2).unwrap();
        let a = physical_estimate_from_records(&recs, &eta, &bases, 2, &lin, &EstimateOptions::default()).unwrap();
        let opts = EstimateOptions { target: CostTarget::MeasuredFrequencies, ..Default::default() };
        let b = physical_estimate_from_records(&recs, &eta, &bases, 2, &lin, &opts).unwrap();
        assert!(a.rho.matrix().max_abs_diff(b.rho.matrix()) < 1e-4);
        let freqs = joint_probabilities(&recs, &eta, 2, 2).unwrap();
        let direct = statistics_cost(&b.rho, &freqs, &bases, 2).unwrap();
        assert!((direct - b.cost).abs() < 1e-9, "direct {direct} cost {}", b.cost);
    }
}
