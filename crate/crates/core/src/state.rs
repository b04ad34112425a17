//! Pure and mixed quantum states plus the metrics used to judge them.

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, normalize, sqrtm_psd, CMatrix, C64, ZERO};

pub const NORM_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = -1e-9;
/// Eigenvalues at or below this contribute nothing to entropies.
pub const ENTROPY_CUTOFF: f64 = 1e-14;

/// Normalised state vector of a single d-level system (or of a joint
/// system viewed as one).
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: Vec<C64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let n2: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if amplitudes.is_empty() || (n2 - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n2));
        }
        Ok(PureState { amplitudes })
    }

    /// Normalises the input; fails only on the zero vector.
    pub fn normalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        if normalize(&mut amplitudes) == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        Ok(PureState { amplitudes })
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[k] = C64::new(1.0, 0.0);
        PureState { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: CMatrix::outer(&self.amplitudes, &self.amplitudes),
            physicality: Physicality::Physical,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Physicality {
    /// Hermitian, unit trace and positive semidefinite.
    Physical,
    /// Hermitian with unit trace; may have negative eigenvalues.
    LinearOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    physicality: Physicality,
}

impl DensityMatrix {
    /// Validates Hermiticity and unit trace, plus positivity when
    /// `physicality` is [`Physicality::Physical`].
    pub fn new(matrix: CMatrix, physicality: Physicality) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!("density matrix must be square, got {}x{}", matrix.rows(), matrix.cols())));
        }
        if !matrix.is_finite() {
            return Err(Error::NonFinite);
        }
        let herr = matrix.hermiticity_error();
        if herr > crate::linalg::HERMITIAN_TOL {
            return Err(Error::NotHermitian(herr));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::NotPhysical(format!("trace is {tr}")));
        }
        let matrix = matrix.hermitian_part();
        if physicality == Physicality::Physical {
            let min = eig_hermitian(&matrix)?.values[0];
            if min < PSD_TOL {
                return Err(Error::NotPhysical(format!("minimum eigenvalue {min:.3e}")));
            }
        }
        Ok(DensityMatrix { matrix, physicality })
    }

    /// Rescales a Hermitian matrix to unit trace before validating.
    pub fn from_unnormalized(matrix: CMatrix, physicality: Physicality) -> Result<Self> {
        let tr = matrix.trace().re;
        if tr.abs() < f64::MIN_POSITIVE || !tr.is_finite() {
            return Err(Error::NotPhysical(format!("trace is {tr}")));
        }
        Self::new(matrix.scale_real(1.0 / tr), physicality)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            matrix: CMatrix::identity(dim).scale_real(1.0 / dim as f64),
            physicality: Physicality::Physical,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn physicality(&self) -> Physicality {
        self.physicality
    }

    pub fn is_physical(&self) -> bool {
        self.physicality == Physicality::Physical
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eig_hermitian(&self.matrix).map(|e| e.values[0]).unwrap_or(f64::NAN)
    }

    pub fn purity(&self) -> f64 {
        self.matrix.trace_product(&self.matrix).re
    }

    /// Tr(ρ M).
    pub fn expectation(&self, m: &CMatrix) -> C64 {
        self.matrix.trace_product(m)
    }
}

/// Pure two-qudit state with amplitudes indexed `(n_idler, n_signal)`,
/// flattened as `n_idler * d + n_signal`.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteState {
    d: usize,
    state: PureState,
}

impl BipartiteState {
    pub fn new(d: usize, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != d * d {
            return Err(Error::Dimension(format!("expected {} amplitudes for d={d}, got {}", d * d, amplitudes.len())));
        }
        Ok(BipartiteState { d, state: PureState::new(amplitudes)? })
    }

    /// (1/√d) Σ_n |n⟩|n⟩.
    pub fn max_entangled(d: usize) -> Self {
        let a = 1.0 / (d as f64).sqrt();
        let mut amps = vec![ZERO; d * d];
        for n in 0..d {
            amps[n * d + n] = C64::new(a, 0.0);
        }
        BipartiteState { d, state: PureState { amplitudes: amps } }
    }

    pub fn product(d: usize, idler: usize, signal: usize) -> Self {
        BipartiteState { d, state: PureState::basis(d * d, idler * d + signal) }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn amplitude(&self, n_idler: usize, n_signal: usize) -> C64 {
        self.state.amplitudes[n_idler * self.d + n_signal]
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.state.amplitudes()
    }

    pub fn as_pure(&self) -> &PureState {
        &self.state
    }

    pub fn to_density(&self) -> DensityMatrix {
        self.state.to_density()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Keep {
    First,
    Second,
}

/// Reduced state of one qudit of a `d × d` bipartite density matrix.
pub fn partial_trace(rho: &DensityMatrix, d: usize, keep: Keep) -> Result<DensityMatrix> {
    let big = rho.dim();
    if d == 0 || d * d != big {
        return Err(Error::Dimension(format!("a {big}x{big} matrix is not a two-qudit state of local dimension {d}")));
    }
    let m = rho.matrix();
    let reduced = CMatrix::from_fn(d, d, |i, k| {
        (0..d)
            .map(|j| match keep {
                Keep::First => m[(i * d + j, k * d + j)],
                Keep::Second => m[(j * d + i, j * d + k)],
            })
            .sum()
    });
    Ok(DensityMatrix { matrix: reduced, physicality: rho.physicality() })
}

/// Uhlmann fidelity (Tr √(√ρ σ √ρ))², clamped into [0, 1].
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension(format!("fidelity between {}- and {}-dimensional states", rho.dim(), sigma.dim())));
    }
    for s in [rho, sigma] {
        if !s.is_physical() {
            return Err(Error::NotPhysical("fidelity needs physical density matrices".into()));
        }
    }
    let sr = sqrtm_psd(rho.matrix())?;
    let inner = sr.matmul(sigma.matrix()).matmul(&sr).hermitian_part();
    let eig = eig_hermitian(&inner)?;
    let tr: f64 = eig.values.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// ⟨ψ|ρ|ψ⟩, the fidelity against a pure target without matrix square roots.
pub fn fidelity_pure(target: &PureState, rho: &DensityMatrix) -> Result<f64> {
    if target.dim() != rho.dim() {
        return Err(Error::Dimension("fidelity dimension mismatch".into()));
    }
    Ok(rho.matrix().expectation(target.amplitudes()).re.clamp(0.0, 1.0))
}

/// −Σ λ log_base λ over the eigenvalues of `rho`.
pub fn von_neumann_entropy(rho: &DensityMatrix, base: f64) -> Result<f64> {
    let eig = eig_hermitian(rho.matrix())?;
    let ln_base = base.ln();
    Ok(eig
        .values
        .iter()
        .filter(|&&l| l > ENTROPY_CUTOFF)
        .map(|&l| -l * l.ln() / ln_base)
        .sum())
}

/// Entanglement entropy of a two-qudit state: von Neumann entropy of the
/// first qudit's reduced state in log base `d`, so 1 means maximally
/// entangled.
pub fn entanglement_entropy(rho: &DensityMatrix, d: usize) -> Result<f64> {
    if !rho.is_physical() {
        return Err(Error::NotPhysical("entanglement entropy needs a physical state".into()));
    }
    let reduced = partial_trace(rho, d, Keep::First)?;
    Ok(von_neumann_entropy(&reduced, d as f64)?.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(rng: &mut ChaCha8Rng, dim: usize) -> DensityMatrix {
        let g = CMatrix::from_fn(dim, dim, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        DensityMatrix::from_unnormalized(g.matmul(&g.adjoint()), Physicality::Physical).unwrap()
    }

    fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> CMatrix {
        let h = CMatrix::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .hermitian_part();
        // exp(iH) from the eigendecomposition
        let e = eig_hermitian(&h).unwrap();
        let mut u = CMatrix::zeros(d, d);
        for k in 0..d {
            let v = e.vector(k);
            let ph = C64::from_polar(1.0, e.values[k]);
            for i in 0..d {
                for j in 0..d {
                    u[(i, j)] += v[i] * ph * v[j].conj();
                }
            }
        }
        u
    }

    #[test]
    fn pure_state_rejects_unnormalised() {
        assert!(matches!(PureState::new(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn density_validation() {
        let not_unit = CMatrix::diag_real(&[0.5, 0.4]);
        assert!(DensityMatrix::new(not_unit, Physicality::LinearOnly).is_err());
        let negative = CMatrix::diag_real(&[1.1, -0.1]);
        assert!(DensityMatrix::new(negative.clone(), Physicality::LinearOnly).is_ok());
        assert!(DensityMatrix::new(negative, Physicality::Physical).is_err());
    }

    #[test]
    fn bell_pair_reduces_to_maximally_mixed() {
        let rho = BipartiteState::max_entangled(2).to_density();
        let a = partial_trace(&rho, 2, Keep::First).unwrap();
        assert!(a.matrix().max_abs_diff(&CMatrix::identity(2).scale_real(0.5)) < 1e-12);
    }

    #[test]
    fn product_state_keeps_second_factor() {
        let rho = BipartiteState::product(2, 0, 1).to_density();
        let b = partial_trace(&rho, 2, Keep::Second).unwrap();
        assert!(b.matrix().max_abs_diff(&CMatrix::diag_real(&[0.0, 1.0])) < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_bad_dimension() {
        let rho = DensityMatrix::maximally_mixed(6);
        assert!(matches!(partial_trace(&rho, 2, Keep::First), Err(Error::Dimension(_))));
    }

    #[test]
    fn partial_trace_preserves_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let rho = random_density(&mut rng, 4);
            // oracle: explicit index summation over the traced-out label
            let m = rho.matrix();
            let mut direct = C64::new(0.0, 0.0);
            for i in 0..2 {
                for j in 0..2 {
                    direct += m[(i * 2 + j, i * 2 + j)];
                }
            }
            for keep in [Keep::First, Keep::Second] {
                let r = partial_trace(&rho, 2, keep).unwrap();
                assert!((r.matrix().trace() - direct).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn max_entangled_marginals_are_exactly_mixed() {
        for d in 2..=6 {
            let rho = BipartiteState::max_entangled(d).to_density();
            for keep in [Keep::First, Keep::Second] {
                let r = partial_trace(&rho, d, keep).unwrap();
                let target = CMatrix::identity(d).scale_real(1.0 / d as f64);
                assert!(r.matrix().max_abs_diff(&target) < 1e-12);
            }
        }
    }

    #[test]
    fn fidelity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(&mut rng, 3);
        assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-9);

        let zero = PureState::basis(2, 0).to_density();
        let one = PureState::basis(2, 1).to_density();
        assert!(fidelity(&zero, &one).unwrap() < 1e-12);

        // Σ|nn⟩⟨nn|/4 against |Φ⁺₄⟩: the pure-target oracle ⟨Φ|ρ|Φ⟩ gives 1/4
        let mut diag = vec![0.0; 16];
        for n in 0..4 {
            diag[n * 4 + n] = 0.25;
        }
        let mixed = DensityMatrix::new(CMatrix::diag_real(&diag), Physicality::Physical).unwrap();
        let phi = BipartiteState::max_entangled(4);
        let oracle = fidelity_pure(phi.as_pure(), &mixed).unwrap();
        assert!((oracle - 0.25).abs() < 1e-12);
        assert!((fidelity(&mixed, &phi.to_density()).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn fidelity_rejects_linear_only() {
        let lin = DensityMatrix::new(CMatrix::diag_real(&[1.1, -0.1]), Physicality::LinearOnly).unwrap();
        let ok = DensityMatrix::maximally_mixed(2);
        assert!(fidelity(&lin, &ok).is_err());
    }

    #[test]
    fn fidelity_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in [2usize, 3, 4, 9] {
            for _ in 0..10 {
                let a = random_density(&mut rng, dim);
                let b = random_density(&mut rng, dim);
                let fab = fidelity(&a, &b).unwrap();
                let fba = fidelity(&b, &a).unwrap();
                assert!((fab - fba).abs() < 1e-9, "{fab} vs {fba}");
            }
        }
    }

    #[test]
    fn entropy_extremes() {
        for d in 2..=5 {
            let e = entanglement_entropy(&BipartiteState::max_entangled(d).to_density(), d).unwrap();
            assert!((e - 1.0).abs() < 1e-12);
        }
        let e = entanglement_entropy(&BipartiteState::product(4, 0, 0).to_density(), 4).unwrap();
        assert!(e.abs() < 1e-12);
    }

    #[test]
    fn entropy_invariant_under_local_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for d in [2usize, 3, 4] {
            for _ in 0..5 {
                let rho = random_density(&mut rng, d * d);
                let u = tensor(&random_unitary(&mut rng, d), &random_unitary(&mut rng, d));
                let rotated = u.matmul(rho.matrix()).matmul(&u.adjoint());
                let rotated = DensityMatrix::new(rotated.hermitian_part(), Physicality::Physical).unwrap();
                let e0 = entanglement_entropy(&rho, d).unwrap();
                let e1 = entanglement_entropy(&rotated, d).unwrap();
                assert!((e0 - e1).abs() < 1e-9);
            }
        }
    }
}
