//! Linear state reconstruction from local MUB statistics.

use crate::bases::{gellmann_ops, MubSet};
use crate::channel::DetectorEfficiencies;
use crate::error::{Error, Result};
use crate::linalg::{tensor, CMatrix, C64};
use crate::state::{DensityMatrix, Physicality};

use super::counts::{frequency_table, CountsRecord};

/// Per-qudit expansion data: the operators τ_0 = I, τ_i = σ_i with their
/// squared norms, and the weights w_p(τ_i) = Tr(Γ_p τ_i) − Tr(τ_i)/(d+1)
/// that turn projector probabilities into expectation values.
pub(crate) struct Frame {
    pub d: usize,
    pub taus: Vec<CMatrix>,
    pub norms: Vec<f64>,
    /// weights[i][p], p = n + m·d.
    pub weights: Vec<Vec<f64>>,
}

impl Frame {
    pub fn new(bases: &MubSet) -> Self {
        let d = bases.d;
        let mut taus = vec![CMatrix::identity(d)];
        taus.extend(gellmann_ops(d).operators);
        let mut norms = vec![d as f64];
        norms.extend(std::iter::repeat(2.0).take(d * d - 1));
        let projectors: Vec<CMatrix> = (0..bases.len()).flat_map(|m| (0..d).map(move |n| (m, n))).map(|(m, n)| bases.projector(m, n)).collect();
        let weights = taus
            .iter()
            .map(|t| {
                let shift = t.trace().re / (d as f64 + 1.0);
                projectors.iter().map(|g| g.trace_product(t).re - shift).collect()
            })
            .collect();
        Frame { d, taus, norms, weights }
    }
}

fn digits(mut index: usize, radix: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for k in (0..len).rev() {
        out[k] = index % radix;
        index /= radix;
    }
    out
}

/// Joint probabilities P_{p_1..p_N} over projector indices p = n + m·d,
/// flattened with the first party most significant.
pub(crate) fn joint_probabilities(records: &[CountsRecord], eta: &[DetectorEfficiencies], d: usize, parties: usize) -> Result<Vec<f64>> {
    let table = frequency_table(records, eta, d, parties)?;
    let np = d * (d + 1);
    let mut probs = vec![0.0; np.pow(parties as u32)];
    for (settings, freqs) in &table {
        for (outcome, f) in freqs.iter().enumerate() {
            let ns = digits(outcome, d, parties);
            let idx = settings.iter().zip(&ns).fold(0, |acc, (&m, &n)| acc * np + n + m * d);
            probs[idx] = *f;
        }
    }
    Ok(probs)
}

/// Expansion coefficients S_{i_1..i_N} = Σ_p P_p Π_k w_{p_k}(τ_{i_k}).
fn coefficients(frame: &Frame, probs: &[f64], parties: usize) -> Vec<f64> {
    let np = frame.d * (frame.d + 1);
    let ni = frame.d * frame.d;
    // contract one axis at a time; axis k of `cur` switches from p to i
    let mut cur = probs.to_vec();
    for axis in 0..parties {
        let before = ni.pow(axis as u32);
        let after = np.pow((parties - axis - 1) as u32);
        let mut next = vec![0.0; before * ni * after];
        for b in 0..before {
            for a in 0..after {
                for i in 0..ni {
                    let w = &frame.weights[i];
                    let mut s = 0.0;
                    for p in 0..np {
                        s += w[p] * cur[(b * np + p) * after + a];
                    }
                    next[(b * ni + i) * after + a] = s;
                }
            }
        }
        cur = next;
    }
    cur
}

fn assemble(frame: &Frame, coeffs: &[f64], parties: usize) -> CMatrix {
    let ni = frame.d * frame.d;
    let dim = frame.d.pow(parties as u32);
    let mut rho = CMatrix::zeros(dim, dim);
    for (idx, &s) in coeffs.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let is = digits(idx, ni, parties);
        let norm: f64 = is.iter().map(|&i| frame.norms[i]).product();
        let term = is.iter().fold(CMatrix::identity(1), |acc, &i| tensor(&acc, &frame.taus[i]));
        let f = C64::new(s / norm, 0.0);
        for r in 0..dim {
            for c in 0..dim {
                let t = term[(r, c)];
                if t != C64::new(0.0, 0.0) {
                    rho[(r, c)] += f * t;
                }
            }
        }
    }
    rho
}

/// Linear reconstruction ρ = Σ_i S_i/(Π n_{i_k}) τ_{i_1}⊗…⊗τ_{i_N} from
/// records covering all (d+1)^N local settings. The result is Hermitian
/// with unit trace but may have negative eigenvalues.
pub fn linear_reconstruct(records: &[CountsRecord], eta: &[DetectorEfficiencies], bases: &MubSet, parties: usize) -> Result<DensityMatrix> {
    if parties == 0 {
        return Err(Error::InvalidArgument("need at least one party".into()));
    }
    let probs = joint_probabilities(records, eta, bases.d, parties)?;
    let frame = Frame::new(bases);
    let coeffs = coefficients(&frame, &probs, parties);
    DensityMatrix::from_unnormalized(assemble(&frame, &coeffs, parties).hermitian_part(), Physicality::LinearOnly)
}

/// Qubit reconstruction from Stokes parameters, ρ = ½ Σ S_i σ_i with
/// S_I = 1 and S_Z, S_X, S_Y read from bases 0, 1, 2.
pub fn stokes_reconstruct_qubit(records: &[CountsRecord], eta: &DetectorEfficiencies) -> Result<DensityMatrix> {
    let table = frequency_table(records, std::slice::from_ref(eta), 2, 1)?;
    let s = |m: usize| -> f64 {
        let f = &table[&vec![m]];
        f[0] - f[1]
    };
    let (sz, sx, sy) = (s(0), s(1), s(2));
    let m = CMatrix::from_vec(
        2,
        2,
        vec![C64::new(0.5 * (1.0 + sz), 0.0), C64::new(0.5 * sx, -0.5 * sy), C64::new(0.5 * sx, 0.5 * sy), C64::new(0.5 * (1.0 - sz), 0.0)],
    )?;
    DensityMatrix::new(m, Physicality::LinearOnly)
}
