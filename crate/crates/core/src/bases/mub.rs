//! Complete sets of mutually unbiased bases for d ∈ {2, 3, 4, 5}.

use std::f64::consts::PI;


use super::gf;
use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, inner, tensor, CMatrix, C64, I, ONE, ZERO};

#[derive(Clone, Debug, PartialEq)]
pub struct MubSet {
    pub d: usize,
    /// Basis m holds its states |e_{m,n}⟩ as rows.
    pub bases: Vec<CMatrix>,
}

impl MubSet {
    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn state(&self, m: usize, n: usize) -> &[C64] {
        self.bases[m].row(n)
    }

    /// Unitary mapping a state to its outcome amplitudes in basis `m`:
    /// (Π ψ)_n = ⟨e_{m,n}|ψ⟩.
    pub fn measurement_unitary(&self, m: usize) -> CMatrix {
        self.bases[m].conj()
    }

    /// Projector |e_{m,n}⟩⟨e_{m,n}|.
    pub fn projector(&self, m: usize, n: usize) -> CMatrix {
        let v = self.state(m, n);
        CMatrix::outer(v, v)
    }

    /// Largest deviation of |⟨e|e'⟩|² from 1/d over all cross-basis pairs.
    pub fn max_unbiasedness_error(&self) -> f64 {
        let d = self.d;
        let mut worst: f64 = 0.0;
        for m in 0..self.len() {
            for m2 in m + 1..self.len() {
                for n in 0..d {
                    for n2 in 0..d {
                        let o = inner(self.state(m, n), self.state(m2, n2)).norm_sqr();
                        worst = worst.max((o - 1.0 / d as f64).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest deviation of any basis from orthonormality.
    pub fn max_unitarity_error(&self) -> f64 {
        self.bases
            .iter()
            .map(|b| b.matmul(&b.adjoint()).max_abs_diff(&CMatrix::identity(self.d)))
            .fold(0.0, f64::max)
    }
}

/// d + 1 mutually unbiased bases. Basis 0 is computational and basis 1
/// is the Fourier (Hadamard-type) basis; for d = 2 the order is Z, X, Y.
pub fn mub_set(d: usize) -> Result<MubSet> {
    let mut bases = match d {
        2 => pauli_class_bases(1),
        4 => pauli_class_bases(2),
        3 | 5 => odd_prime_bases(d),
        _ => return Err(Error::UnsupportedDimension(d)),
    };
    bases.iter_mut().for_each(fix_phases);
    Ok(MubSet { d, bases })
}

fn odd_prime_bases(p: usize) -> Vec<CMatrix> {
    let norm = 1.0 / (p as f64).sqrt();
    let mut bases = vec![CMatrix::identity(p)];
    for m in 0..p {
        bases.push(CMatrix::from_fn(p, p, |n, k| {
            let e = (m * k * k + n * k) % p;
            C64::from_polar(norm, 2.0 * PI * e as f64 / p as f64)
        }));
    }
    bases
}

fn pauli_x() -> CMatrix {
    CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

fn pauli_z() -> CMatrix {
    CMatrix::diag_real(&[1.0, -1.0])
}

/// Hermitian Pauli string i^{x·z} X^x Z^z on `qubits` qubits.
fn pauli_string(x: &[u8], z: &[u8]) -> CMatrix {
    let mut out = CMatrix::identity(1);
    let mut phase = ONE;
    for q in 0..x.len() {
        let mut f = CMatrix::identity(2);
        if x[q] == 1 {
            f = f.matmul(&pauli_x());
        }
        if z[q] == 1 {
            f = f.matmul(&pauli_z());
        }
        if x[q] == 1 && z[q] == 1 {
            phase *= I;
        }
        out = tensor(&out, &f);
    }
    out.scale(phase)
}

/// Field elements of GF(2^qubits) as coordinate vectors, with
/// multiplication, for qubits ∈ {1, 2}.
fn field(qubits: usize) -> (Vec<u8>, Box<dyn Fn(u8, u8) -> u8>, Box<dyn Fn(u8) -> Vec<u8>>, Vec<u8>) {
    if qubits == 1 {
        (vec![0, 1], Box::new(|a, b| a & b), Box::new(|a| vec![a]), vec![1])
    } else {
        (vec![gf::ZERO, gf::ONE, gf::OMEGA, gf::OMEGA2], Box::new(gf::mul), Box::new(|a| gf::coords(a).to_vec()), vec![gf::OMEGA, gf::OMEGA2])
    }
}

/// Joint eigenbases of the d + 1 commuting classes of Pauli strings,
/// d = 2^qubits. Class a ∈ GF(d) is {X(x) Z(a·x)}, and the Z class gives
/// the computational basis.
fn pauli_class_bases(qubits: usize) -> Vec<CMatrix> {
    let d = 1usize << qubits;
    let (elements, mul, coords, generators) = field(qubits);
    let mut bases = vec![CMatrix::identity(d)];
    for &a in &elements {
        // Σ_k 2^k G_k over the class generators has a non-degenerate spectrum
        let mut h = CMatrix::zeros(d, d);
        for (k, &g) in generators.iter().enumerate() {
            let x = coords(g);
            let z = coords(mul(a, g));
            h = &h + &pauli_string(&x, &z).scale_real((1u32 << k) as f64);
        }
        let e = eig_hermitian(&h).expect("Pauli sums are Hermitian");
        bases.push(CMatrix::from_fn(d, d, |n, k| e.vectors[(k, d - 1 - n)]));
    }
    bases
}

/// Makes the first non-negligible entry of each row real and positive.
fn fix_phases(b: &mut CMatrix) {
    let d = b.cols();
    for r in 0..b.rows() {
        let Some(c) = (0..d).find(|&c| b[(r, c)].norm() > 1e-9) else { continue };
        let ph = b[(r, c)].conj() / b[(r, c)].norm();
        for k in 0..d {
            b[(r, k)] *= ph;
        }
        b[(r, c)] = C64::new(b[(r, c)].re, 0.0);
        for k in 0..d {
            if b[(r, k)].norm() < 1e-15 {
                b[(r, k)] = ZERO;
            }
        }
    }
}
