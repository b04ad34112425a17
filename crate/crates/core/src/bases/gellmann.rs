//! Generalised Gell-Mann (Pauli) operators and the two-mode support
//! property of their eigenvectors.

use serde::{Deserialize, Serialize};

use crate::linalg::{eig_hermitian, CMatrix, C64, I, ONE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Symmetric { j: usize, k: usize },
    Antisymmetric { j: usize, k: usize },
    Diagonal { l: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSet {
    pub d: usize,
    pub operators: Vec<CMatrix>,
    pub families: Vec<Option<Family>>,
}

impl OperatorSet {
    /// Arbitrary operators, e.g. for testing [`verify_two_mode_support`].
    pub fn from_operators(d: usize, operators: Vec<CMatrix>) -> Self {
        let families = vec![None; operators.len()];
        OperatorSet { d, operators, families }
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }
}

/// The d² − 1 generalised Gell-Mann matrices, ordered symmetric (j < k),
/// antisymmetric (j < k), then diagonal l = 0..d−2.
pub fn gellmann_ops(d: usize) -> OperatorSet {
    let mut operators = Vec::with_capacity(d * d - 1);
    let mut families = Vec::with_capacity(d * d - 1);
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|j| (j + 1..d).map(move |k| (j, k))).collect();
    for &(j, k) in &pairs {
        let mut m = CMatrix::zeros(d, d);
        m[(j, k)] = ONE;
        m[(k, j)] = ONE;
        operators.push(m);
        families.push(Some(Family::Symmetric { j, k }));
    }
    for &(j, k) in &pairs {
        let mut m = CMatrix::zeros(d, d);
        m[(j, k)] = -I;
        m[(k, j)] = I;
        operators.push(m);
        families.push(Some(Family::Antisymmetric { j, k }));
    }
    for l in 0..d.saturating_sub(1) {
        let c = (2.0 / ((l + 1) * (l + 2)) as f64).sqrt();
        let mut diag = vec![0.0; d];
        diag[..=l].iter_mut().for_each(|x| *x = c);
        diag[l + 1] = -c * (l + 1) as f64;
        operators.push(CMatrix::diag_real(&diag));
        families.push(Some(Family::Diagonal { l }));
    }
    OperatorSet { d, operators, families }
}

const DEGENERACY_TOL: f64 = 1e-8;

/// True iff every eigenvector of every operator has at most two
/// amplitudes above `tol`.
///
/// Within a degenerate eigenspace the basis is chosen as in the analytic
/// argument: computational basis states lying entirely inside the
/// eigenspace are taken first, and the remainder is put in reduced row
/// echelon form, which gives each vector the smallest support.
pub fn verify_two_mode_support(ops: &OperatorSet, tol: f64) -> bool {
    ops.operators.iter().all(|op| match eig_hermitian(op) {
        Ok(e) => {
            let d = op.rows();
            let mut start = 0;
            while start < d {
                let mut end = start + 1;
                while end < d && (e.values[end] - e.values[start]).abs() < DEGENERACY_TOL {
                    end += 1;
                }
                let vectors: Vec<Vec<C64>> = (start..end).map(|k| e.vector(k)).collect();
                if minimal_support_basis(&vectors, d).iter().any(|v| v.iter().filter(|a| a.norm() > tol).count() > 2) {
                    return false;
                }
                start = end;
            }
            true
        }
        Err(_) => false,
    })
}

fn minimal_support_basis(vectors: &[Vec<C64>], d: usize) -> Vec<Vec<C64>> {
    if vectors.len() == 1 {
        return vectors.to_vec();
    }
    // projector onto the eigenspace
    let proj = |i: usize, k: usize| -> C64 { vectors.iter().map(|v| v[i] * v[k].conj()).sum() };
    let mut out = Vec::new();
    let mut taken = vec![false; d];
    for i in 0..d {
        if (proj(i, i).re - 1.0).abs() < 1e-9 {
            let mut e = vec![C64::new(0.0, 0.0); d];
            e[i] = ONE;
            out.push(e);
            taken[i] = true;
        }
    }
    // rows of the remaining projector span what is left
    let mut rows: Vec<Vec<C64>> = (0..d)
        .map(|i| (0..d).map(|k| if taken[i] || taken[k] { C64::new(0.0, 0.0) } else { proj(i, k) }).collect())
        .collect();
    let rank = vectors.len() - out.len();
    let mut pivot_row = 0;
    for col in 0..d {
        if pivot_row == rows.len() {
            break;
        }
        let Some(p) = (pivot_row..rows.len()).max_by(|&a, &b| rows[a][col].norm().total_cmp(&rows[b][col].norm())) else {
            break;
        };
        if rows[p][col].norm() < 1e-9 {
            continue;
        }
        rows.swap(pivot_row, p);
        let lead = rows[pivot_row][col];
        rows[pivot_row].iter_mut().for_each(|x| *x /= lead);
        let pr = rows[pivot_row].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != pivot_row {
                let f = row[col];
                if f.norm() > 0.0 {
                    row.iter_mut().zip(&pr).for_each(|(x, y)| *x -= f * y);
                }
            }
        }
        pivot_row += 1;
    }
    out.extend(rows.into_iter().take(rank.min(pivot_row)).map(|mut r| {
        crate::linalg::normalize(&mut r);
        r
    }));
    out
}
