//! JSON and CSV forms of the library's data.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bases::{MubSet, OperatorSet};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::state::{DensityMatrix, Physicality};
use crate::tomography::{CountsRecord, TomographyResult};

/// Density matrix as separate real and imaginary parts; `d` is the local
/// dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityJson {
    pub d: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl DensityJson {
    pub fn from_density(d: usize, rho: &DensityMatrix) -> Self {
        let m = rho.matrix();
        let n = m.rows();
        DensityJson {
            d,
            re: (0..n).map(|r| (0..n).map(|c| m[(r, c)].re).collect()).collect(),
            im: (0..n).map(|r| (0..n).map(|c| m[(r, c)].im).collect()).collect(),
        }
    }

    pub fn to_density(&self, physicality: Physicality) -> Result<DensityMatrix> {
        let n = self.re.len();
        if self.im.len() != n || self.re.iter().chain(&self.im).any(|row| row.len() != n) {
            return Err(Error::Dimension("real and imaginary parts must be square and equal in size".into()));
        }
        DensityMatrix::new(CMatrix::from_fn(n, n, |r, c| C64::new(self.re[r][c], self.im[r][c])), physicality)
    }
}

/// Matrix as nested [re, im] pairs.
pub fn matrix_pairs(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows()).map(|r| (0..m.cols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect()
}

pub fn matrix_from_pairs(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let n = rows.len();
    let cols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Dimension("ragged matrix".into()));
    }
    Ok(CMatrix::from_fn(n, cols, |r, c| C64::new(rows[r][c][0], rows[r][c][1])))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasesJson {
    pub d: usize,
    pub bases: Vec<Vec<Vec<[f64; 2]>>>,
}

impl From<&MubSet> for BasesJson {
    fn from(m: &MubSet) -> Self {
        BasesJson { d: m.d, bases: m.bases.iter().map(matrix_pairs).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorsJson {
    pub d: usize,
    pub operators: Vec<Vec<Vec<[f64; 2]>>>,
}

impl From<&OperatorSet> for OperatorsJson {
    fn from(o: &OperatorSet) -> Self {
        OperatorsJson { d: o.d, operators: o.operators.iter().map(matrix_pairs).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueWithError {
    pub value: f64,
    pub std: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorJson {
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloJson {
    pub reps: usize,
    pub fidelity: Vec<f64>,
    pub entropy: Vec<f64>,
    pub witness: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyJson {
    pub d: usize,
    pub rho_linear: DensityJson,
    pub rho_physical: DensityJson,
    pub fidelity: ValueWithError,
    pub entropy: ValueWithError,
    pub dimension_witness: usize,
    pub witness_overlap: f64,
    pub witness_std: Option<f64>,
    pub estimator: EstimatorJson,
    pub monte_carlo: Option<MonteCarloJson>,
}

impl From<&TomographyResult> for TomographyJson {
    fn from(t: &TomographyResult) -> Self {
        let a = &t.analysis;
        let mc = t.monte_carlo.as_ref();
        TomographyJson {
            d: t.d,
            rho_linear: DensityJson::from_density(t.d, &a.rho_linear),
            rho_physical: DensityJson::from_density(t.d, &a.estimate.rho),
            fidelity: ValueWithError { value: a.fidelity, std: mc.map(|m| m.fidelity.std) },
            entropy: ValueWithError { value: a.entropy, std: mc.map(|m| m.entropy.std) },
            dimension_witness: a.witness.dimension,
            witness_overlap: a.witness.overlap,
            witness_std: mc.map(|m| m.witness.std),
            estimator: EstimatorJson { cost: a.estimate.cost, iterations: a.estimate.iterations, converged: a.estimate.converged },
            monte_carlo: mc.map(|m| MonteCarloJson {
                reps: m.reps,
                fidelity: m.fidelity_samples.clone(),
                entropy: m.entropy_samples.clone(),
                witness: m.witness_samples.clone(),
            }),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CountsRow {
    m_a: usize,
    m_b: usize,
    a: usize,
    b: usize,
    counts: f64,
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("CSV: {e}"))
}

/// Two-party records as rows (m_a, m_b, a, b, counts).
pub fn write_counts_csv<W: Write>(records: &[CountsRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        if r.parties() != 2 {
            return Err(Error::Dimension("counts CSV holds two-party records only".into()));
        }
        for a in 0..r.d {
            for b in 0..r.d {
                w.serialize(CountsRow { m_a: r.settings[0], m_b: r.settings[1], a, b, counts: r.get(a, b) }).map_err(csv_error)?;
            }
        }
    }
    w.flush().map_err(|e| Error::InvalidArgument(format!("CSV: {e}")))
}

/// Reads rows (m_a, m_b, a, b, counts); cells not listed are zero.
pub fn read_counts_csv<R: Read>(input: R, d: usize) -> Result<Vec<CountsRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut map: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for row in rdr.deserialize::<CountsRow>() {
        let row = row.map_err(csv_error)?;
        if row.a >= d || row.b >= d || row.m_a > d || row.m_b > d {
            return Err(Error::InvalidArgument(format!("row {row:?} out of range for d={d}")));
        }
        map.entry((row.m_a, row.m_b)).or_insert_with(|| vec![0.0; d * d])[row.a * d + row.b] += row.counts;
    }
    Ok(map
        .into_iter()
        .map(|((ma, mb), counts)| CountsRecord { d, settings: vec![ma, mb], counts, acquisition_time: 0.0 })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::mub_set;
    use crate::channel::DetectorEfficiencies;
    use crate::state::BipartiteState;
    use crate::tomography::{simulate_tomography, Shots};

    #[test]
    fn density_json_round_trip() {
        let rho = BipartiteState::max_entangled(2).to_density();
        let j = DensityJson::from_density(2, &rho);
        let text = serde_json::to_string(&j).unwrap();
        let back: DensityJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_density(Physicality::Physical).unwrap(), rho);
        assert!(text.starts_with("{\"d\":2,\"re\":"));
    }

    #[test]
    fn bases_json_round_trip() {
        let m = mub_set(3).unwrap();
        let j = BasesJson::from(&m);
        let text = serde_json::to_string(&j).unwrap();
        let back: BasesJson = serde_json::from_str(&text).unwrap();
        for (a, b) in back.bases.iter().zip(&m.bases) {
            assert_eq!(&matrix_from_pairs(a).unwrap(), b);
        }
    }

    #[test]
    fn counts_csv_round_trip() {
        let bases = mub_set(2).unwrap();
        let eta = vec![DetectorEfficiencies::ideal(2); 2];
        let recs = simulate_tomography(&BipartiteState::max_entangled(2).to_density(), &bases, 2, 1000.0, &eta, &mut Shots::Exact).unwrap();
        let mut buf = Vec::new();
        write_counts_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("m_a,m_b,a,b,counts\n"));
        let back = read_counts_csv(buf.as_slice(), 2).unwrap();
        assert_eq!(back.len(), recs.len());
        for (a, b) in back.iter().zip(&recs) {
            assert_eq!(a.settings, b.settings);
            assert_eq!(a.counts, b.counts);
        }
    }
}
