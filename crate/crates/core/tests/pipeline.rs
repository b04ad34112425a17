use hdlink::bases::mub_set;
use hdlink::channel::{ChannelState, DetectorEfficiencies, DriftModel};
use hdlink::io::{read_counts_csv, write_counts_csv};
use hdlink::linalg::CMatrix;
use hdlink::seed::rng_for;
use hdlink::stabiliser::{build_plan, run_session, SessionConfig, TimingBudget};
use hdlink::state::{BipartiteState, DensityMatrix, Physicality};
use hdlink::tomography::{analyse, monte_carlo_errors, simulate_tomography, EstimateOptions, Shots};

fn exact_records(rho: &DensityMatrix, d: usize, n: f64) -> Vec<hdlink::tomography::CountsRecord> {
    let bases = mub_set(d).unwrap();
    let eta = vec![DetectorEfficiencies::ideal(d); 2];
    simulate_tomography(rho, &bases, 2, n, &eta, &mut Shots::Exact).unwrap()
}

#[test]
fn noiseless_qubit_pair_is_recovered() {
    let psi = BipartiteState::max_entangled(2);
    let recs = exact_records(&psi.to_density(), 2, 1e4);
    let eta = vec![DetectorEfficiencies::ideal(2); 2];
    let a = analyse(&recs, &eta, &mub_set(2).unwrap(), psi.as_pure(), &EstimateOptions::default()).unwrap();
    assert!(a.fidelity >= 0.999);
    assert!(a.entropy >= 0.999);
    assert_eq!(a.witness.dimension, 2);
}

#[test]
fn fully_dephased_ququarts_reach_the_classical_limit() {
    let d = 4;
    let mut m = CMatrix::zeros(d * d, d * d);
    for n in 0..d {
        m[(n * d + n, n * d + n)] = hdlink::C64::new(1.0 / d as f64, 0.0);
    }
    let rho = DensityMatrix::new(m, Physicality::Physical).unwrap();
    let psi = BipartiteState::max_entangled(d);
    let eta = vec![DetectorEfficiencies::ideal(d); 2];
    let a = analyse(&exact_records(&rho, d, 1e4), &eta, &mub_set(d).unwrap(), psi.as_pure(), &EstimateOptions::default()).unwrap();
    assert!((a.fidelity - 0.25).abs() < 1e-6, "{}", a.fidelity);
    assert!(a.entropy > 0.999);
}

#[test]
fn monte_carlo_spread_vanishes_for_huge_counts() {
    let d = 2;
    let psi = BipartiteState::max_entangled(d);
    let recs = exact_records(&psi.to_density(), d, 1e14);
    let eta = vec![DetectorEfficiencies::ideal(d); 2];
    let mc = monte_carlo_errors(&recs, &eta, &mub_set(d).unwrap(), psi.as_pure(), 8, 3, &EstimateOptions::default()).unwrap();
    assert!(mc.fidelity.std <= 1e-6, "{:?}", mc.fidelity);
    assert!(mc.entropy.std <= 1e-6, "{:?}", mc.entropy);
    assert_eq!(mc.witness.std, 0.0);
}

#[test]
fn monte_carlo_is_seeded() {
    let d = 2;
    let psi = BipartiteState::max_entangled(d);
    let recs = exact_records(&psi.to_density(), d, 500.0);
    let eta = vec![DetectorEfficiencies::ideal(d); 2];
    let bases = mub_set(d).unwrap();
    let opts = EstimateOptions::default();
    let a = monte_carlo_errors(&recs, &eta, &bases, psi.as_pure(), 6, 9, &opts).unwrap();
    let b = monte_carlo_errors(&recs, &eta, &bases, psi.as_pure(), 6, 9, &opts).unwrap();
    let c = monte_carlo_errors(&recs, &eta, &bases, psi.as_pure(), 6, 10, &opts).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.fidelity_samples, c.fidelity_samples);
    assert!(a.fidelity.std > 0.0);
}

#[test]
fn counts_survive_a_csv_round_trip() {
    let d = 3;
    let psi = BipartiteState::max_entangled(d);
    let mut rng = rng_for(4, "counts");
    let bases = mub_set(d).unwrap();
    let eta = vec![DetectorEfficiencies::ideal(d); 2];
    let recs = simulate_tomography(&psi.to_density(), &bases, 2, 2000.0, &eta, &mut Shots::Poisson(&mut rng)).unwrap();
    let mut buf = Vec::new();
    write_counts_csv(&recs, &mut buf).unwrap();
    let back = read_counts_csv(buf.as_slice(), d).unwrap();
    let opts = EstimateOptions::default();
    let a = analyse(&recs, &eta, &bases, psi.as_pure(), &opts).unwrap();
    let b = analyse(&back, &eta, &bases, psi.as_pure(), &opts).unwrap();
    assert_eq!(a.fidelity, b.fidelity);
    assert_eq!(a.witness, b.witness);
}

#[test]
fn stabilisation_beats_free_drift() {
    let d = 4;
    let plan = build_plan(d).unwrap();
    let drift = DriftModel::preset("scf+mcf", d).unwrap();
    let budget = TimingBudget::default();
    let ch = ChannelState::random_phases(d, &mut rng_for(8, "initial"));
    let short = |stabilise| SessionConfig { duration: 20.0, stabilise, ..Default::default() };
    let on = run_session(ch.clone(), &drift, &plan, &budget, &short(true), 8, &mut |_| {}).unwrap();
    let off = run_session(ch.clone(), &drift, &plan, &budget, &short(false), 8, &mut |_| {}).unwrap();
    let again = run_session(ch, &drift, &plan, &budget, &short(true), 8, &mut |_| {}).unwrap();
    assert_eq!(on, again);
    assert!(on.mean_quantum_fidelity() > 0.9);
    assert!(on.mean_quantum_fidelity() > off.mean_quantum_fidelity() + 0.3);
}
