mod common;

use nlslab::linop::{discrete_spectrum, edge_resonance_probe, verify_assumption_a3, A3Options, LinearizedOperator, Verdict};
use nlslab::make_grid;

use common::{cubic, cubic_operator};

#[test]
fn cubic_zero_cluster_and_symmetry() {
    let h = cubic_operator(25.0, 256);
    let r = discrete_spectrum(&h).unwrap();
    assert!(r.zero_cluster.len() >= 2, "{:?}", r.zero_cluster);
    assert!(r.symmetry_defect < 1e-8, "{}", r.symmetry_defect);
    assert!(r.nonzero_gap_eigs().is_empty(), "{:?}", r.nonzero_gap_eigs());
}

#[test]
fn free_operator_has_no_gap_eigenvalues() {
    let h = LinearizedOperator::free(2.0, make_grid(25.0, 128).unwrap());
    let r = discrete_spectrum(&h).unwrap();
    assert!(r.discrete_eigs.is_empty(), "{:?}", r.discrete_eigs);
    assert!(r.edge_gap >= h.tau * (1.0 - 1e-12));
}

#[test]
fn cubic_verdict_is_reported_as_failing() {
    let h = cubic_operator(25.0, 256);
    let r = verify_assumption_a3(&h, Some(&cubic()), A3Options::default()).unwrap();
    match r.assumption_a3_verdict.unwrap() {
        Verdict::Fail { reasons } => assert!(!reasons.is_empty()),
        Verdict::Pass => panic!("pure cubic must not pass"),
    }
}

#[test]
fn free_verdict_names_edge_resonance() {
    let h = LinearizedOperator::free(2.0, make_grid(25.0, 128).unwrap());
    let r = verify_assumption_a3(&h, None, A3Options { refine: false, ..A3Options::default() }).unwrap();
    match r.assumption_a3_verdict.unwrap() {
        Verdict::Fail { reasons } => assert!(reasons.iter().any(|s| s.contains("edge resonance")), "{reasons:?}"),
        Verdict::Pass => panic!("free operator is resonant at the edges"),
    }
}

#[test]
fn resonance_probe_rejects_interior_energy() {
    let h = cubic_operator(25.0, 256);
    assert!(edge_resonance_probe(&h, 0.5 * h.tau).is_err());
}
