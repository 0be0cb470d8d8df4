use hamming_bootstrap::montecarlo::{verify_oracle, verify_properties, OracleSuite};

#[test]
fn closure_agrees_with_dense_automaton() {
    let report = verify_oracle(&OracleSuite::standard(20240611)).unwrap();
    assert_eq!(report.cases, 351 + 1000);
    assert!(report.mismatches.is_empty(), "{:?}", report.mismatches);
}

#[test]
fn closure_agrees_on_four_dimensional_cube() {
    let suite = OracleSuite {
        exhaustive_pairs: false,
        sizes: vec![(4, 4)],
        random_cases: 1000,
        max_seeds: 8,
        master_seed: 7,
    };
    let report = verify_oracle(&suite).unwrap();
    assert_eq!(report.cases, 1000);
    assert!(report.mismatches.is_empty(), "{:?}", report.mismatches);
}

#[test]
fn structural_properties_hold() {
    let report = verify_properties(1000, 99).unwrap();
    for check in &report.checks {
        assert!(
            check.failures.is_empty(),
            "{}: {:?}",
            check.name,
            check.failures
        );
    }
    assert!(report.passed());
}
