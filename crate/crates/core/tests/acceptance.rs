//! Acceptance gate: runs every verification criterion at its pinned
//! tolerance and prints one pass/fail line per criterion. The CLI `verify`
//! subcommand executes exactly the same suite.

use ilradmm::verification;

#[test]
fn acceptance_suite() {
    let outcomes = verification::run_all();
    for outcome in &outcomes {
        println!("{outcome}");
    }
    assert_eq!(outcomes.len(), verification::CRITERIA.len());
    for (outcome, expected_name) in outcomes.iter().zip(verification::CRITERIA) {
        assert_eq!(outcome.name, expected_name);
    }
    let failed: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.name)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
