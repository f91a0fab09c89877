//! One pass/fail line per acceptance criterion.

mod common;

use common::criteria::*;

#[test]
fn acceptance() {
    let checks: Vec<(&str, fn() -> Outcome)> = vec![
        ("stratified validity rows", stratified_rows),
        ("worked guard example", worked_guard_example),
        ("unnecessary-action oracle equivalence", || unnecessary_equivalence(60)),
        ("suppression and utility on injected corpus", suppression_utility),
        ("graph invariants", graph_invariants),
        ("chain enumeration oracle", chain_oracle),
        ("determinism", determinism),
        ("bundle round-trip and golden diffs", round_trip_and_golden_diffs),
    ];
    let mut failed = Vec::new();
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                println!("FAIL  {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
