mod common;

/// Pipeline verdicts and exhaustive per-action ablation both agree with the
/// direct definition on every action-in-task pair of 60 random skills.
#[test]
fn verdicts_match_direct_definition() {
    let summary = common::criteria::unnecessary_equivalence(60).unwrap();
    eprintln!("{summary}");
}
