mod common;

#[test]
fn injected_corpus_is_suppressed_without_losing_utility() {
    let corpus = common::injected_corpus();
    assert_eq!(corpus.len(), 20);
    let t = common::suppression_and_utility(&corpus);
    eprintln!("{t:#?}");
    assert!(t.failures.is_empty(), "{:#?}", t.failures);
    assert!(t.positives >= 20);
    assert_eq!(t.suppressed, t.positives);
    assert_eq!(t.completed, t.legitimate);
}
