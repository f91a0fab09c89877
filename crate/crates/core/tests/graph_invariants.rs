mod common;

use proptest::prelude::*;
use skillpriv::graph::build_graph;
use skillpriv::oracle::SemanticOracle;

#[test]
fn corpus_graphs_have_no_violations() {
    common::criteria::graph_invariants().unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn random_graphs_hold_every_invariant(seed in any::<u64>()) {
        let b = common::random_skill(seed, 8);
        let g = build_graph(&b, &SemanticOracle::rule()).unwrap();
        prop_assert_eq!(common::criteria::graph_problems(&b, &g), Vec::<String>::new());
    }

    #[test]
    fn graph_construction_is_deterministic(seed in any::<u64>()) {
        let b = common::random_skill(seed, 8);
        let o = SemanticOracle::rule();
        prop_assert_eq!(build_graph(&b, &o).unwrap().to_json(), build_graph(&b.clone(), &o).unwrap().to_json());
    }
}
