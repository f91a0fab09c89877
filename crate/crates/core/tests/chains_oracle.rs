mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use skillpriv::bundle::load_bundle;
use skillpriv::graph::build_graph;
use skillpriv::oracle::SemanticOracle;
use skillpriv::tasks::{chain_is_valid, enumerate_chains, ActionChain, ChainLimits};

fn check(g: &skillpriv::graph::UnifiedGraph) -> Result<(), String> {
    let unlimited = ChainLimits { max_chains: usize::MAX, max_depth: usize::MAX };
    let mut targets: Vec<Option<&str>> = vec![None];
    targets.extend(g.actions().map(|a| Some(a.id.as_str())));
    for t in targets {
        let got = enumerate_chains(g, t, unlimited);
        let want = common::brute_force_chains(g, t);
        let got_set: BTreeSet<ActionChain> = got.chains.iter().cloned().collect();
        if got_set.len() != got.chains.len() {
            return Err(format!("duplicate chains for {t:?}"));
        }
        // An edgeless graph gets one trivial chain by convention.
        let trivial = g.edges.is_empty() && t.is_none();
        if got_set != want && !trivial {
            return Err(format!("mismatch for {t:?}: got {} chains, brute force {}", got_set.len(), want.len()));
        }
        if let Some(c) = got.chains.iter().find(|c| !chain_is_valid(g, c)) {
            return Err(format!("invalid chain {:?}", c.nodes));
        }
    }
    Ok(())
}

#[test]
fn fixture_graphs_match_brute_force() {
    let o = SemanticOracle::rule();
    for name in common::FIXTURES {
        let b = load_bundle(&common::fixture(name)).unwrap();
        check(&build_graph(&b, &o).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn small_random_graphs_match_brute_force() {
    let o = SemanticOracle::rule();
    let mut small = 0;
    for seed in 0..400 {
        let g = build_graph(&common::random_skill(seed, 6), &o).unwrap();
        if g.nodes.len() <= 8 {
            small += 1;
            check(&g).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        }
    }
    assert!(small >= 50, "only {small} graphs with at most 8 nodes");
}

#[test]
fn truncation_returns_a_flagged_prefix() {
    let o = SemanticOracle::rule();
    for seed in 0..60 {
        let g = build_graph(&common::random_skill(seed, 8), &o).unwrap();
        let full = enumerate_chains(&g, None, ChainLimits::default());
        if full.chains.len() < 2 {
            continue;
        }
        let cut = enumerate_chains(&g, None, ChainLimits { max_chains: 1, max_depth: 128 });
        assert!(cut.truncated);
        assert_eq!(cut.chains[..], full.chains[..1]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumeration_matches_brute_force(seed in any::<u64>()) {
        let g = build_graph(&common::random_skill(seed, 8), &SemanticOracle::rule()).unwrap();
        prop_assert_eq!(check(&g), Ok(()));
    }

    #[test]
    fn every_chain_through_a_candidate_contains_it(seed in any::<u64>()) {
        let g = build_graph(&common::random_skill(seed, 8), &SemanticOracle::rule()).unwrap();
        for a in g.actions() {
            for c in enumerate_chains(&g, Some(&a.id), ChainLimits::default()).chains {
                prop_assert!(c.contains(&a.id));
            }
        }
    }
}
