//! Depth-first enumeration of entry-to-exit action chains.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::graph::{Edge, EdgeKind, Node, NodeId, UnifiedGraph, FALSE_LABEL, TRUE_LABEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLimits {
    pub max_chains: usize,
    pub max_depth: usize,
}

impl Default for ChainLimits {
    fn default() -> Self {
        ChainLimits { max_chains: 64, max_depth: 128 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionChain {
    pub nodes: Vec<NodeId>,
    /// Branch taken at the first visit of each predicate (`true` = T edge).
    pub predicate_assignments: BTreeMap<NodeId, bool>,
}

impl ActionChain {
    pub fn contains(&self, id: &str) -> bool {
        self.nodes.iter().any(|n| n == id)
    }

    /// Non-invocation action nodes along the chain, with repetition.
    pub fn actions<'a>(&'a self, g: &'a UnifiedGraph) -> impl Iterator<Item = &'a crate::graph::ActionNode> + 'a {
        self.nodes.iter().filter_map(|n| g.action(n)).filter(|a| !a.is_invocation())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainEnumeration {
    pub chains: Vec<ActionChain>,
    pub truncated: bool,
}

fn label_rank(e: &Edge) -> u8 {
    match e.label.as_deref() {
        Some(TRUE_LABEL) => 0,
        Some(FALSE_LABEL) => 2,
        _ => 1,
    }
}

/// Edges a chain may take out of `node` given the current call stack.
/// Invoking nodes descend into their script; code exits return to the
/// successor recorded for the innermost caller.
pub fn next_edges<'a>(g: &'a UnifiedGraph, node: &str, stack: &[NodeId]) -> Vec<&'a Edge> {
    let out: Vec<&Edge> = g.edges.iter().filter(|e| e.from == node).collect();
    let calls: Vec<&Edge> = out.iter().copied().filter(|e| e.kind == EdgeKind::Call).collect();
    let mut chosen: Vec<&Edge> = if !calls.is_empty() {
        calls
    } else if matches!(g.nodes.get(node), Some(Node::Exit(_))) && !g.exits.contains(node) {
        match stack.last() {
            Some(caller) => out
                .iter()
                .copied()
                .filter(|e| e.kind == EdgeKind::Ret && e.label.as_deref() == Some(caller.as_str()))
                .collect(),
            None => Vec::new(),
        }
    } else {
        out.iter().copied().filter(|e| e.kind == EdgeKind::Ctrl).collect()
    };
    chosen.sort_by(|a, b| (label_rank(a), &a.to).cmp(&(label_rank(b), &b.to)));
    chosen
}

struct Search<'a> {
    g: &'a UnifiedGraph,
    candidate: Option<&'a str>,
    limits: ChainLimits,
    out: ChainEnumeration,
    path: Vec<NodeId>,
    used: BTreeSet<(NodeId, NodeId, EdgeKind)>,
    stack: Vec<NodeId>,
    assignments: BTreeMap<NodeId, bool>,
}

impl Search<'_> {
    fn dfs(&mut self, node: &str) {
        if self.out.truncated && self.out.chains.len() >= self.limits.max_chains {
            return;
        }
        if self.g.exits.contains(node) {
            let chain = ActionChain { nodes: self.path.clone(), predicate_assignments: self.assignments.clone() };
            if self.candidate.is_none_or(|c| chain.contains(c)) {
                if self.out.chains.len() >= self.limits.max_chains {
                    self.out.truncated = true;
                } else {
                    self.out.chains.push(chain);
                }
            }
            return;
        }
        if self.path.len() >= self.limits.max_depth {
            self.out.truncated = true;
            return;
        }
        let edges: Vec<Edge> = next_edges(self.g, node, &self.stack).into_iter().cloned().collect();
        for e in edges {
            let key = (e.from.clone(), e.to.clone(), e.kind);
            if self.used.contains(&key) {
                continue;
            }
            self.used.insert(key.clone());
            let saved_stack = self.stack.clone();
            match e.kind {
                EdgeKind::Call => self.stack.push(e.from.clone()),
                EdgeKind::Ret => {
                    self.stack.pop();
                }
                _ => {}
            }
            let fresh = match e.label.as_deref() {
                Some(l @ (TRUE_LABEL | FALSE_LABEL)) if e.kind == EdgeKind::Ctrl && !self.assignments.contains_key(node) => {
                    self.assignments.insert(node.to_string(), l == TRUE_LABEL);
                    true
                }
                _ => false,
            };
            self.path.push(e.to.clone());
            self.dfs(&e.to);
            self.path.pop();
            if fresh {
                self.assignments.remove(node);
            }
            self.stack = saved_stack;
            self.used.remove(&key);
        }
    }
}

/// Enumerates entry-to-exit chains. Every edge is used at most once per
/// chain, so a loop body is covered once; the candidate filter keeps only
/// chains through the candidate.
pub fn enumerate_chains(g: &UnifiedGraph, candidate: Option<&str>, limits: ChainLimits) -> ChainEnumeration {
    let mut s = Search {
        g,
        candidate,
        limits,
        out: ChainEnumeration::default(),
        path: vec![g.entry.clone()],
        used: BTreeSet::new(),
        stack: Vec::new(),
        assignments: BTreeMap::new(),
    };
    s.dfs(&g.entry);
    let mut out = s.out;
    if out.chains.is_empty() && candidate.is_none() && g.edges.is_empty() {
        out.chains.push(ActionChain { nodes: vec![g.entry.clone(), g.exit().to_string()], predicate_assignments: BTreeMap::new() });
    }
    out
}

/// Structural validity of a chain against its graph.
pub fn chain_is_valid(g: &UnifiedGraph, chain: &ActionChain) -> bool {
    let (Some(first), Some(last)) = (chain.nodes.first(), chain.nodes.last()) else { return false };
    if *first != g.entry || !g.exits.contains(last) {
        return false;
    }
    chain.nodes.windows(2).all(|w| {
        g.edges.iter().any(|e| {
            e.from == w[0] && e.to == w[1] && matches!(e.kind, EdgeKind::Ctrl | EdgeKind::Call | EdgeKind::Ret)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::InstructionDoc;
    use crate::graph::instr::{assemble, fragments, normalize_rules};

    fn graph(body: &str) -> UnifiedGraph {
        let doc = InstructionDoc::parse(body).unwrap().0;
        assemble(&doc, "t", &normalize_rules(&fragments(&doc)))
    }

    #[test]
    fn empty_skill_has_one_trivial_chain() {
        let g = graph("");
        let e = enumerate_chains(&g, None, ChainLimits::default());
        assert_eq!(e.chains.len(), 1);
        assert_eq!(e.chains[0].actions(&g).count(), 0);
        assert!(chain_is_valid(&g, &e.chains[0]));
    }

    #[test]
    fn branch_yields_two_chains_and_candidate_filters() {
        let g = graph("1. Read the records.\n2. If the user wants a sync, send the report to Telegram.\n3. Generate the summary.\n");
        let e = enumerate_chains(&g, None, ChainLimits::default());
        assert_eq!(e.chains.len(), 2, "{:#?}", e.chains);
        assert!(e.chains.iter().all(|c| chain_is_valid(&g, c)));
        let send = g.actions().find(|a| a.obj == "report").unwrap().id.clone();
        let only = enumerate_chains(&g, Some(&send), ChainLimits::default());
        assert_eq!(only.chains.len(), 1);
        assert_eq!(only.chains[0].predicate_assignments.values().copied().collect::<Vec<_>>(), vec![true]);
    }

    #[test]
    fn limits_truncate_visibly() {
        let g = graph("1. If a, read the a file.\n2. If b, read the b file.\n3. If c, read the c file.\n");
        let all = enumerate_chains(&g, None, ChainLimits::default());
        assert_eq!(all.chains.len(), 8);
        let few = enumerate_chains(&g, None, ChainLimits { max_chains: 3, max_depth: 128 });
        assert_eq!(few.chains, all.chains[..3].to_vec());
        assert!(few.truncated);
        let shallow = enumerate_chains(&g, None, ChainLimits { max_chains: 64, max_depth: 2 });
        assert!(shallow.truncated && shallow.chains.is_empty());
    }
}
