//! Bounded bidirectional neighbourhoods used by consistency screening.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{EdgeKind, GraphError, Node, NodeId, UnifiedGraph};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BidirectionalContext {
    pub node: NodeId,
    pub radius: usize,
    /// Backward neighbourhood in BFS order, ids sorted within a level.
    pub predecessors: Vec<NodeId>,
    pub successors: Vec<NodeId>,
    pub guards: Vec<NodeId>,
}

impl BidirectionalContext {
    /// Context with the backward half cleared.
    pub fn without_backward(mut self) -> Self {
        self.predecessors.clear();
        self.guards.clear();
        self
    }
}

fn bfs(g: &UnifiedGraph, start: &str, radius: usize, forward: bool) -> Vec<NodeId> {
    let mut seen = BTreeSet::from([start.to_string()]);
    let mut frontier = vec![start.to_string()];
    let mut out = Vec::new();
    for _ in 0..radius {
        let mut next = BTreeSet::new();
        for n in &frontier {
            for e in &g.edges {
                if !matches!(e.kind, EdgeKind::Ctrl | EdgeKind::Data) {
                    continue;
                }
                let (a, b) = if forward { (&e.from, &e.to) } else { (&e.to, &e.from) };
                if a == n && !seen.contains(b) {
                    next.insert(b.clone());
                }
            }
        }
        if next.is_empty() {
            break;
        }
        seen.extend(next.iter().cloned());
        out.extend(next.iter().cloned());
        frontier = next.into_iter().collect();
    }
    out
}

pub fn context_window(g: &UnifiedGraph, node: &str, radius: usize) -> Result<BidirectionalContext, GraphError> {
    g.node(node)?;
    let predecessors = bfs(g, node, radius, false);
    let successors = bfs(g, node, radius, true);
    let is_pred = |id: &str| matches!(g.nodes.get(id), Some(Node::Predicate(_)));
    let mut guards: Vec<NodeId> = Vec::new();
    let direct: BTreeSet<NodeId> = g
        .in_edges(node)
        .filter(|e| e.kind == EdgeKind::Ctrl && is_pred(&e.from))
        .map(|e| e.from.clone())
        .collect();
    guards.extend(direct.iter().cloned());
    for p in &predecessors {
        if is_pred(p) && !direct.contains(p) {
            guards.push(p.clone());
        }
    }
    Ok(BidirectionalContext { node: node.to_string(), radius, predecessors, successors, guards })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::instr::{assemble, fragments, normalize_rules};
    use crate::bundle::InstructionDoc;

    fn graph(body: &str) -> UnifiedGraph {
        let doc = InstructionDoc::parse(body).unwrap().0;
        assemble(&doc, "t", &normalize_rules(&fragments(&doc)))
    }

    #[test]
    fn entry_has_no_backward_context() {
        let g = graph("1. Read the records.\n2. Send the report to Telegram.\n");
        let c = context_window(&g, &g.entry, 1).unwrap();
        assert!(c.predecessors.is_empty());
        assert_eq!(c.successors.len(), 1);
    }

    #[test]
    fn radius_zero_keeps_direct_guards_only() {
        let g = graph("If the user wants a sync, send the report to Telegram.\n");
        let send = g.actions().find(|a| a.obj == "report").unwrap().id.clone();
        let c = context_window(&g, &send, 0).unwrap();
        assert!(c.predecessors.is_empty() && c.successors.is_empty());
        assert_eq!(c.guards.len(), 1);
    }

    #[test]
    fn unknown_node_errors() {
        let g = graph("");
        assert!(matches!(context_window(&g, "nope", 1), Err(GraphError::UnknownNode(_))));
    }
}
