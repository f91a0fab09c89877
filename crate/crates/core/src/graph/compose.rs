//! Cross-layer composition: call and return edges between instruction steps
//! and the scripts they invoke.

use std::collections::BTreeMap;

use super::{EdgeKind, UnifiedGraph};

/// Links every invoking instruction node to its script and merges the code
/// graphs. Scripts nobody invokes stay in the graph as detached subgraphs.
pub fn compose_graph(instr: UnifiedGraph, code_graphs: BTreeMap<String, UnifiedGraph>) -> UnifiedGraph {
    let mut g = instr;
    let invoking: Vec<(String, String)> = g
        .actions()
        .filter_map(|a| a.invokes.clone().map(|p| (a.id.clone(), p)))
        .collect();
    let mut links = Vec::new();
    for (id, path) in invoking {
        match code_graphs.get(&path) {
            Some(cg) => {
                let succs: Vec<String> = g.ctrl_successors(&id).into_iter().map(|e| e.to.clone()).collect();
                links.push((id, cg.entry.clone(), cg.exit().to_string(), succs));
            }
            None => g
                .diagnostics
                .push(format!("DanglingInvocation: {id} references missing script {path}")),
        }
    }
    for cg in code_graphs.into_values() {
        g.absorb(cg);
    }
    for (id, entry, exit, succs) in links {
        g.add_edge(EdgeKind::Call, &id, &entry, None);
        for s in succs {
            g.add_edge(EdgeKind::Ret, &exit, &s, Some(id.clone()));
        }
    }
    g.refresh_detached();
    g.canonicalize();
    g
}
