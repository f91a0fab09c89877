//! Unified execution graph over instruction-level and code-level behavior.

pub mod compose;
pub mod context;
pub mod instr;
pub mod python;
pub mod shell;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bundle::{LanguageHint, SkillBundle};
use crate::lexicon::Op;
use crate::oracle::{OracleError, SemanticOracle};
use crate::provenance::{Artifact, Provenance};

pub use compose::compose_graph;
pub use context::{context_window, BidirectionalContext};
pub use instr::build_instruction_graph;

pub type NodeId = String;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("oracle failure: {0}")]
    OracleFailure(#[from] OracleError),
    #[error("malformed graph json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Instr,
    Code,
}

impl Layer {
    pub fn of(artifact: &Artifact) -> Layer {
        match artifact {
            Artifact::Script(_) => Layer::Code,
            _ => Layer::Instr,
        }
    }
}

/// `v = <layer, op, obj>` plus the details later stages need.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionNode {
    pub id: NodeId,
    pub layer: Layer,
    pub op: Op,
    pub obj: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<String>,
    /// Script path when the action invokes a bundled script.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invokes: Option<String>,
    /// Verb phrase as written, used for prompts and guard text.
    pub phrase: String,
    /// Enclosing function for code nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unparsed: bool,
    /// Splice context for function bodies inlined more than once.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub context: String,
    pub src: Provenance,
}

impl ActionNode {
    pub fn is_invocation(&self) -> bool {
        self.invokes.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredKind {
    Branch,
    Loop,
    Guard,
}

/// `p = <layer, phi>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateNode {
    pub id: NodeId,
    pub layer: Layer,
    pub phi: String,
    pub pred_kind: PredKind,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub negated: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub context: String,
    pub src: Provenance,
}

/// Synthetic entry or exit of one artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terminal {
    pub id: NodeId,
    pub layer: Layer,
    pub artifact: Artifact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Entry(Terminal),
    Exit(Terminal),
    Action(ActionNode),
    Predicate(PredicateNode),
}

impl Node {
    pub fn id(&self) -> &str {
        match self {
            Node::Entry(t) | Node::Exit(t) => &t.id,
            Node::Action(a) => &a.id,
            Node::Predicate(p) => &p.id,
        }
    }

    pub fn layer(&self) -> Layer {
        match self {
            Node::Entry(t) | Node::Exit(t) => t.layer,
            Node::Action(a) => a.layer,
            Node::Predicate(p) => p.layer,
        }
    }

    pub fn artifact(&self) -> &Artifact {
        match self {
            Node::Entry(t) | Node::Exit(t) => &t.artifact,
            Node::Action(a) => &a.src.artifact,
            Node::Predicate(p) => &p.src.artifact,
        }
    }

    pub fn src(&self) -> Option<&Provenance> {
        match self {
            Node::Action(a) => Some(&a.src),
            Node::Predicate(p) => Some(&p.src),
            _ => None,
        }
    }

    pub fn as_action(&self) -> Option<&ActionNode> {
        match self {
            Node::Action(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_predicate(&self) -> Option<&PredicateNode> {
        match self {
            Node::Predicate(p) => Some(p),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Ctrl,
    Data,
    Call,
    Ret,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EdgeKind::Ctrl => "ctrl",
            EdgeKind::Data => "data",
            EdgeKind::Call => "call",
            EdgeKind::Ret => "ret",
        };
        f.write_str(s)
    }
}

/// Ctrl edges out of predicates carry `T`/`F`; data edges carry the object;
/// ret edges carry the id of the invoking node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub kind: EdgeKind,
    pub from: NodeId,
    pub to: NodeId,
    #[serde(default)]
    pub label: Option<String>,
}

pub const TRUE_LABEL: &str = "T";
pub const FALSE_LABEL: &str = "F";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnifiedGraph {
    pub owning_skill: String,
    pub entry: NodeId,
    pub exits: BTreeSet<NodeId>,
    #[serde(with = "node_list")]
    pub nodes: BTreeMap<NodeId, Node>,
    pub edges: Vec<Edge>,
    /// Nodes not reachable from `entry` (unreferenced scripts, uncalled functions).
    #[serde(default)]
    pub detached: BTreeSet<NodeId>,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

/// Nodes serialize as an id-ordered list.
mod node_list {
    use super::{Node, NodeId};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(nodes: &BTreeMap<NodeId, Node>, s: S) -> Result<S::Ok, S::Error> {
        nodes.values().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<NodeId, Node>, D::Error> {
        let list = Vec::<Node>::deserialize(d)?;
        Ok(list.into_iter().map(|n| (n.id().to_string(), n)).collect())
    }
}

/// Canonical node id: hash of artifact, byte range and an optional splice context.
pub fn node_id(artifact: &Artifact, range: (usize, usize), context: &str) -> NodeId {
    let mut h = Sha256::new();
    h.update(artifact.key().as_bytes());
    h.update(format!(":{}:{}", range.0, range.1).as_bytes());
    if !context.is_empty() {
        h.update(b"@");
        h.update(context.as_bytes());
    }
    format!("n{}", hex::encode(&h.finalize()[..8]))
}

pub fn terminal_id(artifact: &Artifact, which: &str) -> NodeId {
    let mut h = Sha256::new();
    h.update(artifact.key().as_bytes());
    h.update(b":");
    h.update(which.as_bytes());
    format!("n{}", hex::encode(&h.finalize()[..8]))
}

impl UnifiedGraph {
    /// Entry/exit skeleton for one artifact.
    pub fn skeleton(owning_skill: &str, artifact: &Artifact) -> Self {
        let layer = Layer::of(artifact);
        let entry = terminal_id(artifact, "entry");
        let exit = terminal_id(artifact, "exit");
        let mut nodes = BTreeMap::new();
        nodes.insert(
            entry.clone(),
            Node::Entry(Terminal { id: entry.clone(), layer, artifact: artifact.clone() }),
        );
        nodes.insert(
            exit.clone(),
            Node::Exit(Terminal { id: exit.clone(), layer, artifact: artifact.clone() }),
        );
        UnifiedGraph {
            owning_skill: owning_skill.to_string(),
            entry,
            exits: BTreeSet::from([exit]),
            nodes,
            edges: Vec::new(),
            detached: BTreeSet::new(),
            diagnostics: Vec::new(),
        }
    }

    pub fn exit(&self) -> &str {
        self.exits.iter().next().map(String::as_str).unwrap_or("")
    }

    pub fn node(&self, id: &str) -> Result<&Node, GraphError> {
        self.nodes.get(id).ok_or_else(|| GraphError::UnknownNode(id.to_string()))
    }

    pub fn action(&self, id: &str) -> Option<&ActionNode> {
        self.nodes.get(id).and_then(Node::as_action)
    }

    pub fn predicate(&self, id: &str) -> Option<&PredicateNode> {
        self.nodes.get(id).and_then(Node::as_predicate)
    }

    /// Action nodes in id order.
    pub fn actions(&self) -> impl Iterator<Item = &ActionNode> {
        self.nodes.values().filter_map(Node::as_action)
    }

    pub fn predicates(&self) -> impl Iterator<Item = &PredicateNode> {
        self.nodes.values().filter_map(Node::as_predicate)
    }

    pub fn add_edge(&mut self, kind: EdgeKind, from: &str, to: &str, label: Option<String>) {
        let e = Edge { kind, from: from.to_string(), to: to.to_string(), label };
        if !self.edges.contains(&e) {
            self.edges.push(e);
        }
    }

    pub fn out_edges<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.from == id)
    }

    pub fn in_edges<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.to == id)
    }

    pub fn ctrl_successors<'a>(&'a self, id: &'a str) -> Vec<&'a Edge> {
        self.out_edges(id).filter(|e| e.kind == EdgeKind::Ctrl).collect()
    }

    /// Producers feeding `id` through data edges.
    pub fn data_producers(&self, id: &str) -> BTreeSet<NodeId> {
        self.in_edges(id)
            .filter(|e| e.kind == EdgeKind::Data)
            .map(|e| e.from.clone())
            .collect()
    }

    /// Merges another partial graph's nodes and edges (not its entry/exits).
    pub fn absorb(&mut self, other: UnifiedGraph) {
        self.nodes.extend(other.nodes);
        for e in other.edges {
            if !self.edges.contains(&e) {
                self.edges.push(e);
            }
        }
        self.detached.extend(other.detached);
        self.diagnostics.extend(other.diagnostics);
    }

    /// Nodes reachable from `entry` through ctrl, call and ret edges.
    pub fn reachable(&self) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::from([self.entry.clone()]);
        let mut queue = VecDeque::from([self.entry.clone()]);
        while let Some(n) = queue.pop_front() {
            for e in self.out_edges(&n) {
                if e.kind != EdgeKind::Data && seen.insert(e.to.clone()) {
                    queue.push_back(e.to.clone());
                }
            }
        }
        seen
    }

    /// Recomputes the `detached` flag set from reachability.
    pub fn refresh_detached(&mut self) {
        let reach = self.reachable();
        self.detached = self.nodes.keys().filter(|id| !reach.contains(*id)).cloned().collect();
    }

    /// Sorts edges so that equal graphs serialize identically.
    pub fn canonicalize(&mut self) {
        self.edges.sort();
        self.edges.dedup();
        self.diagnostics.sort();
        self.diagnostics.dedup();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Structural invariant check; an empty list means the graph is well-formed.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (id, n) in &self.nodes {
            if id != n.id() {
                out.push(format!("node key {id} differs from node id {}", n.id()));
            }
            if n.layer() != Layer::of(n.artifact()) {
                out.push(format!("node {id} layer disagrees with its artifact"));
            }
            match n {
                Node::Action(a) if a.src.excerpt.is_empty() => {
                    out.push(format!("action {id} has empty provenance"))
                }
                Node::Predicate(p) if p.phi.trim().is_empty() => {
                    out.push(format!("predicate {id} has empty phi"))
                }
                Node::Predicate(p) if p.src.excerpt.is_empty() => {
                    out.push(format!("predicate {id} has empty provenance"))
                }
                _ => {}
            }
        }
        if !self.nodes.contains_key(&self.entry) {
            out.push("entry missing".into());
        }
        for x in &self.exits {
            if !self.nodes.contains_key(x) {
                out.push(format!("exit {x} missing"));
            }
        }
        for e in &self.edges {
            for end in [&e.from, &e.to] {
                if !self.nodes.contains_key(end) {
                    out.push(format!("{} edge endpoint {end} missing", e.kind));
                }
            }
            if e.kind == EdgeKind::Ctrl && e.from == e.to {
                out.push(format!("ctrl self-loop on {}", e.from));
            }
            if e.kind == EdgeKind::Ctrl && e.to == self.entry {
                out.push("entry has an incoming ctrl edge".into());
            }
        }
        for call in self.edges.iter().filter(|e| e.kind == EdgeKind::Call) {
            let from_ok = matches!(self.nodes.get(&call.from), Some(Node::Action(a)) if a.layer == Layer::Instr);
            let to_ok = matches!(self.nodes.get(&call.to), Some(Node::Entry(t)) if t.layer == Layer::Code);
            if !from_ok || !to_ok {
                out.push(format!("call edge {} -> {} is not instr action -> code entry", call.from, call.to));
                continue;
            }
            let Some(Node::Entry(t)) = self.nodes.get(&call.to) else { continue };
            let exit = terminal_id(&t.artifact, "exit");
            for succ in self.ctrl_successors(&call.from) {
                let paired = self.edges.iter().any(|r| {
                    r.kind == EdgeKind::Ret
                        && r.from == exit
                        && r.to == succ.to
                        && r.label.as_deref() == Some(call.from.as_str())
                });
                if !paired {
                    out.push(format!("call edge from {} lacks a ret edge to {}", call.from, succ.to));
                }
            }
        }
        for ret in self.edges.iter().filter(|e| e.kind == EdgeKind::Ret) {
            let from_ok = matches!(self.nodes.get(&ret.from), Some(Node::Exit(t)) if t.layer == Layer::Code);
            let to_ok = self.nodes.get(&ret.to).is_some_and(|n| n.layer() == Layer::Instr);
            if !from_ok || !to_ok {
                out.push(format!("ret edge {} -> {} is not code exit -> instr node", ret.from, ret.to));
            }
        }
        let reach = self.reachable();
        for id in self.nodes.keys() {
            if !reach.contains(id) && !self.detached.contains(id) {
                out.push(format!("node {id} is unreachable and not flagged detached"));
            }
        }
        out
    }

    /// Provenance totality against the bundle the graph was built from.
    pub fn provenance_violations(&self, bundle: &SkillBundle) -> Vec<String> {
        self.nodes
            .values()
            .filter_map(|n| n.src().map(|s| (n.id(), s)))
            .filter(|(_, s)| !bundle.provenance_holds(s))
            .map(|(id, s)| format!("node {id} provenance does not match {}", s.artifact))
            .collect()
    }
}

/// Shared construction state: ctrl edges are added lazily from a list of
/// pending out-edges whenever the next node is created.
pub(crate) struct Builder {
    pub g: UnifiedGraph,
    pub pending: Vec<(NodeId, Option<String>)>,
}

impl Builder {
    pub fn new(owning_skill: &str, artifact: Artifact) -> Self {
        let g = UnifiedGraph::skeleton(owning_skill, &artifact);
        let pending = vec![(g.entry.clone(), None)];
        Builder { g, pending }
    }

    pub fn connect_to(&mut self, to: &str) {
        for (from, label) in std::mem::take(&mut self.pending) {
            if from != to {
                self.g.add_edge(EdgeKind::Ctrl, &from, to, label);
            }
        }
    }

    pub fn add_node(&mut self, node: Node) -> NodeId {
        let id = node.id().to_string();
        self.g.nodes.entry(id.clone()).or_insert(node);
        self.connect_to(&id);
        self.pending = vec![(id.clone(), None)];
        id
    }

    pub fn finish(mut self) -> UnifiedGraph {
        let exit = self.g.exit().to_string();
        self.connect_to(&exit);
        self.g.refresh_detached();
        self.g.canonicalize();
        self.g
    }
}

/// Options for graph construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub max_splice_depth: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { max_splice_depth: 8 }
    }
}

/// Builds the code-layer graph for one script.
pub fn build_code_graph(owning_skill: &str, script: &crate::bundle::ScriptArtifact) -> UnifiedGraph {
    match script.language_hint {
        LanguageHint::Python => python::build(owning_skill, script, BuildOptions::default()),
        LanguageHint::Shell => shell::build(owning_skill, script),
        LanguageHint::Other => opaque_graph(owning_skill, script, "unsupported script language"),
    }
}

/// A script that cannot be analyzed becomes one opaque exec node.
pub(crate) fn opaque_graph(
    owning_skill: &str,
    script: &crate::bundle::ScriptArtifact,
    reason: &str,
) -> UnifiedGraph {
    let artifact = Artifact::Script(script.relative_path.clone());
    let mut b = Builder::new(owning_skill, artifact.clone());
    if !script.source.trim().is_empty() {
        let start = script.source.len() - script.source.trim_start().len();
        let end = script.source.trim_end().len();
        let src = Provenance::new(artifact.clone(), &script.source, start, end);
        b.add_node(Node::Action(ActionNode {
            id: node_id(&artifact, (start, end), ""),
            layer: Layer::Code,
            op: Op::Exec,
            obj: script.relative_path.clone(),
            destination: None,
            invokes: None,
            phrase: format!("run {}", script.relative_path),
            function: None,
            unparsed: true,
            context: String::new(),
            src,
        }));
    }
    b.g.diagnostics.push(format!("{}: {reason}", script.relative_path));
    b.finish()
}

/// Outcome of a code condition that no user prompt can influence: literal
/// constants, and reads of the process environment, which is empty under
/// replay.
pub fn fixed_code_condition(phi: &str) -> Option<bool> {
    let t = phi.trim().trim_start_matches('(').trim_end_matches(')').trim();
    match t {
        "False" | "None" | "0" | "false" | "\"\"" | "''" => return Some(false),
        "True" | "1" | "true" | ":" => return Some(true),
        _ => {}
    }
    if t.contains("environ") || t.contains("getenv") || t.contains("$ALLOW") || t.contains("${") {
        return Some(false);
    }
    None
}

/// Full construction: instruction graph, one code graph per script, composition.
pub fn build_graph(bundle: &SkillBundle, oracle: &SemanticOracle) -> Result<UnifiedGraph, GraphError> {
    let instr = build_instruction_graph(&bundle.instruction_doc, &bundle.metadata.name, oracle)?;
    let code: BTreeMap<String, UnifiedGraph> = bundle
        .scripts
        .iter()
        .map(|s| (s.relative_path.clone(), build_code_graph(&bundle.metadata.name, s)))
        .collect();
    Ok(compose_graph(instr, code))
}
