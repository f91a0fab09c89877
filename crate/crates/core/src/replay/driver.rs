//! Deterministic graph-interpreting agent driver.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};

use super::sandbox::Sandbox;
use super::ReplayError;
use crate::bundle::SkillBundle;
use crate::constrain::{describe_prompt, requests_effect, GuardCondition};
use crate::graph::{build_graph, ActionNode, EdgeKind, Layer, Node, NodeId, PredKind, PredicateNode, UnifiedGraph, FALSE_LABEL, TRUE_LABEL};
use crate::lexicon::{self, Op};
use crate::oracle::{ExecutionOutput, ExecutionTrace, SemanticOracle, TraceStep};
use crate::provenance::EditMap;
use crate::tasks::TaskInstance;

/// Anything that can run a skill for a prompt inside a sandbox.
pub trait AgentDriver: Send + Sync {
    /// `origin` maps the run bundle back to the analysed bundle so that trace
    /// node ids are reported in the analysed bundle's terms.
    fn run(
        &self,
        bundle: &SkillBundle,
        task: &TaskInstance,
        sandbox: &Sandbox,
        origin: &EditMap,
    ) -> Result<(ExecutionTrace, ExecutionOutput), ReplayError>;
}

pub const DEFAULT_STEP_BUDGET: usize = 10_000;

pub struct GraphDriver<'o> {
    oracle: &'o SemanticOracle,
    step_budget: usize,
    cache: Mutex<BTreeMap<String, Arc<UnifiedGraph>>>,
}

impl<'o> GraphDriver<'o> {
    pub fn new(oracle: &'o SemanticOracle) -> Self {
        GraphDriver { oracle, step_budget: DEFAULT_STEP_BUDGET, cache: Mutex::new(BTreeMap::new()) }
    }

    pub fn with_step_budget(mut self, n: usize) -> Self {
        self.step_budget = n;
        self
    }

    /// Graph of a bundle, rebuilt once per distinct bundle content.
    pub fn graph(&self, bundle: &SkillBundle) -> Result<Arc<UnifiedGraph>, ReplayError> {
        let key = bundle.digest();
        if let Some(g) = self.cache.lock().expect("cache").get(&key) {
            return Ok(g.clone());
        }
        let g = Arc::new(build_graph(bundle, self.oracle)?);
        self.cache.lock().expect("cache").insert(key, g.clone());
        Ok(g)
    }
}

fn short_hash(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    hex::encode(&h.finalize()[..6])
}

fn path_like(obj: &str) -> bool {
    obj.contains('/') || obj.starts_with('~') || (obj.contains('.') && !obj.ends_with('.'))
}

/// Truth of a branch condition for a prompt: every content word of the
/// condition appears in the prompt. Code conditions with a fixed outcome
/// ignore the prompt.
pub fn branch_holds(phi: &str, layer: Layer, prompt: &str) -> bool {
    if layer == Layer::Code {
        if let Some(v) = crate::graph::fixed_code_condition(phi) {
            return v;
        }
    }
    let tokens = lexicon::content_tokens(prompt);
    lexicon::predicate_words(phi).iter().all(|w| tokens.contains(&lexicon::norm_token(w)))
}

/// Which outgoing label a predicate takes for the prompt.
pub fn predicate_takes_true(p: &PredicateNode, prompt: &str, first_visit: bool) -> bool {
    match p.pred_kind {
        PredKind::Loop => first_visit,
        PredKind::Guard => match GuardCondition::from_guard_text(&p.phi) {
            Some(g) => g.admits(prompt),
            None => branch_holds(&p.phi, p.layer, prompt) != p.negated,
        },
        PredKind::Branch => branch_holds(&p.phi, p.layer, prompt) != p.negated,
    }
}

/// Whether an action's result is part of what the user sees.
fn is_artifact(a: &ActionNode) -> bool {
    match a.op {
        Op::Generate | Op::Transform => true,
        Op::Write => !lexicon::is_outside_workspace(&a.obj),
        _ => false,
    }
}

struct Run<'a> {
    g: &'a UnifiedGraph,
    prompt: &'a str,
    sandbox: &'a Sandbox,
    origin: &'a EditMap,
    trace: ExecutionTrace,
    /// Last value produced by each action node, with the tick that produced it.
    values: BTreeMap<NodeId, (String, u64)>,
    output: ExecutionOutput,
}

impl Run<'_> {
    fn original_id(&self, a: &ActionNode) -> NodeId {
        match self.origin.to_original(&a.src.artifact, (a.src.start(), a.src.end())) {
            Some(r) => crate::graph::node_id(&a.src.artifact, r, &a.context),
            None => a.id.clone(),
        }
    }

    fn execute(&mut self, a: &ActionNode) -> Result<(), ReplayError> {
        let producers = self.g.data_producers(&a.id);
        let inputs: Vec<(&NodeId, &(String, u64))> =
            producers.iter().filter_map(|p| self.values.get_key_value(p)).collect();
        if !producers.is_empty() && inputs.is_empty() {
            return Ok(());
        }
        let canon = lexicon::canonical_object(&a.obj);
        let matching: Vec<&str> = inputs
            .iter()
            .filter(|(p, _)| self.g.action(p).is_some_and(|x| lexicon::canonical_object(&x.obj) == canon))
            .map(|(_, v)| v.0.as_str())
            .collect();
        let all: Vec<&str> = inputs.iter().map(|(_, v)| v.0.as_str()).collect();
        let dest = a.destination.clone().unwrap_or_else(|| "default".to_string());
        let mut args = a.obj.clone();
        let mut content = String::new();
        match a.op {
            Op::Read if path_like(&a.obj) => {
                let p = self.sandbox.map_path(&a.obj)?;
                content = fs::read(&p).map(|b| short_hash(&[&String::from_utf8_lossy(&b)])).unwrap_or_default();
            }
            Op::Send | Op::Receive => args = format!("mock://{}", dest.to_ascii_lowercase()),
            _ => {}
        }
        let mut parts: Vec<&str> = vec![a.op.as_str(), &a.obj, &content];
        parts.extend(all.iter().copied());
        let value = short_hash(&parts);
        let payload = if !matching.is_empty() {
            short_hash(&matching)
        } else if !all.is_empty() {
            short_hash(&all)
        } else {
            short_hash(&[&a.obj])
        };
        match a.op {
            Op::Write => {
                let target = if path_like(&a.obj) { a.obj.clone() } else { format!("{}.out", a.obj) };
                let p = self.sandbox.map_path(&target)?;
                if let Some(parent) = p.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::write(&p, &value)?;
                args = target;
            }
            Op::Send => self.sandbox.append_outbox(&args, &a.obj, &payload)?,
            Op::Delete if path_like(&a.obj) => {
                let p = self.sandbox.map_path(&a.obj)?;
                let _ = fs::remove_file(p);
            }
            _ => {}
        }
        let tick = self.trace.steps.len() as u64 + 1;
        let mut input_ticks: Vec<u64> = inputs.iter().map(|(_, v)| v.1).collect();
        input_ticks.sort_unstable();
        self.trace.steps.push(TraceStep {
            tick,
            op: a.op.clone(),
            obj: a.obj.clone(),
            args,
            node: Some(self.original_id(a)),
            inputs: input_ticks,
        });
        self.values.insert(a.id.clone(), (value.clone(), tick));
        if is_artifact(a) {
            let key = format!("artifact.{}", a.obj);
            self.output.structured.insert(key.clone(), value);
            self.output.relevant.insert(key);
        } else {
            let key = match &a.destination {
                Some(d) => format!("effect.{}.{}@{}", a.op, a.obj, d),
                None => format!("effect.{}.{}", a.op, a.obj),
            };
            let desc = describe_prompt(self.prompt, Some(&a.op));
            if requests_effect(&desc, &a.op, &a.obj, a.destination.as_deref()) {
                self.output.relevant.insert(key.clone());
            }
            self.output.structured.insert(key, payload);
        }
        Ok(())
    }
}

fn ctrl_next(g: &UnifiedGraph, id: &str, label: Option<&str>) -> Option<NodeId> {
    let mut edges: Vec<_> = g.out_edges(id).filter(|e| e.kind == EdgeKind::Ctrl).collect();
    edges.sort_by(|a, b| a.to.cmp(&b.to));
    if let Some(l) = label {
        if let Some(e) = edges.iter().find(|e| e.label.as_deref() == Some(l)) {
            return Some(e.to.clone());
        }
    }
    edges.first().map(|e| e.to.clone())
}

impl AgentDriver for GraphDriver<'_> {
    fn run(
        &self,
        bundle: &SkillBundle,
        task: &TaskInstance,
        sandbox: &Sandbox,
        origin: &EditMap,
    ) -> Result<(ExecutionTrace, ExecutionOutput), ReplayError> {
        let g = self.graph(bundle)?;
        let mut run = Run {
            g: &g,
            prompt: &task.prompt,
            sandbox,
            origin,
            trace: ExecutionTrace::default(),
            values: BTreeMap::new(),
            output: ExecutionOutput::default(),
        };
        let mut stack: Vec<NodeId> = Vec::new();
        let mut visited: BTreeSet<NodeId> = BTreeSet::new();
        let mut node = g.entry.clone();
        let mut budget = self.step_budget;
        loop {
            budget = budget.checked_sub(1).ok_or_else(|| ReplayError::DriverFailure("step budget exhausted".into()))?;
            let next = match g.node(&node)? {
                Node::Exit(_) if g.exits.contains(&node) => break,
                Node::Exit(_) => {
                    let caller = stack.pop().ok_or_else(|| ReplayError::DriverFailure(format!("return from {node} without caller")))?;
                    g.out_edges(&node)
                        .find(|e| e.kind == EdgeKind::Ret && e.label.as_deref() == Some(caller.as_str()))
                        .map(|e| e.to.clone())
                }
                Node::Entry(_) => ctrl_next(&g, &node, None),
                Node::Action(a) if a.is_invocation() => {
                    match g.out_edges(&node).find(|e| e.kind == EdgeKind::Call) {
                        Some(e) => {
                            stack.push(node.clone());
                            Some(e.to.clone())
                        }
                        None => ctrl_next(&g, &node, None),
                    }
                }
                Node::Action(a) => {
                    run.execute(a)?;
                    ctrl_next(&g, &node, None)
                }
                Node::Predicate(p) => {
                    let first = visited.insert(node.clone());
                    let label = if predicate_takes_true(p, &task.prompt, first) { TRUE_LABEL } else { FALSE_LABEL };
                    ctrl_next(&g, &node, Some(label))
                }
            };
            node = next.ok_or_else(|| ReplayError::DriverFailure(format!("no successor for {node}")))?;
        }
        let mut lines: Vec<String> = run
            .output
            .structured
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("artifact.").map(|o| format!("{o}: {v}")))
            .collect();
        lines.sort();
        run.output.text = if lines.is_empty() { "Done.".to_string() } else { lines.join("\n") };
        sandbox.write_trace(&run.trace)?;
        Ok((run.trace, run.output))
    }
}
