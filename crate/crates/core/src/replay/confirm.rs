//! Running a task twice and judging whether the ablated action mattered.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ablation::{apply_ablation, Ablation};
use super::driver::AgentDriver;
use super::sandbox::Sandbox;
use super::ReplayError;
use crate::bundle::SkillBundle;
use crate::graph::{NodeId, UnifiedGraph};
use crate::lexicon;
use crate::oracle::{ActionRef, CoreEqRequest, ExecutionOutput, ExecutionTrace, OutEqRequest, SemanticOracle};
use crate::provenance::EditMap;
use crate::tasks::{ActionChain, TaskInstance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfirmOptions {
    pub order_sensitive: bool,
    pub out_eq_threshold: f64,
}

impl Default for ConfirmOptions {
    fn default() -> Self {
        ConfirmOptions { order_sensitive: true, out_eq_threshold: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub task: TaskInstance,
    pub action: ActionRef,
    pub ablation: Ablation,
    pub original: (ExecutionTrace, ExecutionOutput),
    pub replay: (ExecutionTrace, ExecutionOutput),
    pub triggered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverprivilegeVerdict {
    pub candidate: NodeId,
    pub task: TaskInstance,
    pub unnecessary: bool,
    pub core_eq: bool,
    pub out_eq: bool,
    pub candidate_executed_in_original: bool,
}

/// Runs one task in a sandbox after materializing its fixture. Any step
/// whose arguments leave the mock network aborts the run.
pub fn execute(
    bundle: &SkillBundle,
    task: &TaskInstance,
    driver: &dyn AgentDriver,
    sandbox: &Sandbox,
    origin: &EditMap,
) -> Result<(ExecutionTrace, ExecutionOutput), ReplayError> {
    if let Some(f) = &task.fixture {
        sandbox.materialize(f)?;
    }
    let (trace, output) = driver.run(bundle, task, sandbox, origin)?;
    for s in &trace.steps {
        if lexicon::is_url(&s.args) && !lexicon::url_host(&s.args).is_some_and(|h| lexicon::is_mock_host(&h)) {
            return Err(ReplayError::SandboxViolation(format!("step {} reached {}", s.tick, s.args)));
        }
    }
    if !trace.ticks_increasing() {
        return Err(ReplayError::DriverFailure("trace ticks are not increasing".into()));
    }
    Ok((trace, output))
}

/// The original run covers every action of the chain, with multiplicity.
pub fn chain_triggered(g: &UnifiedGraph, chain: &ActionChain, trace: &ExecutionTrace) -> bool {
    let mut need: BTreeMap<&str, usize> = BTreeMap::new();
    for a in chain.actions(g) {
        *need.entry(a.id.as_str()).or_default() += 1;
    }
    need.into_iter().all(|(id, n)| trace.steps.iter().filter(|s| s.node.as_deref() == Some(id)).count() >= n)
}

/// Executes the task on the bundle and on the bundle without `candidate`,
/// each in a fresh sandbox.
pub fn replay_task(
    bundle: &SkillBundle,
    g: &UnifiedGraph,
    task: &TaskInstance,
    candidate: &str,
    driver: &dyn AgentDriver,
) -> Result<ReplayRecord, ReplayError> {
    let a = g.action(candidate).ok_or_else(|| ReplayError::Graph(crate::graph::GraphError::UnknownNode(candidate.into())))?;
    let action = ActionRef { node: a.id.clone(), op: a.op.clone(), obj: a.obj.clone() };
    let original = execute(bundle, task, driver, &Sandbox::temp()?, &EditMap::default())?;
    let (ablated, ablation) = apply_ablation(bundle, g, candidate)?;
    let origin = EditMap::new(vec![ablation.edit.clone()]);
    let replay = execute(&ablated, task, driver, &Sandbox::temp()?, &origin)?;
    let triggered = chain_triggered(g, &task.chain, &original.0);
    Ok(ReplayRecord { task: task.clone(), action, ablation, original, replay, triggered })
}

/// `Unnec`: executed originally, gone after ablation, and both the core
/// flow and the task-relevant output are unchanged.
pub fn confirm_overprivilege(
    record: &ReplayRecord,
    oracle: &SemanticOracle,
    opts: ConfirmOptions,
) -> Result<OverprivilegeVerdict, ReplayError> {
    let id = &record.action.node;
    let executed = record.original.0.contains_node(id);
    let absent = !record.replay.0.contains_node(id);
    let core_eq = oracle.judge_core_eq(&CoreEqRequest {
        task: record.task.prompt.clone(),
        original: record.original.0.clone(),
        replay: record.replay.0.clone(),
        ablated: record.action.clone(),
        order_sensitive: opts.order_sensitive,
    })?;
    let out_eq = oracle.judge_out_eq(&OutEqRequest {
        task: record.task.prompt.clone(),
        original: record.original.1.clone(),
        replay: record.replay.1.clone(),
        threshold: opts.out_eq_threshold,
    })?;
    Ok(OverprivilegeVerdict {
        candidate: id.clone(),
        task: record.task.clone(),
        unnecessary: executed && absent && core_eq && out_eq,
        core_eq,
        out_eq,
        candidate_executed_in_original: executed,
    })
}
