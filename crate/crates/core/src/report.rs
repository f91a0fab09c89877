//! Machine-readable analysis report at skill, action and action-in-task granularity.

use serde::{Deserialize, Serialize};

use crate::candidates::{OverprivilegeCandidate, PrivilegeType};
use crate::graph::{Layer, NodeId, UnifiedGraph};
use crate::lexicon::Op;
use crate::replay::OverprivilegeVerdict;
use crate::tasks::FixtureKind;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSummary {
    pub node: NodeId,
    pub layer: Layer,
    pub op: Op,
    pub obj: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<String>,
    pub privilege_type: PrivilegeType,
    pub artifact: String,
    pub span: (usize, usize),
    pub excerpt: String,
    pub rationale: String,
    pub tasks_tested: usize,
    pub tasks_unnecessary: usize,
    pub overprivileged: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionInTask {
    pub candidate: NodeId,
    pub prompt: String,
    pub fixture: FixtureKind,
    pub chain: Vec<NodeId>,
    pub unnecessary: bool,
    pub core_eq: bool,
    pub out_eq: bool,
    pub candidate_executed_in_original: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainStats {
    pub chains: usize,
    pub tasks: usize,
    pub triggered: usize,
    pub untriggered: usize,
    pub unvalidatable: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSummary {
    pub action: NodeId,
    pub condition: String,
    pub instruction_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub skill: String,
    pub skill_verdict: bool,
    pub actions: Vec<ActionSummary>,
    pub action_in_task: Vec<ActionInTask>,
    pub chains: ChainStats,
    pub truncated: bool,
    #[serde(default)]
    pub constraints: Vec<ConstraintSummary>,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

impl AnalysisReport {
    pub fn assemble(
        g: &UnifiedGraph,
        candidates: &[OverprivilegeCandidate],
        verdicts: &[OverprivilegeVerdict],
        chains: ChainStats,
        truncated: bool,
        diagnostics: Vec<String>,
    ) -> Self {
        let actions = candidates
            .iter()
            .filter_map(|c| {
                let a = g.action(&c.node)?;
                let mine: Vec<&OverprivilegeVerdict> = verdicts.iter().filter(|v| v.candidate == c.node).collect();
                let positives = mine.iter().filter(|v| v.unnecessary).count();
                Some(ActionSummary {
                    node: c.node.clone(),
                    layer: c.layer,
                    op: a.op.clone(),
                    obj: a.obj.clone(),
                    destination: a.destination.clone(),
                    privilege_type: c.privilege_type,
                    artifact: a.src.artifact.key(),
                    span: (a.src.start(), a.src.end()),
                    excerpt: c.excerpt.clone(),
                    rationale: c.verdict.rationale.clone(),
                    tasks_tested: mine.len(),
                    tasks_unnecessary: positives,
                    overprivileged: positives > 0,
                })
            })
            .collect();
        let action_in_task: Vec<ActionInTask> = verdicts
            .iter()
            .map(|v| ActionInTask {
                candidate: v.candidate.clone(),
                prompt: v.task.prompt.clone(),
                fixture: v.task.fixture_kind(),
                chain: v.task.chain.nodes.clone(),
                unnecessary: v.unnecessary,
                core_eq: v.core_eq,
                out_eq: v.out_eq,
                candidate_executed_in_original: v.candidate_executed_in_original,
            })
            .collect();
        AnalysisReport {
            schema_version: SCHEMA_VERSION,
            skill: g.owning_skill.clone(),
            skill_verdict: action_in_task.iter().any(|t| t.unnecessary),
            actions,
            action_in_task,
            chains,
            truncated,
            constraints: Vec::new(),
            diagnostics,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Granularity consistency: action positives are exactly the actions
    /// with a positive task entry, and the skill verdict follows.
    pub fn is_consistent(&self) -> bool {
        let positive: std::collections::BTreeSet<&str> =
            self.action_in_task.iter().filter(|t| t.unnecessary).map(|t| t.candidate.as_str()).collect();
        let flagged: std::collections::BTreeSet<&str> =
            self.actions.iter().filter(|a| a.overprivileged).map(|a| a.node.as_str()).collect();
        positive == flagged && self.skill_verdict == !positive.is_empty()
    }
}
