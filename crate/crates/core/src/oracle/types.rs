//! Request and response payloads exchanged with an oracle backend.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bundle::SkillProfile;
use crate::graph::{ActionNode, BidirectionalContext, NodeId};
use crate::lexicon::Op;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Related,
    Candidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyVerdict {
    pub verdict: Verdict,
    pub rationale: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub profile: SkillProfile,
    pub action: ActionNode,
    pub context: BidirectionalContext,
}

/// One element of a chain as seen by prompt synthesis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum PromptStep {
    Action {
        op: Op,
        obj: String,
        #[serde(default)]
        destination: Option<String>,
        phrase: String,
        excerpt: String,
    },
    /// A branch predicate; `include` means the chain needs its condition to hold literally.
    Branch { phi: String, include: bool },
    /// A task guard and whether the chain passes through it.
    Guard { phi: String, taken: bool },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub profile: SkillProfile,
    pub steps: Vec<PromptStep>,
}

/// One intercepted effect of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub tick: u64,
    pub op: Op,
    pub obj: String,
    pub args: String,
    pub node: Option<NodeId>,
    /// Ticks of the steps whose values this step consumed.
    #[serde(default)]
    pub inputs: Vec<u64>,
}

/// `tau(sigma, p)`: the ordered, parameterized action sequence of a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub steps: Vec<TraceStep>,
}

impl ExecutionTrace {
    pub fn ticks_increasing(&self) -> bool {
        self.steps.windows(2).all(|w| w[0].tick < w[1].tick)
    }

    pub fn contains_node(&self, id: &str) -> bool {
        self.steps.iter().any(|s| s.node.as_deref() == Some(id))
    }

    pub fn op_obj(&self) -> Vec<(Op, String)> {
        self.steps.iter().map(|s| (s.op.clone(), s.obj.clone())).collect()
    }
}

/// `o(sigma, p)`: structured fields plus the user-visible text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionOutput {
    pub structured: BTreeMap<String, String>,
    /// Keys of `structured` that matter for the task that produced the run.
    pub relevant: BTreeSet<String>,
    pub text: String,
}

/// The ablated action as referenced by the judges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRef {
    pub node: NodeId,
    pub op: Op,
    pub obj: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreEqRequest {
    pub task: String,
    pub original: ExecutionTrace,
    pub replay: ExecutionTrace,
    pub ablated: ActionRef,
    pub order_sensitive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutEqRequest {
    pub task: String,
    pub original: ExecutionOutput,
    pub replay: ExecutionOutput,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardForm {
    /// Gate the step that follows.
    Next,
    /// Run a separate unit in place of the step that follows.
    Instead,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardTextRequest {
    pub op: Op,
    pub obj: String,
    #[serde(default)]
    pub destination: Option<String>,
    /// Scope clause added when the base condition had to be tightened.
    #[serde(default)]
    pub scope: Option<String>,
    pub form: GuardForm,
    #[serde(default)]
    pub command: Option<String>,
}
