//! Context clustering and contrastive guard synthesis.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::descriptor::{describe_prompt, ExecutionScope, TaskContextDescriptor, ValidationResult};
use super::ConstrainError;
use crate::graph::ActionNode;
use crate::lexicon::{self, Op};
use crate::oracle::rules::guard_request;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClusterKey {
    pub op: Op,
    pub obj: String,
    pub scope: ExecutionScope,
    pub destination: Option<String>,
    pub explicit: bool,
}

impl ClusterKey {
    pub fn of(d: &TaskContextDescriptor) -> Self {
        ClusterKey {
            op: d.requested_operation.clone(),
            obj: d.operated_object.clone(),
            scope: d.execution_scope,
            destination: d.destination.as_ref().map(|s| s.to_ascii_lowercase()),
            explicit: d.explicit_side_effect_request,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextCluster {
    pub key: ClusterKey,
    pub descriptors: Vec<TaskContextDescriptor>,
    pub results: BTreeSet<ValidationResult>,
}

/// Groups descriptors by their normalized slot tuple, in key order.
pub fn normalize_and_cluster(descriptors: &[TaskContextDescriptor]) -> Vec<ContextCluster> {
    let mut map: BTreeMap<ClusterKey, ContextCluster> = BTreeMap::new();
    for d in descriptors {
        let key = ClusterKey::of(d);
        let c = map.entry(key.clone()).or_insert_with(|| ContextCluster {
            key,
            descriptors: Vec::new(),
            results: BTreeSet::new(),
        });
        c.descriptors.push(d.clone());
        c.results.insert(d.validation_result);
    }
    map.into_values().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "slot", content = "value", rename_all = "snake_case")]
pub enum Clause {
    ExplicitRequest(Op),
    Object(String),
    Destination(String),
    Scope(ExecutionScope),
}

impl Clause {
    pub fn holds(&self, d: &TaskContextDescriptor) -> bool {
        match self {
            Clause::ExplicitRequest(op) => d.explicit_side_effect_request && d.requested_operation == *op,
            Clause::Object(o) => d.operated_object == *o,
            Clause::Destination(t) => d.destination.as_deref().is_some_and(|x| lexicon::same_destination(x, t)),
            Clause::Scope(s) => d.execution_scope == *s,
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Clause::ExplicitRequest(op) => write!(f, "explicit_request({op})"),
            Clause::Object(o) => write!(f, "object={o}"),
            Clause::Destination(t) => write!(f, "destination={t}"),
            Clause::Scope(s) => write!(f, "scope={}", s.as_str()),
        }
    }
}

/// `C_a`: a conjunction of slot tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardCondition {
    pub clauses: Vec<Clause>,
}

impl GuardCondition {
    pub fn evaluate(&self, d: &TaskContextDescriptor) -> bool {
        self.clauses.iter().all(|c| c.holds(d))
    }

    pub fn operation(&self) -> Option<&Op> {
        self.clauses.iter().find_map(|c| match c {
            Clause::ExplicitRequest(op) => Some(op),
            _ => None,
        })
    }

    pub fn scope(&self) -> Option<ExecutionScope> {
        self.clauses.iter().find_map(|c| match c {
            Clause::Scope(s) => Some(*s),
            _ => None,
        })
    }

    /// Evaluates against a prompt, reading it with this guard's operation in focus.
    pub fn admits(&self, prompt: &str) -> bool {
        self.evaluate(&describe_prompt(prompt, self.operation()))
    }

    /// Recovers the condition from a rendered guard sentence condition.
    pub fn from_guard_text(phi: &str) -> Option<Self> {
        if !phi.to_ascii_lowercase().contains("explicitly asks to ") {
            return None;
        }
        let request = guard_request(phi);
        let d = describe_prompt(&request, None);
        if matches!(d.requested_operation, Op::Other(_)) {
            return None;
        }
        let mut clauses = vec![Clause::ExplicitRequest(d.requested_operation), Clause::Object(d.operated_object)];
        if let Some(t) = d.destination {
            clauses.push(Clause::Destination(t));
        }
        let lower = phi.to_ascii_lowercase();
        if let Some(i) = lower.rfind(", for ") {
            let tail = &lower[i + ", for ".len()..];
            if let Some(s) = tail.strip_suffix(" use").and_then(ExecutionScope::from_adjective) {
                clauses.push(Clause::Scope(s));
            }
        }
        Some(GuardCondition { clauses })
    }
}

impl fmt::Display for GuardCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.clauses.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(" ∧ "))
    }
}

fn verified(guard: &GuardCondition, clusters: &[ContextCluster]) -> bool {
    clusters.iter().all(|c| {
        c.descriptors.iter().all(|d| match d.validation_result {
            ValidationResult::Unnecessary => !guard.evaluate(d),
            ValidationResult::NecessaryOrUnconfirmed => guard.evaluate(d),
        })
    })
}

/// Contrastive construction: require an explicit request for exactly this
/// effect, tighten with the scope of the necessary contexts if needed.
pub fn synthesize_guard(clusters: &[ContextCluster], action: &ActionNode) -> Result<GuardCondition, ConstrainError> {
    if let Some(c) = clusters.iter().find(|c| c.results.len() > 1) {
        return Err(ConstrainError::Conflict(format!(
            "context {:?} is labelled both unnecessary and necessary for {}",
            c.key, action.id
        )));
    }
    let mut guard = GuardCondition {
        clauses: vec![
            Clause::ExplicitRequest(action.op.clone()),
            Clause::Object(lexicon::canonical_object(&action.obj)),
        ],
    };
    if let Some(t) = &action.destination {
        guard.clauses.push(Clause::Destination(t.clone()));
    }
    if verified(&guard, clusters) {
        return Ok(guard);
    }
    let scopes: BTreeSet<ExecutionScope> = clusters
        .iter()
        .filter(|c| c.results.contains(&ValidationResult::NecessaryOrUnconfirmed))
        .map(|c| c.key.scope)
        .collect();
    if scopes.len() == 1 {
        guard.clauses.push(Clause::Scope(*scopes.iter().next().unwrap()));
        if verified(&guard, clusters) {
            return Ok(guard);
        }
    }
    Err(ConstrainError::Conflict(format!(
        "no slot conjunction separates the contexts of {}",
        action.id
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Layer;
    use crate::provenance::{Artifact, Provenance};

    fn labelled(prompt: &str, r: ValidationResult) -> TaskContextDescriptor {
        let mut d = describe_prompt(prompt, Some(&Op::Send));
        d.validation_result = r;
        d
    }

    fn send_action() -> ActionNode {
        ActionNode {
            id: "n1".into(),
            layer: Layer::Instr,
            op: Op::Send,
            obj: "report".into(),
            destination: Some("Telegram".into()),
            invokes: None,
            phrase: "send the report to Telegram".into(),
            function: None,
            unparsed: false,
            context: String::new(),
            src: Provenance::new(Artifact::Instruction, "s", 0, 1),
        }
    }

    fn worked_prompts() -> Vec<TaskContextDescriptor> {
        use ValidationResult::*;
        vec![
            labelled("Generate a local report for my deep-work history.", Unnecessary),
            labelled("Show my deep-work heatmap locally.", Unnecessary),
            labelled("Generate the report and send it to Alex on Telegram.", NecessaryOrUnconfirmed),
            labelled("Sync the report to the configured Telegram recipient.", NecessaryOrUnconfirmed),
        ]
    }

    #[test]
    fn two_clusters_and_the_expected_guard() {
        let clusters = normalize_and_cluster(&worked_prompts());
        assert_eq!(clusters.len(), 2);
        let g = synthesize_guard(&clusters, &send_action()).unwrap();
        assert_eq!(g.to_string(), "explicit_request(send) ∧ object=report ∧ destination=Telegram");
    }

    #[test]
    fn send_and_sync_share_a_cluster() {
        let a = labelled("Send the report to Telegram.", ValidationResult::Unnecessary);
        let b = labelled("Sync the report to Telegram.", ValidationResult::Unnecessary);
        assert_eq!(normalize_and_cluster(&[a, b]).len(), 1);
    }

    #[test]
    fn contradiction_is_a_conflict() {
        let a = labelled("Send the report to Telegram.", ValidationResult::Unnecessary);
        let b = labelled("Send the report to Telegram.", ValidationResult::NecessaryOrUnconfirmed);
        let r = synthesize_guard(&normalize_and_cluster(&[a, b]), &send_action());
        assert!(matches!(r, Err(ConstrainError::Conflict(_))));
    }

    #[test]
    fn unnecessary_everywhere_still_guards() {
        let a = labelled("Show my deep-work heatmap locally.", ValidationResult::Unnecessary);
        let g = synthesize_guard(&normalize_and_cluster(&[a]), &send_action()).unwrap();
        assert!(matches!(g.clauses[0], Clause::ExplicitRequest(Op::Send)));
    }

    #[test]
    fn text_round_trip() {
        let phi = "the user explicitly asks to send the report to Telegram";
        let g = GuardCondition::from_guard_text(phi).unwrap();
        assert_eq!(g.to_string(), "explicit_request(send) ∧ object=report ∧ destination=Telegram");
        let scoped = GuardCondition::from_guard_text("the user explicitly asks to collect the host identifiers, for external use").unwrap();
        assert_eq!(scoped.scope(), Some(ExecutionScope::External));
        assert!(GuardCondition::from_guard_text("the user wants a chart").is_none());
    }
}
