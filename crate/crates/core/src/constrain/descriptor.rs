//! Fixed-slot task descriptors extracted from prompts.

use serde::{Deserialize, Serialize};

use crate::lexicon::{self, Op, ResourceClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionScope {
    LocalOnly,
    CrossResource,
    External,
    Other,
}

impl ExecutionScope {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecutionScope::LocalOnly => "local_only",
            ExecutionScope::CrossResource => "cross_resource",
            ExecutionScope::External => "external",
            ExecutionScope::Other => "other",
        }
    }

    /// Adjective used in intents and guard sentences.
    pub fn adjective(self) -> &'static str {
        match self {
            ExecutionScope::LocalOnly => "local",
            ExecutionScope::CrossResource => "cross-resource",
            ExecutionScope::External => "external",
            ExecutionScope::Other => "other",
        }
    }

    pub fn from_adjective(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "local" | "local_only" | "local-only" => Some(ExecutionScope::LocalOnly),
            "cross-resource" | "cross_resource" => Some(ExecutionScope::CrossResource),
            "external" => Some(ExecutionScope::External),
            "other" => Some(ExecutionScope::Other),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationResult {
    Unnecessary,
    NecessaryOrUnconfirmed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskContextDescriptor {
    pub task_intent: String,
    pub requested_operation: Op,
    /// Canonical head noun of the requested object.
    pub operated_object: String,
    pub execution_scope: ExecutionScope,
    pub destination: Option<String>,
    pub explicit_side_effect_request: bool,
    pub validation_result: ValidationResult,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

struct VerbSlot {
    op: Op,
    obj: Option<String>,
}

fn verb_slots(prompt: &str) -> Vec<VerbSlot> {
    let ws = lexicon::words(prompt);
    let mut out: Vec<VerbSlot> = Vec::new();
    let mut i = 0;
    while i < ws.len() {
        let Some(op) = lexicon::op_for_verb(&ws[i].lower) else {
            i += 1;
            continue;
        };
        let mut np: Vec<String> = Vec::new();
        let mut j = i + 1;
        while j < ws.len() && !lexicon::is_boundary(&ws[j].lower) && lexicon::op_for_verb(&ws[j].lower).is_none() {
            np.push(ws[j].lower.clone());
            j += 1;
        }
        let obj = if np.len() == 1 && lexicon::is_pronoun(&np[0]) {
            out.iter().rev().find_map(|s| s.obj.clone())
        } else {
            lexicon::object_from_words(&np)
        };
        out.push(VerbSlot { op, obj });
        i = j.max(i + 1);
    }
    out
}

fn scope_of(prompt: &str, op: &Op, destination: &Option<String>) -> ExecutionScope {
    if destination.is_some() || *op == Op::Send {
        return ExecutionScope::External;
    }
    let mut classes: Vec<ResourceClass> = lexicon::words(prompt)
        .iter()
        .flat_map(|w| lexicon::split_compound(&w.lower))
        .filter_map(|w| lexicon::resource_class(&w))
        .collect();
    classes.sort_by_key(|c| *c as u8);
    classes.dedup();
    if *op == Op::Receive || classes.len() >= 2 {
        ExecutionScope::CrossResource
    } else {
        ExecutionScope::LocalOnly
    }
}

/// Slot grammar over a prompt. With a focus operation, a verb mapping to it
/// is preferred and counts as an explicit request for it.
pub fn describe_prompt(prompt: &str, focus: Option<&Op>) -> TaskContextDescriptor {
    let slots = verb_slots(prompt);
    let focused = focus.and_then(|f| slots.iter().find(|s| s.op == *f));
    let chosen = focused
        .or_else(|| slots.iter().find(|s| s.op.is_side_effect()))
        .or_else(|| slots.first());
    let Some(slot) = chosen else {
        return TaskContextDescriptor {
            task_intent: "other".into(),
            requested_operation: Op::Other("other".into()),
            operated_object: "other".into(),
            execution_scope: ExecutionScope::Other,
            destination: None,
            explicit_side_effect_request: false,
            validation_result: ValidationResult::NecessaryOrUnconfirmed,
            diagnostics: vec![format!("no operation found in prompt {prompt:?}")],
        };
    };
    let explicit = match focus {
        Some(_) => focused.is_some(),
        None => slot.op.is_side_effect(),
    };
    let mut diagnostics = Vec::new();
    let obj = match &slot.obj {
        Some(o) => lexicon::canonical_object(o),
        None => {
            diagnostics.push("no object found for the requested operation".to_string());
            "other".to_string()
        }
    };
    let destination = lexicon::destination_in(prompt);
    let scope = scope_of(prompt, &slot.op, &destination);
    TaskContextDescriptor {
        task_intent: format!("{} {} {}", scope.adjective(), obj, slot.op.noun()),
        requested_operation: slot.op.clone(),
        operated_object: obj,
        execution_scope: scope,
        destination,
        explicit_side_effect_request: explicit,
        validation_result: ValidationResult::NecessaryOrUnconfirmed,
        diagnostics,
    }
}

/// Descriptor of a validated task with respect to one action.
pub fn extract_descriptor(
    task: &crate::tasks::TaskInstance,
    action: &crate::graph::ActionNode,
    verdict: &crate::replay::OverprivilegeVerdict,
) -> TaskContextDescriptor {
    let mut d = describe_prompt(&task.prompt, Some(&action.op));
    d.validation_result = if verdict.unnecessary {
        ValidationResult::Unnecessary
    } else {
        ValidationResult::NecessaryOrUnconfirmed
    };
    d
}

/// Whether the described task explicitly asks for this exact effect.
pub fn requests_effect(desc: &TaskContextDescriptor, op: &Op, obj: &str, destination: Option<&str>) -> bool {
    desc.explicit_side_effect_request
        && desc.requested_operation == *op
        && desc.operated_object == lexicon::canonical_object(obj)
        && match (desc.destination.as_deref(), destination) {
            (Some(a), Some(b)) => lexicon::same_destination(a, b),
            _ => true,
        }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_report_prompt() {
        let d = describe_prompt("Generate a local report for my deep-work history.", Some(&Op::Send));
        assert_eq!(d.task_intent, "local report generation");
        assert_eq!(d.requested_operation, Op::Generate);
        assert_eq!(d.operated_object, "report");
        assert_eq!(d.execution_scope, ExecutionScope::LocalOnly);
        assert_eq!(d.destination, None);
        assert!(!d.explicit_side_effect_request);
    }

    #[test]
    fn sync_prompt() {
        let d = describe_prompt("Sync the report to the configured Telegram recipient.", Some(&Op::Send));
        assert_eq!(d.requested_operation, Op::Send);
        assert_eq!(d.operated_object, "report");
        assert_eq!(d.execution_scope, ExecutionScope::External);
        assert_eq!(d.destination.as_deref(), Some("Telegram"));
        assert!(d.explicit_side_effect_request);
    }

    #[test]
    fn pronoun_takes_previous_object() {
        let d = describe_prompt("Generate the report and send it to Alex on Telegram.", Some(&Op::Send));
        assert_eq!((d.requested_operation, d.operated_object.as_str()), (Op::Send, "report"));
        assert!(d.explicit_side_effect_request);
    }

    #[test]
    fn heatmap_is_a_report() {
        let d = describe_prompt("Show my deep-work heatmap locally.", Some(&Op::Send));
        assert_eq!(d.operated_object, "report");
        assert_eq!(d.execution_scope, ExecutionScope::LocalOnly);
    }

    #[test]
    fn empty_prompt_is_other() {
        let d = describe_prompt("", None);
        assert_eq!(d.requested_operation, Op::Other("other".into()));
        assert_eq!(d.operated_object, "other");
        assert_eq!(d.execution_scope, ExecutionScope::Other);
        assert!(!d.explicit_side_effect_request && !d.diagnostics.is_empty());
    }

    #[test]
    fn effect_matching() {
        let d = describe_prompt("Send the summary to Telegram.", None);
        assert!(requests_effect(&d, &Op::Send, "report", Some("telegram")));
        assert!(!requests_effect(&d, &Op::Send, "report", Some("Slack")));
        assert!(!requests_effect(&d, &Op::Collect, "report", None));
    }
}
