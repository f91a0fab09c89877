//! Constrained nodes and their projection into a least-privilege bundle.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::guard::GuardCondition;
use super::insert::guard_edit;
use super::reorganize::{plan_reorganization, ScriptPlan};
use super::ConstrainError;
use crate::bundle::{write_bundle, SkillBundle};
use crate::graph::{ActionNode, Layer, NodeId, UnifiedGraph};
use crate::oracle::{GuardForm, GuardTextRequest, SemanticOracle};
use crate::provenance::{apply_edits, Artifact, SpanEdit};

/// `v_a^c = <C_a, a>` with its rendered instruction text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstrainedNode {
    pub guard: GuardCondition,
    pub action: NodeId,
    pub instruction_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_edits: Option<ScriptPlan>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

pub fn plan_constraint(
    bundle: &SkillBundle,
    g: &UnifiedGraph,
    action: &ActionNode,
    guard: GuardCondition,
    oracle: &SemanticOracle,
) -> Result<ConstrainedNode, ConstrainError> {
    let mut req = GuardTextRequest {
        op: action.op.clone(),
        obj: action.obj.clone(),
        destination: action.destination.clone(),
        scope: guard.scope().map(|s| s.adjective().to_string()),
        form: GuardForm::Next,
        command: None,
    };
    let mut diagnostics = Vec::new();
    let code_edits = match action.layer {
        Layer::Instr => None,
        Layer::Code => {
            let plan = plan_reorganization(bundle, g, action)?;
            match &plan {
                ScriptPlan::Extract { unit_command, .. } => {
                    req.form = GuardForm::Instead;
                    req.command = Some(unit_command.clone());
                }
                ScriptPlan::InCodeGuard { reason, .. } => {
                    diagnostics.push(format!("RefactorFailure: {reason}; fell back to an in-code guard"));
                }
            }
            Some(plan)
        }
    };
    let instruction_text = match &code_edits {
        Some(ScriptPlan::InCodeGuard { .. }) => String::new(),
        _ => oracle.synthesize_guard_text(&req)?,
    };
    Ok(ConstrainedNode { guard, action: action.id.clone(), instruction_text, code_edits, diagnostics })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub action: NodeId,
    pub condition: String,
    pub guard: GuardCondition,
    pub instruction_text: String,
    pub edits: Vec<SpanEdit>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub new_scripts: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Projection {
    #[serde(skip)]
    pub bundle: Option<SkillBundle>,
    pub constraints: Vec<ManifestEntry>,
}

impl Projection {
    pub fn manifest_json(&self) -> String {
        serde_json::to_string_pretty(&self.constraints).expect("manifest serializes") + "\n"
    }

    /// Writes the bundle and its `constraints.json` manifest.
    pub fn write(&self, out: &Path) -> Result<(), ConstrainError> {
        if let Some(b) = &self.bundle {
            write_bundle(b, out)?;
        }
        let path = out.join("constraints.json");
        std::fs::write(&path, self.manifest_json())
            .map_err(|source| crate::bundle::BundleError::IoFailure { path, source })?;
        Ok(())
    }
}

fn already_guarded(text: &str, e: &SpanEdit) -> bool {
    let rest = &text[e.start..];
    let line = &text[text[..e.start].rfind('\n').map_or(0, |i| i + 1)..e.start];
    line.contains("environ.get(\"ALLOW_")
        || rest
            .lines()
            .map(str::trim_start)
            .find(|l| !l.ends_with(" = None"))
            .is_some_and(|l| l.starts_with("if __import__(\"os\").environ.get(\"ALLOW_"))
        || rest.starts_with("if __import__(\"os\").environ.get(\"ALLOW_") || rest.starts_with("[ -n \"$ALLOW_")
}

struct NodeEdits {
    edits: Vec<SpanEdit>,
    new_scripts: Vec<(String, String)>,
}

fn node_edits(
    bundle: &SkillBundle,
    g: &UnifiedGraph,
    cn: &ConstrainedNode,
    siblings: &[&ConstrainedNode],
) -> Result<NodeEdits, ConstrainError> {
    let a = g.action(&cn.action).ok_or_else(|| ConstrainError::NotApplicable(format!("unknown action {}", cn.action)))?;
    let mut out = NodeEdits { edits: Vec::new(), new_scripts: Vec::new() };
    match &cn.code_edits {
        None => {
            if let Some(e) = guard_edit(bundle, a.src.start(), a.src.end(), &cn.instruction_text)? {
                out.edits.push(e);
            }
        }
        Some(ScriptPlan::InCodeGuard { script, edit, .. }) => {
            let text = bundle.script(script).map(|s| s.source.as_str()).unwrap_or_default();
            if !already_guarded(text, edit) {
                out.edits.push(edit.clone());
            }
        }
        Some(ScriptPlan::Extract { script, unit_script, default_edits, invocations, .. }) => {
            if bundle.script(unit_script).is_some() {
                return Ok(out);
            }
            let original = bundle.script(script).map(|s| s.source.clone()).unwrap_or_default();
            // The unit keeps this action but none of the others taken out of the same script.
            let others: Vec<&SpanEdit> = siblings
                .iter()
                .filter(|s| s.action != cn.action)
                .filter_map(|s| match &s.code_edits {
                    Some(ScriptPlan::Extract { script: p, default_edits, .. }) if p == script => Some(default_edits),
                    _ => None,
                })
                .flatten()
                .collect();
            out.new_scripts.push((unit_script.clone(), apply_edits(&original, &others)));
            out.edits.extend(default_edits.iter().cloned());
            for id in invocations {
                let inv = g.action(id).ok_or_else(|| ConstrainError::NotApplicable(format!("unknown invocation {id}")))?;
                if let Some(e) = guard_edit(bundle, inv.src.start(), inv.src.end(), &cn.instruction_text)? {
                    out.edits.push(e);
                }
            }
        }
    }
    Ok(out)
}

/// Guard sentences inserted at the same point are stacked in node order.
fn merge_insertions(edits: Vec<SpanEdit>) -> Vec<SpanEdit> {
    let mut out: Vec<SpanEdit> = Vec::new();
    for e in edits {
        if let Some(prev) = out
            .iter_mut()
            .find(|p| p.artifact == e.artifact && p.start == e.start && p.old_len == 0 && e.old_len == 0)
        {
            prev.replacement.push_str(&e.replacement);
        } else if !out.contains(&e) {
            out.push(e);
        }
    }
    out
}

/// Applies every constrained node. Edits are applied per artifact in
/// descending offset order; overlapping edits are refused.
pub fn project_constraints(
    bundle: &SkillBundle,
    g: &UnifiedGraph,
    nodes: &[ConstrainedNode],
) -> Result<Projection, ConstrainError> {
    let siblings: Vec<&ConstrainedNode> = nodes.iter().collect();
    let mut entries = Vec::new();
    let mut all: Vec<SpanEdit> = Vec::new();
    let mut new_scripts: Vec<(String, String)> = Vec::new();
    for cn in nodes {
        let ne = node_edits(bundle, g, cn, &siblings)?;
        entries.push(ManifestEntry {
            action: cn.action.clone(),
            condition: cn.guard.to_string(),
            guard: cn.guard.clone(),
            instruction_text: cn.instruction_text.clone(),
            edits: ne.edits.clone(),
            new_scripts: ne.new_scripts.iter().map(|(p, _)| p.clone()).collect(),
            diagnostics: cn.diagnostics.clone(),
        });
        all.extend(ne.edits);
        new_scripts.extend(ne.new_scripts);
    }
    let all = merge_insertions(all);
    for (i, a) in all.iter().enumerate() {
        if let Some(b) = all[i + 1..].iter().find(|b| a.overlaps(b)) {
            return Err(ConstrainError::SpanConflict(format!(
                "edits at {}:{} and {}:{} overlap",
                a.artifact.key(),
                a.start,
                b.artifact.key(),
                b.start
            )));
        }
    }
    let mut by_artifact: BTreeMap<String, (Artifact, Vec<&SpanEdit>)> = BTreeMap::new();
    for e in &all {
        by_artifact.entry(e.artifact.key()).or_insert_with(|| (e.artifact.clone(), Vec::new())).1.push(e);
    }
    let mut out = bundle.clone();
    for (artifact, edits) in by_artifact.into_values() {
        let text = bundle
            .artifact_text(&artifact)
            .ok_or_else(|| ConstrainError::SpanConflict(format!("missing artifact {}", artifact.key())))?;
        let new_text = apply_edits(text, &edits);
        out = match &artifact {
            Artifact::Script(p) => out.with_script(p, new_text)?,
            _ => out.with_instruction_text(new_text)?,
        };
    }
    for (p, src) in new_scripts {
        out = out.with_script(&p, src)?;
    }
    Ok(Projection { bundle: Some(out), constraints: entries })
}

/// Projects a single instruction-layer guard.
pub fn insert_guard(bundle: &SkillBundle, g: &UnifiedGraph, cn: &ConstrainedNode) -> Result<SkillBundle, ConstrainError> {
    if cn.code_edits.is_some() {
        return Err(ConstrainError::NotApplicable(format!("{} is a code action", cn.action)));
    }
    Ok(project_constraints(bundle, g, std::slice::from_ref(cn))?.bundle.expect("bundle"))
}

/// Projects a single code-layer reorganization.
pub fn reorganize_script(bundle: &SkillBundle, g: &UnifiedGraph, cn: &ConstrainedNode) -> Result<SkillBundle, ConstrainError> {
    if cn.code_edits.is_none() {
        return Err(ConstrainError::NotApplicable(format!("{} is an instruction action", cn.action)));
    }
    Ok(project_constraints(bundle, g, std::slice::from_ref(cn))?.bundle.expect("bundle"))
}
