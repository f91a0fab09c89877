//! `sigma ⊖ a`: the bundle with one action removed or neutralized.

use serde::{Deserialize, Serialize};

use super::ReplayError;
use crate::bundle::{LanguageHint, SkillBundle};
use crate::graph::instr::{fragments, normalize_rules};
use crate::graph::{python, ActionNode, Layer, NodeId, UnifiedGraph};
use crate::provenance::{apply_edits, Artifact, SpanEdit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    RemoveInstructionStep,
    NeutralizeCodeBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub target: NodeId,
    pub mode: AblationMode,
    pub edit: SpanEdit,
}

fn line_bounds(text: &str, s: usize, e: usize) -> (usize, usize) {
    let ls = text[..s].rfind('\n').map_or(0, |i| i + 1);
    let le = text[e..].find('\n').map_or(text.len(), |i| e + i + 1);
    (ls, le)
}

fn is_marker_prefix(p: &str) -> bool {
    let t = p.trim_start();
    t.is_empty()
        || matches!(t.trim_end(), "-" | "*" | "+")
        || t.trim_end().strip_suffix(['.', ')']).is_some_and(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_digit()))
}

/// Deletion of a whole instruction fragment: its line if the fragment is
/// the only thing on it, otherwise the sentence and its trailing space.
fn remove_fragment(text: &str, s: usize, e: usize) -> (usize, usize) {
    let (ls, le) = line_bounds(text, s, e);
    let after = text[e..le].trim();
    if is_marker_prefix(&text[ls..s]) && after.is_empty() {
        return (ls, le);
    }
    let trailing = text[e..].len() - text[e..].trim_start_matches([' ', '\t']).len();
    if trailing > 0 {
        return (s, e + trailing);
    }
    let leading = text[..s].len() - text[..s].trim_end_matches([' ', '\t']).len();
    (s - leading, e)
}

fn instruction_edit(bundle: &SkillBundle, start: usize, end: usize) -> Option<SpanEdit> {
    let doc = &bundle.instruction_doc;
    let text = &doc.raw_text;
    let frags = fragments(doc);
    let frag = frags.iter().find(|f| f.start <= start && end <= f.end)?;
    let norm = normalize_rules(std::slice::from_ref(frag));
    let specs: Vec<_> = norm.steps.iter().flat_map(|s| &s.actions).collect();
    let own = specs.iter().find(|a| a.start == start && a.end == end);
    let edit = |s: usize, e: usize, rep: String| SpanEdit { artifact: Artifact::Instruction, start: s, old_len: e - s, replacement: rep };
    match own.and_then(|a| a.connector) {
        Some((cs, ce)) if specs.len() > 1 => {
            if ce <= start {
                Some(edit(cs, end, String::new()))
            } else {
                // First clause: the next clause becomes the sentence start.
                let next = text[ce..].chars().next()?;
                let cap: String = next.to_uppercase().collect();
                Some(edit(start, ce + next.len_utf8(), cap))
            }
        }
        _ => {
            let (s, e) = remove_fragment(text, frag.start, frag.end);
            Some(edit(s, e, String::new()))
        }
    }
}

/// A function body can be neutralized whole when the target is its only
/// action and it calls no other function of the script.
fn body_is_own(module: &python::Module, src: &str, g: &UnifiedGraph, target: &ActionNode, body: (usize, usize)) -> bool {
    let others = g.actions().any(|b| {
        b.id != target.id && b.src.artifact == target.src.artifact && body.0 <= b.src.start() && b.src.end() <= body.1
    });
    let mut defs = Vec::new();
    python::walk(&module.stmts, &mut |st, _| {
        if let python::StmtKind::Def { name, .. } = &st.kind {
            defs.push(name.clone());
        }
    });
    let calls_local = python::calls_in(src, &module.strings, body.0, body.1).iter().any(|c| defs.contains(&c.name));
    !others && !calls_local
}

fn code_edit(bundle: &SkillBundle, g: &UnifiedGraph, target: &ActionNode, path: &str, start: usize, end: usize) -> Option<SpanEdit> {
    let script = bundle.script(path)?;
    let src = &script.source;
    let edit = |s: usize, e: usize, rep: &str| SpanEdit {
        artifact: Artifact::Script(path.to_string()),
        start: s,
        old_len: e - s,
        replacement: rep.to_string(),
    };
    match script.language_hint {
        LanguageHint::Python => {
            let module = python::parse(src).ok()?;
            if let Some((_, (bs, be))) = python::enclosing_function(&module, start) {
                if body_is_own(&module, src, g, target, (bs, be)) {
                    let be = if src[..be].ends_with('\n') { be - 1 } else { be };
                    return Some(edit(bs, be, "return None"));
                }
            }
            let st = python::enclosing_simple(&module, start, end)?;
            let se = if src[..st.span.1].ends_with('\n') { st.span.1 - 1 } else { st.span.1 };
            Some(edit(st.span.0, se, "pass"))
        }
        _ => Some(edit(start, end, ":")),
    }
}

/// Removes an instruction step, or replaces the enclosing function body of a
/// code action by an immediate return. Everything else is left byte-identical.
pub fn apply_ablation(bundle: &SkillBundle, g: &UnifiedGraph, target: &str) -> Result<(SkillBundle, Ablation), ReplayError> {
    let a = g.action(target).ok_or_else(|| ReplayError::Graph(crate::graph::GraphError::UnknownNode(target.to_string())))?;
    if !bundle.provenance_holds(&a.src) {
        return Err(ReplayError::AblationSpanConflict(format!("provenance of {target} no longer matches the bundle")));
    }
    let (start, end) = (a.src.start(), a.src.end());
    let (mode, edit) = match (&a.layer, &a.src.artifact) {
        (Layer::Instr, _) => (AblationMode::RemoveInstructionStep, instruction_edit(bundle, start, end)),
        (Layer::Code, Artifact::Script(p)) => (AblationMode::NeutralizeCodeBody, code_edit(bundle, g, a, p, start, end)),
        _ => (AblationMode::NeutralizeCodeBody, None),
    };
    let edit = edit.ok_or_else(|| ReplayError::AblationSpanConflict(format!("no removable span for {target}")))?;
    let text = bundle
        .artifact_text(&edit.artifact)
        .ok_or_else(|| ReplayError::AblationSpanConflict(format!("missing artifact for {target}")))?;
    let new_text = apply_edits(text, &[&edit]);
    let out = match &edit.artifact {
        Artifact::Script(p) => bundle.with_script(p, new_text)?,
        _ => bundle.with_instruction_text(new_text)?,
    };
    Ok((out, Ablation { target: target.to_string(), mode, edit }))
}

/// Applies several ablations at once; overlapping spans are refused.
pub fn apply_ablations(bundle: &SkillBundle, g: &UnifiedGraph, targets: &[&str]) -> Result<(SkillBundle, Vec<Ablation>), ReplayError> {
    let mut abls: Vec<Ablation> = Vec::new();
    for t in targets {
        let (_, a) = apply_ablation(bundle, g, t)?;
        if abls.iter().any(|b| b.edit.overlaps(&a.edit)) {
            return Err(ReplayError::AblationSpanConflict(format!("ablation of {t} overlaps another edit")));
        }
        abls.push(a);
    }
    let mut out = bundle.clone();
    let mut by_artifact: std::collections::BTreeMap<String, (Artifact, Vec<&SpanEdit>)> = Default::default();
    for a in &abls {
        by_artifact.entry(a.edit.artifact.key()).or_insert_with(|| (a.edit.artifact.clone(), Vec::new())).1.push(&a.edit);
    }
    for (artifact, edits) in by_artifact.into_values() {
        let text = bundle.artifact_text(&artifact).unwrap_or_default();
        let new_text = apply_edits(text, &edits);
        out = match &artifact {
            Artifact::Script(p) => out.with_script(p, new_text)?,
            _ => out.with_instruction_text(new_text)?,
        };
    }
    Ok((out, abls))
}
