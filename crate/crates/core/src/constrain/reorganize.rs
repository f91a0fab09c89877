//! Splitting an over-privileged code action out of the default script.

use serde::{Deserialize, Serialize};

use super::ConstrainError;
use crate::bundle::{LanguageHint, SkillBundle};
use crate::graph::{python, ActionNode, Layer, NodeId, UnifiedGraph};
use crate::provenance::{Artifact, SpanEdit};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "strategy")]
pub enum ScriptPlan {
    /// The default script stops executing the action; a full copy becomes a
    /// separately invocable unit chosen by an instruction-level guard.
    Extract {
        script: String,
        unit_script: String,
        unit_command: String,
        default_edits: Vec<SpanEdit>,
        invocations: Vec<NodeId>,
    },
    /// Extraction was impossible; the statement is wrapped in a switch that
    /// stays off unless the environment enables it.
    InCodeGuard { script: String, edit: SpanEdit, reason: String },
}

fn slug(s: &str) -> String {
    let mut out: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    while out.contains("__") {
        out = out.replace("__", "_");
    }
    out.trim_matches('_').to_string()
}

pub fn unit_path(script: &str, a: &ActionNode) -> String {
    let (dir, file) = script.rsplit_once('/').map_or(("", script), |(d, f)| (d, f));
    let (stem, ext) = file.rsplit_once('.').map_or((file, ""), |(s, e)| (s, e));
    let name = format!("{stem}_{}_{}", slug(a.op.as_str()), slug(&a.obj));
    let name = if ext.is_empty() { name } else { format!("{name}.{ext}") };
    if dir.is_empty() { name } else { format!("{dir}/{name}") }
}

pub fn switch_name(a: &ActionNode) -> String {
    format!("ALLOW_{}_{}", slug(a.op.as_str()), slug(&a.obj)).to_ascii_uppercase()
}

fn trim_newline(src: &str, s: usize, e: usize) -> usize {
    if e > s && src[..e].ends_with('\n') { e - 1 } else { e }
}

/// Edits that stop the default script from executing `a`, or why not.
fn default_edits(src: &str, hint: LanguageHint, g: &UnifiedGraph, a: &ActionNode) -> Result<Vec<SpanEdit>, String> {
    let artifact = a.src.artifact.clone();
    let edit = |s: usize, e: usize, rep: &str| SpanEdit { artifact: artifact.clone(), start: s, old_len: e - s, replacement: rep.to_string() };
    if hint != LanguageHint::Python {
        return Ok(vec![edit(a.src.start(), a.src.end(), ":")]);
    }
    let module = python::parse(src).map_err(|e| format!("script does not parse: {}", e.reason))?;
    let own_function = a.function.as_deref().filter(|f| *f != "main").filter(|f| {
        !g.actions().any(|b| {
            b.id != a.id && b.src.artifact == a.src.artifact && b.function.as_deref() == Some(*f) && !b.is_invocation()
        })
    });
    let stmts: Vec<(usize, usize)> = match own_function {
        Some(f) => python::call_sites(&module, src, f),
        None => Vec::new(),
    };
    let stmts = if stmts.is_empty() {
        let st = python::enclosing_simple(&module, a.src.start(), a.src.end())
            .ok_or_else(|| "action is not inside a simple statement".to_string())?;
        vec![st.span]
    } else {
        stmts
    };
    let mut out = Vec::new();
    for (s, e) in stmts {
        for name in python::assigned_names(&module, src, (s, e)) {
            if python::used_after(&module, src, &name, e) {
                return Err(format!("`{name}` assigned at {s}..{e} is used later"));
            }
        }
        out.push(edit(s, trim_newline(src, s, e), "pass"));
    }
    Ok(out)
}

fn in_code_guard(src: &str, hint: LanguageHint, a: &ActionNode) -> Option<SpanEdit> {
    let sw = switch_name(a);
    let artifact = a.src.artifact.clone();
    if hint != LanguageHint::Python {
        let (s, e) = (a.src.start(), a.src.end());
        return Some(SpanEdit { artifact, start: s, old_len: e - s, replacement: format!("[ -n \"${sw}\" ] && {}", &src[s..e]) });
    }
    let module = python::parse(src).ok()?;
    let st = python::enclosing_simple(&module, a.src.start(), a.src.end())?;
    let (s, e) = (st.span.0, trim_newline(src, st.span.0, st.span.1));
    // Names bound by the statement stay defined when the switch is off.
    let indent = &src[src[..s].rfind('\n').map_or(0, |i| i + 1)..s];
    let defaults: String = python::assigned_names(&module, src, (s, e))
        .iter()
        .map(|n| format!("{n} = None\n{indent}"))
        .collect();
    Some(SpanEdit {
        artifact,
        start: s,
        old_len: e - s,
        replacement: format!("{defaults}if __import__(\"os\").environ.get(\"{sw}\"): {}", &src[s..e]),
    })
}

/// Command for the unit, derived from how the instructions run the script.
fn unit_command(g: &UnifiedGraph, invocations: &[NodeId], script: &str, unit: &str, hint: LanguageHint) -> String {
    for id in invocations {
        if let Some(inv) = g.action(id) {
            for part in inv.src.excerpt.split('`').skip(1).step_by(2) {
                if part.contains(script) {
                    return part.replacen(script, unit, 1);
                }
            }
            if inv.src.excerpt.contains(script) && !inv.src.excerpt.contains(' ') {
                return inv.src.excerpt.replacen(script, unit, 1);
            }
        }
    }
    format!("{} {unit}", hint.interpreter())
}

/// Chooses how to take a code action off the default path.
pub fn plan_reorganization(bundle: &SkillBundle, g: &UnifiedGraph, a: &ActionNode) -> Result<ScriptPlan, ConstrainError> {
    if a.layer != Layer::Code {
        return Err(ConstrainError::NotApplicable(format!("{} is not a code action", a.id)));
    }
    let Artifact::Script(script) = &a.src.artifact else {
        return Err(ConstrainError::NotApplicable(format!("{} has no script", a.id)));
    };
    let sa = bundle.script(script).ok_or_else(|| ConstrainError::RefactorFailure(format!("missing script {script}")))?;
    let invocations: Vec<NodeId> = g
        .actions()
        .filter(|x| x.layer == Layer::Instr && x.invokes.as_deref() == Some(script.as_str()))
        .map(|x| x.id.clone())
        .collect();
    let extract = if invocations.is_empty() {
        Err(format!("no instruction step invokes {script}"))
    } else {
        default_edits(&sa.source, sa.language_hint, g, a)
    };
    match extract {
        Ok(default_edits) => {
            let unit = unit_path(script, a);
            Ok(ScriptPlan::Extract {
                unit_command: unit_command(g, &invocations, script, &unit, sa.language_hint),
                script: script.clone(),
                unit_script: unit,
                default_edits,
                invocations,
            })
        }
        Err(reason) => match in_code_guard(&sa.source, sa.language_hint, a) {
            Some(edit) => Ok(ScriptPlan::InCodeGuard { script: script.clone(), edit, reason }),
            None => Err(ConstrainError::RefactorFailure(reason)),
        },
    }
}
