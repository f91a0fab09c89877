//! Guard sentences placed in front of instruction steps.

use crate::bundle::SkillBundle;
use crate::graph::instr::{fragments, normalize_rules};
use crate::provenance::{Artifact, SpanEdit};

use super::ConstrainError;

fn insertion(start: usize, old_len: usize, replacement: String) -> SpanEdit {
    SpanEdit { artifact: Artifact::Instruction, start, old_len, replacement }
}

fn upper_first(text: &str, at: usize) -> Option<(usize, String)> {
    let c = text[at..].chars().next()?;
    Some((c.len_utf8(), c.to_uppercase().collect()))
}

/// Edit that puts `sentence` immediately before the step holding the span
/// `[start, end)`. A clause inside a multi-clause sentence is first split
/// into its own sentence. Returns `None` when the guard is already there.
pub fn guard_edit(bundle: &SkillBundle, start: usize, end: usize, sentence: &str) -> Result<Option<SpanEdit>, ConstrainError> {
    let doc = &bundle.instruction_doc;
    let text = &doc.raw_text;
    let frags = fragments(doc);
    let frag = frags
        .iter()
        .find(|f| f.start <= start && end <= f.end)
        .ok_or_else(|| ConstrainError::SpanConflict(format!("no instruction step contains {start}..{end}")))?;
    let norm = normalize_rules(std::slice::from_ref(frag));
    let specs: Vec<_> = norm.steps.iter().flat_map(|s| &s.actions).collect();
    let own = specs.iter().find(|a| a.start == start && a.end == end);
    match own.and_then(|a| a.connector).filter(|_| specs.len() > 1) {
        Some((cs, ce)) if ce <= start => {
            let (n, cap) = upper_first(text, start).unwrap_or((0, String::new()));
            Ok(Some(insertion(cs, start + n - cs, format!(". {sentence} {cap}"))))
        }
        Some((_, ce)) => {
            let (n, cap) = upper_first(text, ce).unwrap_or((0, String::new()));
            let clause = &text[start..end];
            Ok(Some(insertion(start, ce + n - start, format!("{sentence} {clause}. {cap}"))))
        }
        None => {
            if text[..frag.start].trim_end().ends_with(sentence) {
                return Ok(None);
            }
            Ok(Some(insertion(frag.start, 0, format!("{sentence} "))))
        }
    }
}
