//! Instruction layer: fragment segmentation, rule-based step normalization
//! and graph construction.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{node_id, ActionNode, Builder, GraphError, Layer, Node, PredKind, PredicateNode, UnifiedGraph};
use crate::bundle::{normalize_relative, InstructionDoc};
use crate::graph::EdgeKind;
use crate::lexicon::{self, Op, Word};
use crate::oracle::SemanticOracle;
use crate::provenance::{Artifact, Provenance};

/// One sentence, list item sentence, or fenced command line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub start: usize,
    pub end: usize,
    pub text: String,
    #[serde(default)]
    pub command: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepForm {
    Plain,
    Branch,
    Loop,
    /// "Only if C, perform the next step; otherwise skip it."
    GuardNext,
    /// "Only if C, run `X` instead of the next step."
    GuardInstead,
    /// "Only if C, run `X`."
    GuardRun,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredSpec {
    pub phi: String,
    pub start: usize,
    pub end: usize,
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub op: Op,
    pub obj: String,
    pub destination: Option<String>,
    pub invokes: Option<String>,
    pub phrase: String,
    pub start: usize,
    pub end: usize,
    /// Connector joining this clause to its neighbour in a multi-clause step.
    pub connector: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedStep {
    pub form: StepForm,
    pub fragment: (usize, usize),
    pub predicate: Option<PredSpec>,
    pub actions: Vec<ActionSpec>,
}

/// Data dependency between flattened action indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataDep {
    pub from: usize,
    pub to: usize,
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedActions {
    pub steps: Vec<NormalizedStep>,
    pub data_edges: Vec<DataDep>,
}

fn list_marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(\s*)(?:\d+[.)]|[-*+])\s+").unwrap())
}

fn heading_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^#{1,6}\s").unwrap())
}

/// Segments the instruction body into fragments with absolute offsets.
pub fn fragments(doc: &InstructionDoc) -> Vec<Fragment> {
    let raw = &doc.raw_text;
    let mut out = Vec::new();
    let mut block: Option<(usize, usize)> = None;
    let mut in_fence = false;
    let mut offset = doc.body_start;

    let flush = |block: &mut Option<(usize, usize)>, out: &mut Vec<Fragment>| {
        if let Some((s, e)) = block.take() {
            out.extend(sentences(raw, s, e));
        }
    };

    for line in raw[doc.body_start..].split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        let content = line.trim_end_matches(['\n', '\r']);
        let trimmed = content.trim();
        if trimmed.starts_with("```") || trimmed.starts_with("~~~") {
            flush(&mut block, &mut out);
            in_fence = !in_fence;
            continue;
        }
        if in_fence {
            if !trimmed.is_empty() && !trimmed.starts_with('#') {
                let s = line_start + (content.len() - content.trim_start().len());
                out.push(Fragment {
                    start: s,
                    end: s + trimmed.len(),
                    text: trimmed.to_string(),
                    command: true,
                });
            }
            continue;
        }
        if trimmed.is_empty() || heading_re().is_match(content) || trimmed.starts_with('|') {
            flush(&mut block, &mut out);
            continue;
        }
        let line_end = line_start + content.trim_end().len();
        if let Some(m) = list_marker_re().find(content) {
            flush(&mut block, &mut out);
            block = Some((line_start + m.end(), line_end));
            continue;
        }
        match &mut block {
            Some((_, e)) => *e = line_end,
            None => {
                let s = line_start + (content.len() - content.trim_start().len());
                block = Some((s, line_end));
            }
        }
    }
    flush(&mut block, &mut out);
    out
}

/// Splits `raw[s..e]` at sentence-final punctuation outside backticks and parentheses.
fn sentences(raw: &str, s: usize, e: usize) -> Vec<Fragment> {
    let text = &raw[s..e];
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut tick = false;
    let mut depth = 0i32;
    let push = |a: usize, b: usize, out: &mut Vec<Fragment>| {
        let piece = &text[a..b];
        let lead = piece.len() - piece.trim_start().len();
        let t = piece.trim();
        if !t.is_empty() {
            out.push(Fragment {
                start: s + a + lead,
                end: s + a + lead + t.len(),
                text: t.to_string(),
                command: false,
            });
        }
    };
    for (i, &c) in bytes.iter().enumerate() {
        match c {
            b'`' => tick = !tick,
            b'(' if !tick => depth += 1,
            b')' if !tick => depth = (depth - 1).max(0),
            b'.' | b'!' | b'?' if !tick && depth == 0 => {
                let next = bytes.get(i + 1);
                if next.is_none() || next.is_some_and(|n| n.is_ascii_whitespace()) {
                    push(start, i + 1, &mut out);
                    start = i + 1;
                }
            }
            _ => {}
        }
    }
    push(start, text.len(), &mut out);
    out
}

fn guard_next_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?is)^only if (.+?), perform the next step; otherwise skip it\.?$").unwrap()
    })
}

fn guard_instead_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?is)^only if (.+?), run (`[^`]+`) instead of the next step\.?$").unwrap())
}

fn guard_run_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?is)^only if (.+?), run (`[^`]+`)\.?$").unwrap())
}

fn branch_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?is)^(if|when|unless) ([^,]+), (.+)$").unwrap())
}

fn loop_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?is)^for (?:each|every) ([^,]+), (.+)$").unwrap())
}

fn backtick_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"`([^`]+)`").unwrap())
}

fn connector_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)(,\s*and\s+then\s+|,\s*then\s+|\s+and\s+then\s+|\s+then\s+|,\s*and\s+|\s+and\s+|;\s*|,\s*)")
            .unwrap()
    })
}

const LEADING_ADVERBS: &[&str] = &[
    "first", "then", "next", "finally", "also", "now", "optionally", "always", "please",
    "afterwards", "lastly", "second", "third", "additionally",
];

const INTERPRETERS: &[&str] = &["python", "python3", "bash", "sh", "node", "zsh", "uv", "run", "exec"];

/// Script path invoked by a command string such as `python3 scripts/monitor.py --x`.
pub fn command_script(cmd: &str) -> Option<String> {
    for tok in cmd.split_whitespace() {
        let t = tok.trim_matches(|c| c == '"' || c == '\'' || c == '`');
        if t.contains('=') && !t.contains('/') {
            continue;
        }
        if INTERPRETERS.contains(&t) {
            continue;
        }
        if t.ends_with(".py") || t.ends_with(".sh") || t.ends_with(".bash") {
            let norm = normalize_relative(t);
            return (!norm.is_empty()).then_some(norm);
        }
        return None;
    }
    None
}

fn phi_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Rule-based normalization of fragments into steps and data dependencies.
pub fn normalize_rules(frags: &[Fragment]) -> NormalizedActions {
    let mut steps = Vec::new();
    let mut prev_obj: Option<String> = None;
    for f in frags {
        if let Some(step) = normalize_fragment(f, &mut prev_obj) {
            steps.push(step);
        }
    }
    let data_edges = data_dependencies(frags, &steps);
    NormalizedActions { steps, data_edges }
}

fn normalize_fragment(f: &Fragment, prev_obj: &mut Option<String>) -> Option<NormalizedStep> {
    let text = f.text.as_str();
    let frag = (f.start, f.end);
    if f.command {
        let a = command_action(text, f.start, f.end)?;
        *prev_obj = Some(a.obj.clone());
        return Some(NormalizedStep { form: StepForm::Plain, fragment: frag, predicate: None, actions: vec![a] });
    }
    let pred = |m: regex::Match<'_>, negated: bool| PredSpec {
        phi: phi_text(m.as_str()),
        start: f.start + m.start(),
        end: f.start + m.end(),
        negated,
    };
    if let Some(c) = guard_next_re().captures(text) {
        let p = PredSpec { start: f.start, end: f.end, ..pred(c.get(1).unwrap(), false) };
        return Some(NormalizedStep { form: StepForm::GuardNext, fragment: frag, predicate: Some(p), actions: vec![] });
    }
    for (re, form) in [(guard_instead_re(), StepForm::GuardInstead), (guard_run_re(), StepForm::GuardRun)] {
        if let Some(c) = re.captures(text) {
            let p = PredSpec { start: f.start, end: f.end, ..pred(c.get(1).unwrap(), false) };
            let m = c.get(2).unwrap();
            let cmd = &m.as_str()[1..m.as_str().len() - 1];
            let a = command_action(cmd, f.start + m.start() + 1, f.start + m.end() - 1)?;
            return Some(NormalizedStep { form, fragment: frag, predicate: Some(p), actions: vec![a] });
        }
    }
    if let Some(c) = loop_re().captures(text) {
        let body = c.get(2).unwrap();
        let actions = clauses(text, f.start, body.start(), prev_obj);
        if actions.is_empty() {
            return None;
        }
        return Some(NormalizedStep {
            form: StepForm::Loop,
            fragment: frag,
            predicate: Some(pred(c.get(1).unwrap(), false)),
            actions,
        });
    }
    if let Some(c) = branch_re().captures(text) {
        let negated = c[1].eq_ignore_ascii_case("unless");
        let body = c.get(3).unwrap();
        let actions = clauses(text, f.start, body.start(), prev_obj);
        if actions.is_empty() {
            return None;
        }
        return Some(NormalizedStep {
            form: StepForm::Branch,
            fragment: frag,
            predicate: Some(pred(c.get(2).unwrap(), negated)),
            actions,
        });
    }
    let actions = clauses(text, f.start, 0, prev_obj);
    (!actions.is_empty()).then_some(NormalizedStep { form: StepForm::Plain, fragment: frag, predicate: None, actions })
}

/// Action for a command string (fenced line or guard command).
fn command_action(cmd: &str, start: usize, end: usize) -> Option<ActionSpec> {
    if let Some(path) = command_script(cmd) {
        return Some(ActionSpec {
            op: Op::Exec,
            obj: path.clone(),
            destination: None,
            invokes: Some(path.clone()),
            phrase: format!("run {path}"),
            start,
            end,
            connector: None,
        });
    }
    let (op, obj, destination) = super::shell::classify_command(cmd)?;
    Some(ActionSpec {
        phrase: format!("{} {}", op.verb(), obj.replace('_', " ")),
        op,
        obj,
        destination,
        invokes: None,
        start,
        end,
        connector: None,
    })
}

/// Splits the action part `text[from..]` into clauses and parses each.
fn clauses(text: &str, base: usize, from: usize, prev_obj: &mut Option<String>) -> Vec<ActionSpec> {
    let body = &text[from..];
    let protected = protected_ranges(body);
    let mut cuts: Vec<(usize, usize)> = Vec::new();
    for m in connector_re().find_iter(body) {
        if protected.iter().any(|(a, b)| m.start() >= *a && m.start() < *b) {
            continue;
        }
        let next = lexicon::words(&body[m.end()..]);
        let Some(w) = next.first() else { continue };
        if w.start != 0 || lexicon::op_for_verb(&w.lower).is_none() {
            continue;
        }
        cuts.push((m.start(), m.end()));
    }
    let mut pieces: Vec<(usize, usize, Option<(usize, usize)>)> = Vec::new();
    let mut s = 0;
    for (i, (a, b)) in cuts.iter().enumerate() {
        let conn = Some((*a, *b));
        pieces.push((s, *a, if i == 0 { conn } else { Some((cuts[i - 1].0, cuts[i - 1].1)) }));
        s = *b;
    }
    pieces.push((s, body.len(), cuts.last().copied()));
    let multi = pieces.len() > 1;
    let mut out = Vec::new();
    for (a, b, conn) in pieces {
        let abs = base + from;
        let conn = if multi { conn.map(|(x, y)| (abs + x, abs + y)) } else { None };
        if let Some(mut spec) = parse_clause(&body[a..b], abs + a, prev_obj) {
            spec.connector = conn;
            *prev_obj = Some(spec.obj.clone());
            out.push(spec);
        }
    }
    out
}

fn protected_ranges(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut tick: Option<usize> = None;
    let mut paren: Option<usize> = None;
    for (i, c) in text.char_indices() {
        match c {
            '`' => match tick {
                Some(s) => {
                    out.push((s, i + 1));
                    tick = None;
                }
                None => tick = Some(i),
            },
            '(' if tick.is_none() && paren.is_none() => paren = Some(i),
            ')' if tick.is_none() => {
                if let Some(s) = paren.take() {
                    out.push((s, i + 1));
                }
            }
            _ => {}
        }
    }
    out
}

/// Parses one imperative clause; `None` for descriptive text.
pub fn parse_clause(clause: &str, abs: usize, prev_obj: &Option<String>) -> Option<ActionSpec> {
    let trimmed_end = clause.trim_end_matches(|c: char| c == '.' || c == '!' || c.is_whitespace()).len();
    let lead = clause.len() - clause.trim_start().len();
    if trimmed_end <= lead {
        return None;
    }
    let clause_text = &clause[..trimmed_end];
    let ws = lexicon::words(clause_text);
    let mut i = 0;
    while i < ws.len() && LEADING_ADVERBS.contains(&ws[i].lower.as_str()) {
        i += 1;
    }
    let verb = ws.get(i)?;
    let invoked = backtick_re()
        .captures_iter(clause_text)
        .find_map(|c| command_script(&c[1]).map(|p| (p, c.get(1).unwrap().as_str().to_string())));
    let verb_op = lexicon::op_for_verb(&verb.lower);
    let gap_ok = |from: usize, to: usize| clause_text[from..to].chars().all(|c| c.is_whitespace() || c == '-');
    let (op, np_from) = match verb_op.clone() {
        Some(op) => (op, i + 1),
        None if invoked.is_some() => (Op::Exec, ws.len()),
        None => return None,
    };
    let mut np: Vec<&Word> = Vec::new();
    let mut last_end = verb.end;
    for w in ws.iter().skip(np_from) {
        if lexicon::is_boundary(&w.lower) || !gap_ok(last_end, w.start) {
            break;
        }
        np.push(w);
        last_end = w.end;
    }
    // a backticked non-script command after `run` decides the op itself
    if invoked.is_none() && op == Op::Exec {
        if let Some(c) = backtick_re().captures(clause_text) {
            if let Some(spec) = command_action(&c[1], abs + c.get(1).unwrap().start(), abs + c.get(1).unwrap().end()) {
                return Some(ActionSpec { start: abs + lead, end: abs + trimmed_end, ..spec });
            }
        }
    }
    let np_lower: Vec<String> = np.iter().map(|w| w.lower.clone()).collect();
    let pronoun = np_lower.len() == 1 && lexicon::is_pronoun(&np_lower[0]);
    let obj = if pronoun {
        prev_obj.clone().unwrap_or_else(|| "other".to_string())
    } else {
        match lexicon::object_from_words(&np_lower) {
            Some(o) => o,
            None => match &invoked {
                Some((p, _)) => p.clone(),
                None => "other".to_string(),
            },
        }
    };
    let destination = match op {
        Op::Send | Op::Receive | Op::Write => lexicon::destination_in(clause_text),
        _ => None,
    };
    let np_text = match (np.first(), np.last()) {
        (Some(a), Some(b)) => clause_text[a.start..b.end].to_string(),
        _ => String::new(),
    };
    let mut phrase = verb.lower.clone();
    if verb_op.is_none() {
        phrase = "run".to_string();
    }
    if !np_text.is_empty() {
        phrase = format!("{phrase} {np_text}");
    } else if let Some((p, _)) = &invoked {
        phrase = format!("run {p}");
    }
    if let (Op::Send, Some(d)) = (&op, &destination) {
        phrase = format!("{phrase} to {d}");
    }
    Some(ActionSpec {
        op,
        obj,
        destination,
        invokes: invoked.map(|(p, _)| p),
        phrase,
        start: abs + lead,
        end: abs + trimmed_end,
        connector: None,
    })
}

fn obj_tokens(obj: &str) -> BTreeSet<String> {
    lexicon::content_tokens(&obj.replace('_', " "))
}

fn data_dependencies(frags: &[Fragment], steps: &[NormalizedStep]) -> Vec<DataDep> {
    let flat: Vec<&ActionSpec> = steps.iter().flat_map(|s| s.actions.iter()).collect();
    let text_of = |a: &ActionSpec| -> String {
        frags
            .iter()
            .find(|f| f.start <= a.start && a.end <= f.end)
            .map(|f| f.text[a.start - f.start..a.end - f.start].to_string())
            .unwrap_or_default()
    };
    let mut out = Vec::new();
    for j in 0..flat.len() {
        let text_j = text_of(flat[j]);
        let toks_j = lexicon::content_tokens(&text_j);
        let pronoun_j = lexicon::words(&text_j).iter().skip(1).take(1).any(|w| lexicon::is_pronoun(&w.lower));
        for i in 0..j {
            let a = flat[i];
            if !a.op.produces_data() || a.obj == "other" {
                continue;
            }
            let shared = !obj_tokens(&a.obj).is_disjoint(&toks_j);
            let by_pronoun = pronoun_j && i + 1 == j && flat[j].obj == a.obj;
            if shared || by_pronoun {
                out.push(DataDep { from: i, to: j, label: a.obj.clone() });
            }
        }
    }
    out
}

/// Builds the instruction-layer partial graph.
pub fn build_instruction_graph(
    doc: &InstructionDoc,
    owning_skill: &str,
    oracle: &SemanticOracle,
) -> Result<UnifiedGraph, GraphError> {
    let frags = fragments(doc);
    let norm = oracle.normalize_actions(&frags)?;
    Ok(assemble(doc, owning_skill, &norm))
}

fn action_node(doc: &InstructionDoc, a: &ActionSpec) -> Node {
    let artifact = Artifact::Instruction;
    Node::Action(ActionNode {
        id: node_id(&artifact, (a.start, a.end), ""),
        layer: Layer::Instr,
        op: a.op.clone(),
        obj: a.obj.clone(),
        destination: a.destination.clone(),
        invokes: a.invokes.clone(),
        phrase: a.phrase.clone(),
        function: None,
        unparsed: false,
        context: String::new(),
        src: Provenance::new(artifact, &doc.raw_text, a.start, a.end),
    })
}

fn predicate_node(doc: &InstructionDoc, p: &PredSpec, kind: PredKind) -> Node {
    let artifact = Artifact::Instruction;
    Node::Predicate(PredicateNode {
        id: node_id(&artifact, (p.start, p.end), ""),
        layer: Layer::Instr,
        phi: p.phi.clone(),
        pred_kind: kind,
        negated: p.negated,
        context: String::new(),
        src: Provenance::new(artifact, &doc.raw_text, p.start, p.end),
    })
}

fn valid_span(doc: &InstructionDoc, s: usize, e: usize) -> bool {
    s < e && e <= doc.raw_text.len() && doc.raw_text.is_char_boundary(s) && doc.raw_text.is_char_boundary(e)
}

/// Turns normalized steps into nodes and edges.
pub fn assemble(doc: &InstructionDoc, owning_skill: &str, norm: &NormalizedActions) -> UnifiedGraph {
    let mut b = Builder::new(owning_skill, Artifact::Instruction);
    let mut after_next: Option<Vec<(String, Option<String>)>> = None;
    let mut flat_ids: Vec<Option<String>> = Vec::new();
    let t = || Some(super::TRUE_LABEL.to_string());
    let f = || Some(super::FALSE_LABEL.to_string());

    for step in &norm.steps {
        let carry = after_next.take();
        let actions: Vec<&ActionSpec> = step.actions.iter().collect();
        let spans_ok = actions.iter().all(|a| valid_span(doc, a.start, a.end))
            && step.predicate.as_ref().is_none_or(|p| valid_span(doc, p.start, p.end));
        if !spans_ok {
            b.g.diagnostics.push(format!("step at {:?} has an invalid span; skipped", step.fragment));
            flat_ids.extend(actions.iter().map(|_| None));
            if let Some(c) = carry {
                b.pending.extend(c);
            }
            continue;
        }
        let kind = match step.form {
            StepForm::Loop => PredKind::Loop,
            StepForm::Branch => PredKind::Branch,
            _ => PredKind::Guard,
        };
        let pid = step.predicate.as_ref().map(|p| b.add_node(predicate_node(doc, p, kind)));
        let mut add_actions = |b: &mut Builder| {
            for a in &actions {
                let id = b.add_node(action_node(doc, a));
                flat_ids.push(Some(id));
            }
        };
        match (step.form, pid) {
            (StepForm::Plain, _) | (_, None) => add_actions(&mut b),
            (StepForm::Branch, Some(p)) => {
                b.pending = vec![(p.clone(), t())];
                add_actions(&mut b);
                b.pending.push((p, f()));
            }
            (StepForm::Loop, Some(p)) => {
                b.pending = vec![(p.clone(), t())];
                add_actions(&mut b);
                b.connect_to(&p);
                b.pending = vec![(p, f())];
            }
            (StepForm::GuardNext, Some(p)) => {
                b.pending = vec![(p.clone(), t())];
                after_next = Some(vec![(p, f())]);
            }
            (StepForm::GuardInstead, Some(p)) => {
                b.pending = vec![(p.clone(), t())];
                add_actions(&mut b);
                let x_out = std::mem::replace(&mut b.pending, vec![(p, f())]);
                after_next = Some(x_out);
            }
            (StepForm::GuardRun, Some(p)) => {
                b.pending = vec![(p.clone(), t())];
                add_actions(&mut b);
                b.pending.push((p, f()));
            }
        }
        if let Some(c) = carry {
            b.pending.extend(c);
        }
    }
    if let Some(c) = after_next.take() {
        b.pending.extend(c);
    }
    for d in &norm.data_edges {
        if let (Some(Some(from)), Some(Some(to))) = (flat_ids.get(d.from), flat_ids.get(d.to)) {
            if from != to {
                b.g.add_edge(EdgeKind::Data, from, to, Some(d.label.clone()));
            }
        }
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(body: &str) -> InstructionDoc {
        InstructionDoc::parse(body).unwrap().0
    }

    fn steps(body: &str) -> NormalizedActions {
        normalize_rules(&fragments(&doc(body)))
    }

    #[test]
    fn sentences_and_items() {
        let d = doc("---\nname: x\n---\n# Steps\n1. Read the records (sessions.csv).\n2. Generate the report. Send it.\n\nSome prose here. Run `python3 scripts/a.py` now.\n```bash\npython3 scripts/b.py --x\n```\n");
        let fr = fragments(&d);
        let texts: Vec<&str> = fr.iter().map(|f| f.text.as_str()).collect();
        assert_eq!(
            texts,
            vec![
                "Read the records (sessions.csv).",
                "Generate the report.",
                "Send it.",
                "Some prose here.",
                "Run `python3 scripts/a.py` now.",
                "python3 scripts/b.py --x"
            ]
        );
        for f in &fr {
            assert_eq!(&d.raw_text[f.start..f.end], f.text);
        }
    }

    #[test]
    fn sync_to_endpoint_is_send_report() {
        let n = steps("Sync the report to the incident endpoint.");
        let a = &n.steps[0].actions[0];
        assert_eq!((a.op.clone(), a.obj.as_str()), (Op::Send, "report"));
        assert_eq!(a.destination.as_deref(), Some("incident_endpoint"));
    }

    #[test]
    fn clauses_pronouns_and_data() {
        let n = steps("1. Read the session records (sessions.csv).\n2. Generate the heatmap report from the session records and send it to Telegram.\n");
        let flat: Vec<_> = n.steps.iter().flat_map(|s| &s.actions).collect();
        let got: Vec<(String, String)> = flat.iter().map(|a| (a.op.to_string(), a.obj.clone())).collect();
        assert_eq!(
            got,
            vec![
                ("read".into(), "session_records".into()),
                ("generate".into(), "heatmap_report".into()),
                ("send".into(), "heatmap_report".into())
            ]
        );
        assert!(flat[2].connector.is_some());
        assert_eq!(flat[2].phrase, "send it to Telegram");
        let deps: Vec<(usize, usize)> = n.data_edges.iter().map(|d| (d.from, d.to)).collect();
        assert!(deps.contains(&(0, 1)) && deps.contains(&(1, 2)));
    }

    #[test]
    fn predicates_and_guards() {
        let n = steps("If the user wants a heatmap, generate the heatmap.\nOnly if the user explicitly asks to send the report to Telegram, perform the next step; otherwise skip it.\nSend the report to Telegram.\nUnless offline, fetch the data.\nFor each file, read the file.\n");
        let forms: Vec<StepForm> = n.steps.iter().map(|s| s.form).collect();
        assert_eq!(
            forms,
            vec![StepForm::Branch, StepForm::GuardNext, StepForm::Plain, StepForm::Branch, StepForm::Loop]
        );
        assert_eq!(n.steps[0].predicate.as_ref().unwrap().phi, "the user wants a heatmap");
        assert!(n.steps[3].predicate.as_ref().unwrap().negated);
    }

    #[test]
    fn descriptive_text_is_not_an_action() {
        assert!(steps("This skill tracks sessions. It is useful.").steps.is_empty());
    }

    #[test]
    fn command_scripts() {
        assert_eq!(command_script("python3 scripts/monitor.py --days 7").as_deref(), Some("scripts/monitor.py"));
        assert_eq!(command_script("bash ./scripts/x.sh").as_deref(), Some("scripts/x.sh"));
        assert_eq!(command_script("git log"), None);
    }
}
