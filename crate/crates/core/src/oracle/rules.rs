//! Deterministic stand-ins for every oracle capability.

use std::collections::BTreeSet;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use super::types::*;
use super::{Capability, OracleBackend, OracleError};
use crate::bundle::SkillProfile;
use crate::candidates::privilege_type;
use crate::graph::instr::{normalize_rules, Fragment};
use crate::lexicon::{self, Op, ResourceClass};

/// Pure, stateless backend used by default and by every test.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBackend;

#[derive(Deserialize)]
struct NormalizeRequest {
    fragments: Vec<Fragment>,
}

fn parse<T: DeserializeOwned>(v: &Value) -> Result<T, OracleError> {
    serde_json::from_value(v.clone()).map_err(|e| OracleError::Malformed(e.to_string()))
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, OracleError> {
    serde_json::to_value(v).map_err(|e| OracleError::Malformed(e.to_string()))
}

impl OracleBackend for RuleBackend {
    fn call(&self, capability: Capability, request: &Value) -> Result<Value, OracleError> {
        match capability {
            Capability::NormalizeActions => {
                let r: NormalizeRequest = parse(request)?;
                to_value(&normalize_rules(&r.fragments))
            }
            Capability::ClassifyConsistency => {
                let r: ClassifyRequest = parse(request)?;
                let a = &r.action;
                to_value(&classify(&r.profile, &a.op, &a.obj, a.destination.as_deref(), &a.src.excerpt))
            }
            Capability::SynthesizePrompt => to_value(&synthesize_prompt(&parse(request)?)),
            Capability::JudgeCoreEq => to_value(&core_eq(&parse(request)?)),
            Capability::JudgeOutEq => to_value(&out_eq(&parse(request)?)),
            Capability::SynthesizeGuardText => to_value(&guard_text(&parse(request)?)),
        }
    }
}

fn profile_mentions(profile: &SkillProfile, profile_tokens: &BTreeSet<String>, text: &str) -> bool {
    let lower = text.to_ascii_lowercase();
    if profile.text().contains(&lower) {
        return true;
    }
    let toks = lexicon::content_tokens(&text.replace('_', " "));
    !toks.is_empty() && toks.is_subset(profile_tokens)
}

/// Consistency policy: a privilege-relevant action whose object and
/// destination share nothing with the profile, or any action aimed at a
/// destination the profile never mentions, is a candidate.
pub fn classify(
    profile: &SkillProfile,
    op: &Op,
    obj: &str,
    destination: Option<&str>,
    excerpt: &str,
) -> ConsistencyVerdict {
    let ptoks = profile.tokens();
    if let (Op::Send | Op::Receive, Some(d)) = (op, destination) {
        if !profile_mentions(profile, &ptoks, d) {
            return ConsistencyVerdict {
                verdict: Verdict::Candidate,
                rationale: format!("{op} targets {d}, a destination the skill profile never declares"),
                confidence: 0.8,
            };
        }
    }
    if let Some(t) = privilege_type(op, obj, excerpt) {
        let mut toks = lexicon::content_tokens(&obj.replace('_', " "));
        if let Some(d) = destination {
            toks.extend(lexicon::content_tokens(d));
        }
        if toks.is_disjoint(&ptoks) {
            return ConsistencyVerdict {
                verdict: Verdict::Candidate,
                rationale: format!(
                    "{op} of {obj} is a {} action unrelated to the declared purpose",
                    t.as_str().replace('_', " ")
                ),
                confidence: 0.8,
            };
        }
    }
    ConsistencyVerdict {
        verdict: Verdict::Related,
        rationale: format!("{op} of {obj} is consistent with the skill profile"),
        confidence: 0.9,
    }
}

/// Readable phrase: no parentheticals or backticks, lowercase start.
fn clean_phrase(p: &str) -> String {
    let mut out = String::new();
    let mut depth = 0usize;
    for c in p.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            '`' => {}
            c if depth == 0 => out.push(c),
            _ => {}
        }
    }
    let out = out.split_whitespace().collect::<Vec<_>>().join(" ");
    let out = out.trim_end_matches(['.', ',', ';', ':']).to_string();
    let mut chars = out.chars();
    match chars.next() {
        Some(f) => f.to_lowercase().collect::<String>() + chars.as_str(),
        None => out,
    }
}

/// Strips the guard preamble: "the user explicitly asks to X, for Y use" -> "X".
pub fn guard_request(phi: &str) -> String {
    let lower = phi.to_ascii_lowercase();
    let mut start = 0;
    for marker in [" asks to ", " wants to ", " requests to ", " ask to "] {
        if let Some(i) = lower.find(marker) {
            start = i + marker.len();
            break;
        }
    }
    let rest = &phi[start..];
    let end = rest.to_ascii_lowercase().rfind(", for ").filter(|i| rest[*i..].ends_with(" use")).unwrap_or(rest.len());
    rest[..end].trim().to_string()
}

fn join_phrases(parts: &[String]) -> String {
    match parts.len() {
        0 => String::new(),
        1 => parts[0].clone(),
        n => format!("{} and {}", parts[..n - 1].join(", "), parts[n - 1]),
    }
}

pub fn synthesize_prompt(req: &PromptRequest) -> String {
    let mut mentions: Vec<String> = Vec::new();
    let mut extras: Vec<String> = Vec::new();
    for step in &req.steps {
        match step {
            PromptStep::Action { op, obj, destination, phrase, excerpt } => {
                let v = classify(&req.profile, op, obj, destination.as_deref(), excerpt);
                let p = clean_phrase(phrase);
                if v.verdict == Verdict::Related && !p.is_empty() && !mentions.contains(&p) {
                    mentions.push(p);
                }
            }
            PromptStep::Branch { phi, include: true } => {
                for w in lexicon::predicate_words(phi) {
                    if !extras.contains(&w) {
                        extras.push(w);
                    }
                }
            }
            PromptStep::Guard { phi, taken: true } => {
                let p = clean_phrase(&guard_request(phi));
                if !p.is_empty() && !mentions.contains(&p) {
                    mentions.push(p);
                }
            }
            _ => {}
        }
    }
    if mentions.is_empty() && extras.is_empty() {
        return "Run the skill's default task.".to_string();
    }
    let mut body = if mentions.is_empty() {
        format!("use {}", req.profile.scope())
    } else {
        join_phrases(&mentions)
    };
    if !extras.is_empty() {
        body = format!("{body} with {}", extras.join(" "));
    }
    let repo = lexicon::words(&body)
        .iter()
        .any(|w| lexicon::resource_class(&w.lower) == Some(ResourceClass::Repo));
    let suffix = if repo { " in this repository".to_string() } else { format!(" for {}", req.profile.scope()) };
    if mentions.is_empty() {
        return format!("{}.", lexicon::capitalize(&body));
    }
    format!("{}{suffix}.", lexicon::capitalize(&body))
}

/// Order-preserving sequence subtraction: drop the ablated step and every
/// step fed only by removed steps, then compare `(op, obj)` sequences.
pub fn core_eq(req: &CoreEqRequest) -> bool {
    let orig = &req.original.steps;
    let mut removed: BTreeSet<u64> = orig
        .iter()
        .filter(|s| s.node.as_deref() == Some(req.ablated.node.as_str()))
        .map(|s| s.tick)
        .collect();
    for s in orig {
        if !s.inputs.is_empty() && s.inputs.iter().all(|t| removed.contains(t)) {
            removed.insert(s.tick);
        }
    }
    let expected: Vec<(Op, String)> = orig
        .iter()
        .filter(|s| !removed.contains(&s.tick))
        .map(|s| (s.op.clone(), s.obj.clone()))
        .collect();
    let got = req.replay.op_obj();
    if req.order_sensitive {
        expected == got
    } else {
        let mut a = expected;
        let mut b = got;
        a.sort();
        b.sort();
        a == b
    }
}

fn norm_value(v: &str) -> String {
    v.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Field-masked equality plus text Jaccard at the requested threshold.
pub fn out_eq(req: &OutEqRequest) -> bool {
    let keys: BTreeSet<&String> = req.original.relevant.union(&req.replay.relevant).collect();
    for k in keys {
        let a = req.original.structured.get(k).map(|v| norm_value(v)).unwrap_or_default();
        let b = req.replay.structured.get(k).map(|v| norm_value(v)).unwrap_or_default();
        if a != b {
            return false;
        }
    }
    lexicon::jaccard(&req.original.text, &req.replay.text) >= req.threshold
}

/// Fixed guard sentence templates.
pub fn guard_text(req: &GuardTextRequest) -> String {
    let mut cond = format!("the user explicitly asks to {} the {}", req.op.verb(), req.obj.replace('_', " "));
    if let Some(d) = &req.destination {
        cond.push_str(&format!(" to {d}"));
    }
    if let Some(s) = &req.scope {
        cond.push_str(&format!(", for {s} use"));
    }
    match (req.form, &req.command) {
        (GuardForm::Instead, Some(cmd)) => format!("Only if {cond}, run `{cmd}` instead of the next step."),
        _ => format!("Only if {cond}, perform the next step; otherwise skip it."),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn profile(desc: &str) -> SkillProfile {
        SkillProfile { name: "repo-assistant".into(), description: desc.into(), use_when: None, summary: String::new() }
    }

    #[test]
    fn telegram_exfiltration_is_candidate() {
        let p = profile("Monitor the local system and summarize its profile.");
        let v = classify(&p, &Op::Send, "system_profile", Some("Telegram"), "send the system profile to Telegram");
        assert_eq!(v.verdict, Verdict::Candidate);
        assert!(!v.rationale.is_empty());
    }

    #[test]
    fn declared_sync_is_related() {
        let p = profile("Analyze commits, generate a report and handle report synchronization.");
        assert_eq!(classify(&p, &Op::Send, "report", None, "sync the report").verdict, Verdict::Related);
        assert_eq!(classify(&p, &Op::Generate, "report", None, "generate the report").verdict, Verdict::Related);
    }

    fn action(op: Op, obj: &str, phrase: &str, dest: Option<&str>) -> PromptStep {
        PromptStep::Action {
            op,
            obj: obj.into(),
            destination: dest.map(String::from),
            phrase: phrase.into(),
            excerpt: phrase.into(),
        }
    }

    #[test]
    fn commit_summary_prompt() {
        let req = PromptRequest {
            profile: profile("Summarize repository activity."),
            steps: vec![action(Op::Generate, "commits", "summarize recent commits", None)],
        };
        assert_eq!(synthesize_prompt(&req), "Summarize recent commits in this repository.");
    }

    #[test]
    fn empty_chain_prompt() {
        let req = PromptRequest { profile: profile("x"), steps: vec![] };
        assert_eq!(synthesize_prompt(&req), "Run the skill's default task.");
    }

    #[test]
    fn guard_request_strips_preamble() {
        assert_eq!(
            guard_request("the user explicitly asks to send the report to Telegram, for external use"),
            "send the report to Telegram"
        );
    }

    fn step(tick: u64, op: Op, obj: &str, node: &str, inputs: Vec<u64>) -> TraceStep {
        TraceStep { tick, op, obj: obj.into(), args: String::new(), node: Some(node.into()), inputs }
    }

    fn trace(steps: Vec<TraceStep>) -> ExecutionTrace {
        ExecutionTrace { steps }
    }

    #[test]
    fn core_eq_subtraction() {
        let orig = trace(vec![
            step(1, Op::Read, "records", "r", vec![]),
            step(2, Op::Generate, "report", "g", vec![1]),
            step(3, Op::Send, "report", "s", vec![2]),
        ]);
        let req = |replay: ExecutionTrace| CoreEqRequest {
            task: String::new(),
            original: orig.clone(),
            replay,
            ablated: ActionRef { node: "s".into(), op: Op::Send, obj: "report".into() },
            order_sensitive: true,
        };
        assert!(core_eq(&req(trace(orig.steps[..2].to_vec()))));
        assert!(!core_eq(&req(trace(orig.steps[..1].to_vec()))));
        let mut r = req(orig.clone());
        r.ablated.node = "never".into();
        assert!(core_eq(&r));
    }

    #[test]
    fn out_eq_masks_side_effects() {
        let mut a = ExecutionOutput::default();
        a.structured.insert("artifact.report".into(), "abc".into());
        a.structured.insert("effect.send.report@Telegram".into(), "yes".into());
        a.relevant.insert("artifact.report".into());
        a.text = "report: abc".into();
        let mut b = a.clone();
        b.structured.remove("effect.send.report@Telegram");
        let req = |o: &ExecutionOutput, r: &ExecutionOutput| OutEqRequest {
            task: String::new(),
            original: o.clone(),
            replay: r.clone(),
            threshold: 0.9,
        };
        assert!(out_eq(&req(&a, &a)));
        assert!(out_eq(&req(&a, &b)));
        let empty = ExecutionOutput { structured: BTreeMap::new(), relevant: a.relevant.clone(), text: String::new() };
        assert!(!out_eq(&req(&a, &empty)));
    }

    #[test]
    fn guard_sentence() {
        let req = GuardTextRequest {
            op: Op::Send,
            obj: "report".into(),
            destination: Some("Telegram".into()),
            scope: None,
            form: GuardForm::Next,
            command: None,
        };
        assert_eq!(
            guard_text(&req),
            "Only if the user explicitly asks to send the report to Telegram, perform the next step; otherwise skip it."
        );
    }
}
