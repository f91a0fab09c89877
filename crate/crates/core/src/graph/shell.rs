//! Shell scripts at command granularity.

use super::{node_id, ActionNode, Builder, Layer, Node, PredKind, PredicateNode, UnifiedGraph};
use crate::bundle::ScriptArtifact;
use crate::lexicon::{self, Op};
use crate::provenance::{Artifact, Provenance};

fn args_of(cmd: &str) -> Vec<String> {
    cmd.split_whitespace()
        .map(|t| t.trim_matches(|c| c == '"' || c == '\'').to_string())
        .collect()
}

fn first_operand(args: &[String]) -> Option<&String> {
    args.iter().skip(1).find(|a| !a.starts_with('-'))
}

fn url_in(args: &[String]) -> Option<&String> {
    args.iter().find(|a| lexicon::is_url(a))
}

/// Maps one simple command to `(op, obj, destination)`; `None` for
/// commands without a privilege-relevant or data effect.
pub fn classify_command(cmd: &str) -> Option<(Op, String, Option<String>)> {
    let mut args = args_of(cmd);
    while args.first().is_some_and(|a| a.contains('=') && !a.starts_with('-')) {
        args.remove(0);
    }
    if args.first().is_some_and(|a| a == "sudo") {
        args.remove(0);
    }
    let head = args.first()?.clone();
    let name = head.rsplit('/').next().unwrap_or(&head).to_string();
    let operand = first_operand(&args).cloned();
    let obj_of = |o: Option<String>| o.unwrap_or_else(|| name.clone());
    let r = match name.as_str() {
        "curl" | "wget" => {
            let url = url_in(&args).cloned();
            let dest = url.as_deref().and_then(lexicon::url_host);
            let sending = args.iter().any(|a| {
                matches!(a.as_str(), "-d" | "--data" | "--data-binary" | "-F" | "--form" | "-T" | "--upload-file" | "--post-data")
                    || a.starts_with("--data")
            }) || args.windows(2).any(|w| w[0] == "-X" && matches!(w[1].as_str(), "POST" | "PUT" | "PATCH"));
            if sending {
                let payload = args
                    .windows(2)
                    .find(|w| matches!(w[0].as_str(), "-d" | "--data" | "--data-binary" | "-F" | "-T" | "--upload-file"))
                    .map(|w| w[1].trim_start_matches('@').to_string());
                (Op::Send, payload.or(url).unwrap_or(name), dest)
            } else {
                (Op::Receive, url.unwrap_or(name), dest)
            }
        }
        "scp" | "rsync" | "nc" | "ncat" | "sendmail" | "mail" => {
            let dest = args.iter().find(|a| a.contains('@') || a.contains(':')).cloned();
            (Op::Send, obj_of(operand), dest)
        }
        "cat" | "head" | "tail" | "less" | "more" | "grep" | "wc" | "jq" | "awk" | "sed" => {
            let file = args.iter().skip(1).filter(|a| !a.starts_with('-')).last().cloned();
            (Op::Read, obj_of(file), None)
        }
        "ls" | "find" | "du" | "stat" => (Op::Collect, obj_of(operand), None),
        "rm" | "rmdir" | "shred" | "unlink" => {
            let file = args.iter().skip(1).filter(|a| !a.starts_with('-')).last().cloned();
            (Op::Delete, obj_of(file), None)
        }
        "cp" | "mv" | "tee" | "touch" | "mkdir" | "chmod" | "ln" => {
            let file = args.iter().skip(1).filter(|a| !a.starts_with('-')).last().cloned();
            (Op::Write, obj_of(file), None)
        }
        "env" | "printenv" => (Op::Collect, "env".to_string(), None),
        "hostname" | "uname" | "whoami" | "id" | "ifconfig" | "ip" => {
            (Op::Collect, "host_identifiers".to_string(), None)
        }
        "history" => (Op::Read, "shell_history".to_string(), None),
        "crontab" => (Op::Write, "crontab".to_string(), None),
        "git" => match args.get(1).map(String::as_str) {
            Some("log" | "diff" | "show" | "status" | "blame" | "shortlog") => (Op::Read, "commits".to_string(), None),
            Some("push") => (Op::Send, "commits".to_string(), args.get(2).cloned()),
            Some("clone" | "fetch" | "pull") => (Op::Receive, "repository".to_string(), None),
            Some("commit" | "add" | "checkout" | "reset") => (Op::Write, "repository".to_string(), None),
            _ => (Op::Exec, "git".to_string(), None),
        },
        "python" | "python3" | "node" | "bash" | "sh" | "zsh" | "eval" | "exec" | "source" | "." => {
            (Op::Exec, obj_of(operand), None)
        }
        "echo" | "printf" | "cd" | "export" | "set" | "true" | "false" | ":" | "exit" | "return"
        | "local" | "read" | "shift" | "test" | "[" | "sleep" | "pwd" | "date" => {
            (Op::Other(String::new()), String::new(), None)
        }
        other => match lexicon::op_for_verb(other) {
            Some(op) => (op, obj_of(operand), None),
            None => (Op::Exec, name.clone(), None),
        },
    };
    let mut r = r;
    if let Some(redirect) = cmd.split_once('>').map(|(_, t)| t.trim_start_matches('>').trim()) {
        if !redirect.is_empty() && !redirect.starts_with('&') && r.0 != Op::Send {
            let target = redirect.split_whitespace().next().unwrap_or("").to_string();
            if target != "/dev/null" {
                r = (Op::Write, target, None);
            }
        }
    }
    (r.0 != Op::Other(String::new())).then_some(r)
}

/// Splits a line into simple commands at `;`, `&&`, `||` and `|`, outside quotes.
fn simple_commands(line: &str) -> Vec<(usize, usize)> {
    let bytes = line.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut quote: Option<u8> = None;
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None => match c {
                b'\'' | b'"' => quote = Some(c),
                b'#' if i == 0 || bytes[i - 1].is_ascii_whitespace() => {
                    out.push((start, i));
                    start = bytes.len();
                    break;
                }
                b';' | b'|' | b'&' => {
                    let w = if i + 1 < bytes.len() && (bytes[i + 1] == b'&' || bytes[i + 1] == b'|') { 2 } else { 1 };
                    // `2>&1` style redirections are not separators
                    if c == b'&' && w == 1 && i > 0 && bytes[i - 1] == b'>' {
                        i += 1;
                        continue;
                    }
                    out.push((start, i));
                    start = i + w;
                    i += w;
                    continue;
                }
                _ => {}
            },
        }
        i += 1;
    }
    if start < bytes.len() {
        out.push((start, bytes.len()));
    }
    out.into_iter()
        .filter_map(|(a, b)| {
            let s = &line[a..b];
            let lead = s.len() - s.trim_start().len();
            let t = s.trim();
            (!t.is_empty()).then_some((a + lead, a + lead + t.len()))
        })
        .collect()
}

enum Frame {
    If { pred: String, then_out: Option<Vec<(String, Option<String>)>> },
    Loop { pred: String },
}

pub fn build(owning_skill: &str, script: &ScriptArtifact) -> UnifiedGraph {
    let artifact = Artifact::Script(script.relative_path.clone());
    let src = &script.source;
    let mut b = Builder::new(owning_skill, artifact.clone());
    let mut stack: Vec<Frame> = Vec::new();
    let mut offset = 0;
    let t = || Some(super::TRUE_LABEL.to_string());
    let f = || Some(super::FALSE_LABEL.to_string());

    let pred_node = |phi: &str, s: usize, e: usize, kind: PredKind| {
        let negated = phi.trim_start().starts_with('!');
        Node::Predicate(PredicateNode {
            id: node_id(&artifact, (s, e), ""),
            layer: Layer::Code,
            phi: phi.trim_start_matches('!').trim().to_string(),
            pred_kind: kind,
            negated,
            context: String::new(),
            src: Provenance::new(artifact.clone(), src, s, e),
        })
    };

    for line in src.split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        let content = line.trim_end_matches(['\n', '\r']);
        let trimmed = content.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed.ends_with("() {") || trimmed.starts_with("function ") || trimmed.starts_with("case ") {
            return super::opaque_graph(owning_skill, script, "shell functions and case blocks are not analyzed");
        }
        let lead = content.len() - content.trim_start().len();
        let abs = line_start + lead;
        let head = trimmed.split_whitespace().next().unwrap_or("");
        match head {
            "if" | "elif" | "while" | "for" | "until" => {
                let cond_end = trimmed
                    .find("; then")
                    .or_else(|| trimmed.find("; do"))
                    .unwrap_or(trimmed.len());
                let cond = trimmed[head.len()..cond_end].trim();
                let (s, e) = (abs, abs + cond_end);
                if head == "elif" {
                    let Some(Frame::If { pred, then_out }) = stack.last_mut() else {
                        return super::opaque_graph(owning_skill, script, "unbalanced elif");
                    };
                    let mut outs = then_out.take().unwrap_or_default();
                    outs.append(&mut b.pending);
                    b.pending = vec![(pred.clone(), f())];
                    *then_out = Some(outs);
                    let id = b.add_node(pred_node(cond, s, e, PredKind::Branch));
                    *pred = id.clone();
                    b.pending = vec![(id, t())];
                    continue;
                }
                let kind = if head == "if" { PredKind::Branch } else { PredKind::Loop };
                let phi = if cond.is_empty() { head } else { cond };
                let id = b.add_node(pred_node(phi, s, e, kind));
                b.pending = vec![(id.clone(), t())];
                stack.push(if kind == PredKind::Loop { Frame::Loop { pred: id } } else { Frame::If { pred: id, then_out: None } });
                continue;
            }
            "then" | "do" => continue,
            "else" => {
                let Some(Frame::If { pred, then_out }) = stack.last_mut() else {
                    return super::opaque_graph(owning_skill, script, "unbalanced else");
                };
                let mut outs = then_out.take().unwrap_or_default();
                outs.append(&mut b.pending);
                *then_out = Some(outs);
                b.pending = vec![(pred.clone(), f())];
                // mark the false edge as consumed
                *pred = String::new();
                continue;
            }
            "fi" => {
                let Some(Frame::If { pred, then_out }) = stack.pop() else {
                    return super::opaque_graph(owning_skill, script, "unbalanced fi");
                };
                if let Some(outs) = then_out {
                    b.pending.extend(outs);
                }
                if !pred.is_empty() {
                    b.pending.push((pred, f()));
                }
                continue;
            }
            "done" => {
                let Some(Frame::Loop { pred }) = stack.pop() else {
                    return super::opaque_graph(owning_skill, script, "unbalanced done");
                };
                b.connect_to(&pred);
                b.pending = vec![(pred, f())];
                continue;
            }
            _ => {}
        }
        for (a, e) in simple_commands(trimmed) {
            let cmd = &trimmed[a..e];
            let Some((op, obj, destination)) = classify_command(cmd) else { continue };
            let (s, e) = (abs + a, abs + e);
            b.add_node(Node::Action(ActionNode {
                id: node_id(&artifact, (s, e), ""),
                layer: Layer::Code,
                phrase: format!("{} {}", op.verb(), obj.replace('_', " ")),
                op,
                obj,
                destination,
                invokes: None,
                function: None,
                unparsed: false,
        context: String::new(),
                src: Provenance::new(artifact.clone(), src, s, e),
            }));
        }
    }
    if !stack.is_empty() {
        return super::opaque_graph(owning_skill, script, "unterminated shell block");
    }
    b.finish()
}
