//! Python scripts: a line/indent parser, call classification and
//! reaching-definitions dataflow with inlining of local functions.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{node_id, ActionNode, BuildOptions, Builder, EdgeKind, Layer, Node, NodeId, PredKind, PredicateNode, UnifiedGraph};
use crate::bundle::ScriptArtifact;
use crate::lexicon::{self, Op};
use crate::provenance::{Artifact, Provenance};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("python parse failure at byte {at}: {reason}")]
pub struct ParseFailure {
    pub at: usize,
    pub reason: String,
}

fn fail<T>(at: usize, reason: &str) -> Result<T, ParseFailure> {
    Err(ParseFailure { at, reason: reason.to_string() })
}

pub type Span = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
struct Line {
    start: usize,
    end: usize,
    indent: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Simple,
    If { arms: Vec<(Span, Vec<Stmt>)>, else_body: Option<Vec<Stmt>> },
    For { target: String, iter: Span, header: Span, body: Vec<Stmt>, else_body: Option<Vec<Stmt>> },
    While { cond: Span, body: Vec<Stmt>, else_body: Option<Vec<Stmt>> },
    Def { name: String, params: Vec<String>, body: Vec<Stmt> },
    Try { body: Vec<Stmt>, handlers: Vec<(Span, Vec<Stmt>)>, else_body: Option<Vec<Stmt>>, finally_body: Option<Vec<Stmt>> },
    With { items: Span, body: Vec<Stmt> },
    Main { body: Vec<Stmt> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    /// Whole statement including any nested blocks.
    pub span: Span,
    pub indent: usize,
}

impl Stmt {
    fn children(&self) -> Vec<&Vec<Stmt>> {
        match &self.kind {
            StmtKind::Simple => vec![],
            StmtKind::If { arms, else_body } => {
                arms.iter().map(|(_, b)| b).chain(else_body.iter()).collect()
            }
            StmtKind::For { body, else_body, .. } | StmtKind::While { body, else_body, .. } => {
                std::iter::once(body).chain(else_body.iter()).collect()
            }
            StmtKind::Def { body, .. } | StmtKind::With { body, .. } | StmtKind::Main { body } => vec![body],
            StmtKind::Try { body, handlers, else_body, finally_body } => std::iter::once(body)
                .chain(handlers.iter().map(|(_, b)| b))
                .chain(else_body.iter())
                .chain(finally_body.iter())
                .collect(),
        }
    }
}

/// Parsed module: statements plus every string-literal span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Module {
    pub stmts: Vec<Stmt>,
    pub strings: Vec<Span>,
}

const KEYWORDS: &[&str] = &[
    "if", "elif", "else", "for", "while", "def", "class", "try", "except", "finally", "with",
    "return", "and", "or", "not", "in", "is", "lambda", "None", "True", "False", "pass", "break",
    "continue", "import", "from", "as", "global", "nonlocal", "assert", "del", "raise", "yield",
    "async", "await",
];

fn is_ident_byte(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

/// Splits source into logical lines and collects string spans.
fn lex(src: &str) -> Result<(Vec<Line>, Vec<Span>), ParseFailure> {
    let b = src.as_bytes();
    let n = b.len();
    let mut lines = Vec::new();
    let mut strings = Vec::new();
    let mut depth: i32 = 0;
    let mut start: Option<usize> = None;
    let mut last_end = 0;
    let mut i = 0;
    while i < n {
        let c = b[i];
        match c {
            b'#' => {
                while i < n && b[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            b'\'' | b'"' => {
                let mut s = i;
                while s > 0 && matches!(b[s - 1], b'r' | b'b' | b'f' | b'u' | b'R' | b'B' | b'F' | b'U') && i - s < 2 {
                    s -= 1;
                }
                if s > 0 && is_ident_byte(b[s - 1]) {
                    s = i;
                }
                let triple = i + 2 < n && b[i + 1] == c && b[i + 2] == c;
                let mut j = if triple { i + 3 } else { i + 1 };
                let end = loop {
                    if j >= n {
                        return fail(i, "unterminated string literal");
                    }
                    if b[j] == b'\\' {
                        j += 2;
                        continue;
                    }
                    if triple {
                        if j + 2 < n + 0 && b[j] == c && b[j + 1] == c && b[j + 2] == c {
                            break j + 3;
                        }
                    } else if b[j] == c {
                        break j + 1;
                    } else if b[j] == b'\n' {
                        return fail(i, "newline in string literal");
                    }
                    j += 1;
                };
                strings.push((s, end));
                if start.is_none() {
                    start = Some(s);
                }
                last_end = end;
                i = end;
                continue;
            }
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => {
                depth -= 1;
                if depth < 0 {
                    return fail(i, "unbalanced closing bracket");
                }
            }
            b'\\' if i + 1 < n && b[i + 1] == b'\n' => {
                i += 2;
                continue;
            }
            b'\n' => {
                if depth == 0 {
                    if let Some(s) = start.take() {
                        lines.push(Line { start: s, end: last_end, indent: indent_of(src, s) });
                    }
                }
                i += 1;
                continue;
            }
            _ => {}
        }
        if !c.is_ascii_whitespace() {
            if start.is_none() {
                start = Some(i);
            }
            last_end = i + 1;
        }
        i += 1;
    }
    if depth != 0 {
        return fail(n, "unbalanced brackets at end of file");
    }
    if let Some(s) = start {
        lines.push(Line { start: s, end: last_end, indent: indent_of(src, s) });
    }
    Ok((lines, strings))
}

fn indent_of(src: &str, pos: usize) -> usize {
    let line_start = src[..pos].rfind('\n').map(|p| p + 1).unwrap_or(0);
    pos - line_start
}

fn in_string(strings: &[Span], pos: usize) -> Option<Span> {
    strings.iter().find(|(s, e)| pos >= *s && pos < *e).copied()
}

/// Finds the first `target` byte at bracket depth 0 outside strings in `[s, e)`.
fn find_top(src: &str, strings: &[Span], s: usize, e: usize, target: u8) -> Option<usize> {
    let b = src.as_bytes();
    let mut depth = 0i32;
    let mut i = s;
    while i < e {
        if let Some((_, end)) = in_string(strings, i) {
            i = end;
            continue;
        }
        match b[i] {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => depth -= 1,
            c if c == target && depth == 0 => {
                // skip `:=`, `==`, `!=`, `<=`, `>=`
                let next = b.get(i + 1).copied();
                let prev = if i > 0 { b[i - 1] } else { 0 };
                let compound = next == Some(b'=') || (target == b'=' && matches!(prev, b'=' | b'!' | b'<' | b'>' | b':' | b'+' | b'-' | b'*' | b'/' | b'%' | b'&' | b'|' | b'^'));
                if !compound || target == b';' {
                    return Some(i);
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}

/// Splits `[s, e)` at top-level occurrences of `sep`, trimming each piece.
fn split_top(src: &str, strings: &[Span], s: usize, e: usize, sep: u8) -> Vec<Span> {
    let mut out = Vec::new();
    let mut from = s;
    while let Some(p) = find_top(src, strings, from, e, sep) {
        out.push(trim_span(src, from, p));
        from = p + 1;
    }
    out.push(trim_span(src, from, e));
    out.into_iter().filter(|(a, b)| a < b).collect()
}

fn trim_span(src: &str, s: usize, e: usize) -> Span {
    let t = &src[s..e];
    let lead = t.len() - t.trim_start().len();
    (s + lead, s + lead + t.trim().len())
}

fn first_word(text: &str) -> &str {
    let end = text.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(text.len());
    &text[..end]
}

/// Parses Python source into a statement tree.
pub fn parse(src: &str) -> Result<Module, ParseFailure> {
    let (lines, strings) = lex(src)?;
    let mut p = Parser { src, strings: &strings, lines: &lines, idx: 0 };
    let stmts = if lines.is_empty() { Vec::new() } else { p.block(lines[0].indent)? };
    if p.idx < lines.len() {
        return fail(lines[p.idx].start, "unexpected dedent");
    }
    Ok(Module { stmts, strings })
}

struct Parser<'a> {
    src: &'a str,
    strings: &'a [Span],
    lines: &'a [Line],
    idx: usize,
}

impl<'a> Parser<'a> {
    fn block(&mut self, indent: usize) -> Result<Vec<Stmt>, ParseFailure> {
        let mut out = Vec::new();
        while self.idx < self.lines.len() {
            let l = &self.lines[self.idx];
            if l.indent < indent {
                break;
            }
            if l.indent > indent {
                return fail(l.start, "unexpected indent");
            }
            let kw = first_word(&self.src[l.start..l.end]);
            if matches!(kw, "elif" | "else" | "except" | "finally") {
                return fail(l.start, "dangling clause");
            }
            out.extend(self.statement()?);
        }
        Ok(out)
    }

    /// Returns the header colon position and optional inline body span.
    fn header(&self, l: &Line) -> Result<(usize, Option<Span>), ParseFailure> {
        let colon = find_top(self.src, self.strings, l.start, l.end, b':')
            .ok_or(ParseFailure { at: l.start, reason: "compound statement without `:`".into() })?;
        let rest = trim_span(self.src, colon + 1, l.end);
        Ok((colon, (rest.0 < rest.1).then_some(rest)))
    }

    /// Body of a compound statement whose header line is at `self.idx`.
    fn body(&mut self, l: &Line, inline: Option<Span>) -> Result<(Vec<Stmt>, usize), ParseFailure> {
        self.idx += 1;
        if let Some((s, e)) = inline {
            let stmts = self.simple_stmts(s, e, l.indent + 1);
            return Ok((stmts, e));
        }
        let Some(next) = self.lines.get(self.idx) else {
            return fail(l.end, "missing block body");
        };
        if next.indent <= l.indent {
            return fail(next.start, "expected an indented block");
        }
        let stmts = self.block(next.indent)?;
        let end = stmts.last().map(|s| s.span.1).unwrap_or(l.end);
        Ok((stmts, end))
    }

    fn simple_stmts(&self, s: usize, e: usize, indent: usize) -> Vec<Stmt> {
        split_top(self.src, self.strings, s, e, b';')
            .into_iter()
            .map(|span| Stmt { kind: StmtKind::Simple, span, indent })
            .collect()
    }

    fn peek_clause(&self, indent: usize, kws: &[&'static str]) -> Option<&'static str> {
        let l = self.lines.get(self.idx)?;
        if l.indent != indent {
            return None;
        }
        let kw = first_word(&self.src[l.start..l.end]);
        kws.iter().find(|k| **k == kw).copied()
    }

    fn statement(&mut self) -> Result<Vec<Stmt>, ParseFailure> {
        let l = self.lines[self.idx].clone();
        let text = &self.src[l.start..l.end];
        let mut kw = first_word(text);
        let mut kw_start = l.start;
        if text.starts_with('@') {
            self.idx += 1;
            return Ok(vec![]);
        }
        if kw == "async" {
            let rest = text[5..].trim_start();
            kw_start = l.end - rest.len();
            kw = first_word(rest);
        }
        let after_kw = kw_start + kw.len();
        match kw {
            "class" => fail(l.start, "class definitions are not analyzed"),
            "if" => {
                let (colon, inline) = self.header(&l)?;
                let cond = trim_span(self.src, after_kw, colon);
                let ctext: String = self.src[cond.0..cond.1].split_whitespace().collect();
                if ctext.contains("__name__") && ctext.contains("__main__") {
                    let (body, end) = self.body(&l, inline)?;
                    return Ok(vec![Stmt { kind: StmtKind::Main { body }, span: (l.start, end), indent: l.indent }]);
                }
                let (body, mut end) = self.body(&l, inline)?;
                let mut arms = vec![(cond, body)];
                let mut else_body = None;
                while let Some(k) = self.peek_clause(l.indent, &["elif", "else"]) {
                    let cl = self.lines[self.idx].clone();
                    let (colon, inline) = self.header(&cl)?;
                    let (b, e) = self.body(&cl, inline)?;
                    end = e;
                    if k == "elif" {
                        arms.push((trim_span(self.src, cl.start + 4, colon), b));
                    } else {
                        else_body = Some(b);
                        break;
                    }
                }
                Ok(vec![Stmt { kind: StmtKind::If { arms, else_body }, span: (l.start, end), indent: l.indent }])
            }
            "for" | "while" => {
                let (colon, inline) = self.header(&l)?;
                let header = trim_span(self.src, after_kw, colon);
                let (body, mut end) = self.body(&l, inline)?;
                let mut else_body = None;
                if self.peek_clause(l.indent, &["else"]).is_some() {
                    let cl = self.lines[self.idx].clone();
                    let (_, inline) = self.header(&cl)?;
                    let (b, e) = self.body(&cl, inline)?;
                    else_body = Some(b);
                    end = e;
                }
                let kind = if kw == "for" {
                    let htext = &self.src[header.0..header.1];
                    let Some(pos) = htext.find(" in ") else {
                        return fail(header.0, "for without `in`");
                    };
                    let iter = trim_span(self.src, header.0 + pos + 4, header.1);
                    StmtKind::For { target: htext[..pos].trim().to_string(), iter, header, body, else_body }
                } else {
                    StmtKind::While { cond: header, body, else_body }
                };
                Ok(vec![Stmt { kind, span: (l.start, end), indent: l.indent }])
            }
            "def" => {
                let (colon, inline) = self.header(&l)?;
                let sig = &self.src[after_kw..colon];
                let open = sig.find('(').ok_or(ParseFailure { at: l.start, reason: "def without parameters".into() })?;
                let close = sig.rfind(')').ok_or(ParseFailure { at: l.start, reason: "def without `)`".into() })?;
                let name = sig[..open].trim().to_string();
                let params = sig[open + 1..close]
                    .split(',')
                    .map(|p| {
                        let p = p.split([':', '=']).next().unwrap_or("").trim();
                        p.trim_start_matches('*').to_string()
                    })
                    .filter(|p| !p.is_empty() && p != "self" && p != "/")
                    .collect();
                let (body, end) = self.body(&l, inline)?;
                Ok(vec![Stmt { kind: StmtKind::Def { name, params, body }, span: (l.start, end), indent: l.indent }])
            }
            "try" => {
                let (_, inline) = self.header(&l)?;
                let (body, mut end) = self.body(&l, inline)?;
                let mut handlers = Vec::new();
                let mut else_body = None;
                let mut finally_body = None;
                while let Some(k) = self.peek_clause(l.indent, &["except", "else", "finally"]) {
                    let cl = self.lines[self.idx].clone();
                    let (colon, inline) = self.header(&cl)?;
                    let (b, e) = self.body(&cl, inline)?;
                    end = e;
                    match k {
                        "except" => handlers.push((trim_span(self.src, cl.start, colon), b)),
                        "else" => else_body = Some(b),
                        _ => finally_body = Some(b),
                    }
                }
                if handlers.is_empty() && finally_body.is_none() {
                    return fail(l.start, "try without handlers");
                }
                Ok(vec![Stmt { kind: StmtKind::Try { body, handlers, else_body, finally_body }, span: (l.start, end), indent: l.indent }])
            }
            "with" => {
                let (colon, inline) = self.header(&l)?;
                let items = trim_span(self.src, after_kw, colon);
                let (body, end) = self.body(&l, inline)?;
                Ok(vec![Stmt { kind: StmtKind::With { items, body }, span: (l.start, end), indent: l.indent }])
            }
            _ => {
                self.idx += 1;
                Ok(self.simple_stmts(l.start, l.end, l.indent))
            }
        }
    }
}

/// Walks all statements depth-first.
pub fn walk<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt, &[&'a Stmt])) {
    fn go<'a>(stmts: &'a [Stmt], stack: &mut Vec<&'a Stmt>, f: &mut dyn FnMut(&'a Stmt, &[&'a Stmt])) {
        for s in stmts {
            f(s, stack);
            stack.push(s);
            for c in s.children() {
                go(c, stack, f);
            }
            stack.pop();
        }
    }
    go(stmts, &mut Vec::new(), f);
}

/// A call expression `name(args)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Call {
    pub name: String,
    pub name_start: usize,
    pub open: usize,
    pub close: usize,
    /// Receiver span for method calls on a call result, e.g. `open(p).read()`.
    pub receiver: Option<Span>,
}

impl Call {
    pub fn span(&self) -> Span {
        (self.name_start, self.close + 1)
    }
}

fn matching_close(src: &str, strings: &[Span], open: usize) -> Option<usize> {
    let b = src.as_bytes();
    let mut depth = 0i32;
    let mut i = open;
    while i < b.len() {
        if let Some((_, end)) = in_string(strings, i) {
            i = end;
            continue;
        }
        match b[i] {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}

fn matching_open(src: &str, strings: &[Span], close: usize) -> Option<usize> {
    let b = src.as_bytes();
    let mut depth = 0i32;
    let mut i = close + 1;
    while i > 0 {
        i -= 1;
        if let Some((s, _)) = in_string(strings, i) {
            i = s;
            continue;
        }
        match b[i] {
            b')' | b']' | b'}' => depth += 1,
            b'(' | b'[' | b'{' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Calls within `[s, e)` in evaluation order (innermost first).
pub fn calls_in(src: &str, strings: &[Span], s: usize, e: usize) -> Vec<Call> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = s;
    while i < e {
        if let Some((_, end)) = in_string(strings, i) {
            i = end;
            continue;
        }
        if b[i] == b'(' {
            let mut ns = i;
            while ns > s && (is_ident_byte(b[ns - 1]) || b[ns - 1] == b'.') {
                ns -= 1;
            }
            let name = &src[ns..i];
            let keyword = KEYWORDS.contains(&name);
            if !name.is_empty() && !keyword && !name.chars().next().unwrap().is_ascii_digit() {
                if let Some(close) = matching_close(src, strings, i).filter(|c| *c < e) {
                    let mut receiver = None;
                    let mut name_start = ns;
                    if name.starts_with('.') && ns > s && matches!(b[ns - 1], b')' | b']') {
                        if let Some(o) = matching_open(src, strings, ns - 1) {
                            let mut rs = o;
                            while rs > s && (is_ident_byte(b[rs - 1]) || b[rs - 1] == b'.') {
                                rs -= 1;
                            }
                            receiver = Some((rs, ns));
                            name_start = rs;
                        }
                    }
                    out.push(Call { name: name.to_string(), name_start, open: i, close, receiver });
                }
            }
        }
        i += 1;
    }
    // bare `os.environ` reads
    let mut from = s;
    while let Some(p) = src[from..e].find("os.environ") {
        let at = from + p;
        let after = at + "os.environ".len();
        let before_ok = at == 0 || !(is_ident_byte(b[at - 1]) || b[at - 1] == b'.');
        let after_ok = after >= b.len() || !(is_ident_byte(b[after]) || b[after] == b'.');
        if before_ok && after_ok && in_string(strings, at).is_none() {
            out.push(Call { name: "os.environ".into(), name_start: at, open: after, close: after - 1, receiver: None });
        }
        from = after;
    }
    out.sort_by_key(|c| (c.close, std::cmp::Reverse(c.name_start)));
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Atom {
    Lit(String),
    Ident(String),
}

fn unquote_literal(lit: &str) -> String {
    let body = lit.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    let q = if body.starts_with("\"\"\"") || body.starts_with("'''") { 3 } else { 1 };
    if body.len() >= 2 * q {
        body[q..body.len() - q].to_string()
    } else {
        body.to_string()
    }
}

/// String literals and plain identifiers in `[s, e)`, in order; dict keys
/// and function names are skipped.
fn atoms(src: &str, strings: &[Span], s: usize, e: usize) -> Vec<Atom> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = s;
    while i < e {
        if let Some((ss, se)) = in_string(strings, i) {
            let after = src[se.min(e)..e].trim_start();
            if !after.starts_with(':') {
                out.push(Atom::Lit(unquote_literal(&src[ss..se])));
            }
            i = se;
            continue;
        }
        if b[i].is_ascii_alphabetic() || b[i] == b'_' {
            let st = i;
            while i < e && (is_ident_byte(b[i]) || b[i] == b'.') {
                i += 1;
            }
            let word = src[st..i].trim_end_matches('.');
            let preceded_by_dot = st > 0 && b[st - 1] == b'.';
            let called = i < e && b[i] == b'(';
            let kwarg = src[i..e].trim_start().starts_with('=') && !src[i..e].trim_start().starts_with("==");
            if !called && !kwarg && !preceded_by_dot && !KEYWORDS.contains(&word) {
                out.push(Atom::Ident(word.to_string()));
            }
            continue;
        }
        i += 1;
    }
    out
}

fn root_ident(dotted: &str) -> &str {
    dotted.split('.').next().unwrap_or(dotted)
}

#[derive(Debug, Clone)]
struct Arg {
    key: Option<String>,
    span: Span,
}

fn args_of(src: &str, strings: &[Span], call: &Call) -> Vec<Arg> {
    if call.close <= call.open {
        return Vec::new();
    }
    split_top(src, strings, call.open + 1, call.close, b',')
        .into_iter()
        .map(|span| {
            let text = &src[span.0..span.1];
            match find_top(src, strings, span.0, span.1, b'=') {
                Some(eq) if first_word(text).len() == eq - span.0 => {
                    Arg { key: Some(text[..eq - span.0].trim().to_string()), span: trim_span(src, eq + 1, span.1) }
                }
                _ => Arg { key: None, span },
            }
        })
        .collect()
}

const BUILTINS: &[&str] = &[
    "print", "len", "str", "int", "float", "bool", "list", "dict", "set", "tuple", "sorted",
    "range", "enumerate", "zip", "map", "filter", "min", "max", "sum", "any", "all",
    "isinstance", "format", "repr", "abs", "round", "type", "super", "getattr", "setattr",
    "hasattr", "iter", "next", "reversed", "Path", "input", "vars", "id", "hash", "bytes",
    "Counter", "defaultdict", "OrderedDict", "namedtuple", "datetime", "timedelta",
];

/// Result of classifying one call.
enum CallClass {
    Primitive(Op, String, Option<String>),
    UserFn(String),
    HandleMethod,
    Passthrough,
}

struct Env {
    defs: BTreeMap<String, BTreeSet<NodeId>>,
}

impl Env {
    fn get(&self, name: &str) -> BTreeSet<NodeId> {
        self.defs.get(root_ident(name)).cloned().unwrap_or_default()
    }

    fn merge(&mut self, other: &Env) {
        for (k, v) in &other.defs {
            self.defs.entry(k.clone()).or_default().extend(v.iter().cloned());
        }
    }

    fn clone_env(&self) -> Env {
        Env { defs: self.defs.clone() }
    }
}

struct Frame {
    returns: Vec<(NodeId, Option<String>)>,
    ret_defs: BTreeSet<NodeId>,
}

struct Ctx<'a> {
    b: Builder,
    src: &'a str,
    strings: &'a [Span],
    artifact: Artifact,
    consts: BTreeMap<String, String>,
    functions: BTreeMap<String, &'a Stmt>,
    splice_count: BTreeMap<String, usize>,
    stack: Vec<String>,
    frames: Vec<Frame>,
    context: String,
    current_fn: Option<String>,
    opts: BuildOptions,
    write_handles: BTreeMap<NodeId, Op>,
}

impl<'a> Ctx<'a> {
    fn text(&self, s: Span) -> &'a str {
        &self.src[s.0..s.1]
    }

    fn resolve(&self, span: Span) -> String {
        let atoms = atoms(self.src, self.strings, span.0, span.1);
        match atoms.last() {
            Some(Atom::Lit(l)) => l.clone(),
            Some(Atom::Ident(id)) => {
                if let Some(v) = self.consts.get(id.as_str()) {
                    return v.clone();
                }
                id.rsplit('.').next().unwrap_or(id).to_string()
            }
            None => self.text(span).to_string(),
        }
    }

    fn resolve_list(&self, span: Span) -> String {
        let t = self.text(span).trim();
        if t.starts_with('[') || t.starts_with('(') {
            let parts: Vec<String> = atoms(self.src, self.strings, span.0, span.1)
                .into_iter()
                .map(|a| match a {
                    Atom::Lit(l) => l,
                    Atom::Ident(i) => self.consts.get(&i).cloned().unwrap_or(i),
                })
                .collect();
            return parts.join(" ");
        }
        self.resolve(span)
    }

    fn classify(&self, call: &Call, args: &[Arg]) -> CallClass {
        let name = call.name.as_str();
        let last = name.rsplit('.').next().unwrap_or(name);
        let pos = |i: usize| args.iter().filter(|a| a.key.is_none()).nth(i).map(|a| a.span);
        let kw = |k: &str| args.iter().find(|a| a.key.as_deref() == Some(k)).map(|a| a.span);
        let recv_obj = || {
            if let Some(r) = call.receiver {
                let inner = calls_in(self.src, self.strings, r.0, r.1);
                if let Some(c) = inner.last() {
                    let a = args_of(self.src, self.strings, c);
                    if let Some(first) = a.first() {
                        return self.resolve(first.span);
                    }
                }
                return self.resolve(r);
            }
            let recv = name.rsplit_once('.').map(|(r, _)| r).unwrap_or("");
            self.consts.get(recv).cloned().unwrap_or_else(|| recv.to_string())
        };
        let url_dest = |s: &str| lexicon::url_host(s).or_else(|| lexicon::destination_in(s));
        let prim = |op: Op, obj: String, dest: Option<String>| CallClass::Primitive(op, obj, dest);

        if self.functions.contains_key(name) {
            return CallClass::UserFn(name.to_string());
        }
        match name {
            "open" | "io.open" | "codecs.open" => {
                let path = pos(0).map(|s| self.resolve(s)).unwrap_or_else(|| "file".into());
                let mode = pos(1).or_else(|| kw("mode")).map(|s| self.resolve(s)).unwrap_or_default();
                let op = if mode.contains(['w', 'a', 'x']) { Op::Write } else { Op::Read };
                return prim(op, path, None);
            }
            "os.environ" | "os.getenv" | "os.environ.get" | "os.environ.copy" | "os.environ.items" => {
                return prim(Op::Collect, "env".into(), None)
            }
            "socket.gethostname" | "platform.node" | "platform.uname" | "getpass.getuser" | "os.getlogin"
            | "uuid.getnode" | "os.uname" | "socket.gethostbyname" | "platform.platform" => {
                return prim(Op::Collect, "host_identifiers".into(), None)
            }
            "os.listdir" | "glob.glob" | "os.walk" | "os.scandir" | "glob.iglob" => {
                let obj = pos(0).map(|s| self.resolve(s)).unwrap_or_else(|| "files".into());
                return prim(Op::Collect, obj, None);
            }
            "os.remove" | "os.unlink" | "shutil.rmtree" | "os.rmdir" | "os.removedirs" => {
                let obj = pos(0).map(|s| self.resolve(s)).unwrap_or_else(|| "file".into());
                return prim(Op::Delete, obj, None);
            }
            "shutil.copy" | "shutil.copyfile" | "shutil.copy2" | "shutil.move" | "os.rename" | "os.replace"
            | "os.chmod" | "os.symlink" => {
                let obj = pos(1).or(pos(0)).map(|s| self.resolve(s)).unwrap_or_else(|| "file".into());
                return prim(Op::Write, obj, None);
            }
            "subprocess.run" | "subprocess.call" | "subprocess.check_call" | "subprocess.check_output"
            | "subprocess.Popen" | "os.system" | "os.popen" | "eval" | "exec" | "os.execv" | "os.execvp" => {
                let cmd = pos(0).map(|s| self.resolve_list(s)).unwrap_or_else(|| "command".into());
                return match super::shell::classify_command(&cmd) {
                    Some((op, obj, dest)) if op != Op::Exec => prim(op, obj, dest),
                    _ => prim(Op::Exec, cmd.split_whitespace().next().unwrap_or("command").to_string(), None),
                };
            }
            "urllib.request.urlopen" | "urlopen" | "request.urlopen" => {
                let url = pos(0).map(|s| self.resolve(s)).unwrap_or_else(|| "url".into());
                let data = pos(1).or_else(|| kw("data"));
                let dest = url_dest(&url);
                return match data {
                    Some(d) => prim(Op::Send, self.resolve(d), dest),
                    None => prim(Op::Receive, url, dest),
                };
            }
            _ => {}
        }
        let http_client = matches!(root_ident(name), "requests" | "httpx" | "session" | "client" | "http" | "aiohttp");
        if http_client && matches!(last, "post" | "put" | "patch") {
            let url = pos(0).or_else(|| kw("url")).map(|s| self.resolve(s)).unwrap_or_else(|| "url".into());
            let payload = kw("data").or_else(|| kw("json")).or_else(|| kw("files")).or(pos(1));
            let obj = payload.map(|s| self.resolve(s)).unwrap_or_else(|| url.clone());
            return prim(Op::Send, obj, url_dest(&url));
        }
        if http_client && matches!(last, "get" | "request" | "head") {
            let url = pos(0).or_else(|| kw("url")).map(|s| self.resolve(s)).unwrap_or_else(|| "url".into());
            return prim(Op::Receive, url.clone(), url_dest(&url));
        }
        match last {
            "sendall" | "send_message" | "sendmail" | "send_email" if name.contains('.') => {
                let obj = pos(0).map(|s| self.resolve(s)).unwrap_or_else(|| "message".into());
                return prim(Op::Send, obj, None);
            }
            "read_text" | "read_bytes" => return prim(Op::Read, recv_obj(), None),
            "write_text" | "write_bytes" => return prim(Op::Write, recv_obj(), None),
            "unlink" | "rmdir" if name.contains('.') => return prim(Op::Delete, recv_obj(), None),
            "write" | "writelines" | "dump" if name.contains('.') => return CallClass::HandleMethod,
            _ => {}
        }
        // unknown helpers named after a verb, e.g. `render_heatmap(rows)`
        if !name.contains('.') && !BUILTINS.contains(&name) {
            let parts: Vec<&str> = name.split('_').filter(|p| !p.is_empty()).collect();
            if let Some(op) = parts.first().and_then(|p| lexicon::op_for_verb(p)) {
                let obj = if parts.len() > 1 {
                    parts[1..].join("_")
                } else {
                    pos(0).map(|s| self.resolve(s)).unwrap_or_else(|| "other".into())
                };
                let dest = match op {
                    Op::Send | Op::Receive => pos(0).map(|s| self.resolve(s)).and_then(|u| url_dest(&u)),
                    _ => None,
                };
                return prim(op, obj, dest);
            }
        }
        CallClass::Passthrough
    }

    fn add_action(&mut self, call: &Call, op: Op, obj: String, destination: Option<String>) -> NodeId {
        let span = call.span();
        let node = Node::Action(ActionNode {
            id: node_id(&self.artifact, span, &self.context),
            layer: Layer::Code,
            phrase: format!("{} {}", op.verb(), obj.replace('_', " ")),
            op,
            obj,
            destination,
            invokes: None,
            function: self.current_fn.clone(),
            unparsed: false,
            context: self.context.clone(),
            src: Provenance::new(self.artifact.clone(), self.src, span.0, span.1),
        });
        self.b.add_node(node)
    }

    fn add_predicate(&mut self, span: Span, kind: PredKind) -> NodeId {
        let raw = self.text(span).split_whitespace().collect::<Vec<_>>().join(" ");
        let (negated, phi) = match raw.strip_prefix("not ") {
            Some(rest) => (true, rest.to_string()),
            None => (false, raw.clone()),
        };
        let phi = if phi.is_empty() { raw } else { phi };
        let node = Node::Predicate(PredicateNode {
            id: node_id(&self.artifact, span, &self.context),
            layer: Layer::Code,
            phi,
            pred_kind: kind,
            negated,
            context: self.context.clone(),
            src: Provenance::new(self.artifact.clone(), self.src, span.0, span.1),
        });
        self.b.add_node(node)
    }

    fn data_edges(&mut self, from: &BTreeSet<NodeId>, to: &str, label: &str) {
        for f in from {
            if f != to {
                self.b.g.add_edge(EdgeKind::Data, f, to, Some(label.to_string()));
            }
        }
    }

    /// Evaluates an expression: creates nodes for its calls and returns the
    /// definitions flowing out of it.
    fn expr(&mut self, span: Span, env: &mut Env) -> BTreeSet<NodeId> {
        let calls = calls_in(self.src, self.strings, span.0, span.1);
        let mut produced: BTreeMap<usize, BTreeSet<NodeId>> = BTreeMap::new();
        let mut value = BTreeSet::new();
        for call in &calls {
            let args = args_of(self.src, self.strings, call);
            let mut inputs: Vec<(String, BTreeSet<NodeId>)> = Vec::new();
            for (k, v) in &produced {
                if *k > call.open && *k < call.close {
                    inputs.push(("value".into(), v.clone()));
                }
            }
            if let Some(r) = call.receiver {
                for (k, v) in &produced {
                    if *k >= r.0 && *k < r.1 {
                        inputs.push(("value".into(), v.clone()));
                    }
                }
            }
            if call.close > call.open {
                for a in atoms(self.src, self.strings, call.open + 1, call.close) {
                    if let Atom::Ident(id) = a {
                        inputs.push((id.clone(), env.get(&id)));
                    }
                }
            }
            let recv_name = call.name.rsplit_once('.').map(|(r, _)| r.to_string());
            let out: BTreeSet<NodeId> = match self.classify(call, &args) {
                CallClass::Primitive(op, obj, dest) => {
                    let id = self.add_action(call, op.clone(), obj.clone(), dest);
                    for (label, defs) in &inputs {
                        let l = if label == "value" { obj.clone() } else { label.clone() };
                        self.data_edges(defs, &id, &l);
                    }
                    if let Some(r) = &recv_name {
                        let d = env.get(r);
                        self.data_edges(&d, &id, r);
                    }
                    if op == Op::Write {
                        self.write_handles.insert(id.clone(), op);
                    }
                    BTreeSet::from([id])
                }
                CallClass::UserFn(name) => {
                    let bound: Vec<BTreeSet<NodeId>> = args
                        .iter()
                        .map(|a| {
                            let mut d = BTreeSet::new();
                            for (k, v) in &produced {
                                if *k >= a.span.0 && *k < a.span.1 {
                                    d.extend(v.iter().cloned());
                                }
                            }
                            for at in atoms(self.src, self.strings, a.span.0, a.span.1) {
                                if let Atom::Ident(id) = at {
                                    d.extend(env.get(&id));
                                }
                            }
                            d
                        })
                        .collect();
                    self.splice(&name, bound, env)
                }
                CallClass::HandleMethod => {
                    let handle = recv_name.clone().unwrap_or_default();
                    let targets: Vec<NodeId> = env
                        .get(&handle)
                        .into_iter()
                        .filter(|d| self.write_handles.contains_key(d))
                        .collect();
                    for t in &targets {
                        for (label, defs) in &inputs {
                            let defs: BTreeSet<NodeId> = defs.iter().filter(|d| *d != t).cloned().collect();
                            self.data_edges(&defs, t, label);
                        }
                    }
                    BTreeSet::new()
                }
                CallClass::Passthrough => inputs.into_iter().flat_map(|(_, d)| d).collect(),
            };
            value.extend(out.iter().cloned());
            produced.insert(call.close, out);
        }
        for a in atoms(self.src, self.strings, span.0, span.1) {
            if let Atom::Ident(id) = a {
                value.extend(env.get(&id));
            }
        }
        value
    }

    fn splice(&mut self, name: &str, bound: Vec<BTreeSet<NodeId>>, env: &Env) -> BTreeSet<NodeId> {
        if self.stack.iter().any(|s| s == name) || self.stack.len() >= self.opts.max_splice_depth {
            return bound.into_iter().flatten().collect();
        }
        let Some(def) = self.functions.get(name).copied() else { return BTreeSet::new() };
        let StmtKind::Def { params, body, .. } = &def.kind else { return BTreeSet::new() };
        let count = self.splice_count.entry(name.to_string()).or_insert(0);
        *count += 1;
        let ctx = if *count == 1 { String::new() } else { format!("{name}#{count}") };
        let nested = if self.context.is_empty() {
            ctx.clone()
        } else if ctx.is_empty() {
            self.context.clone()
        } else {
            format!("{}/{ctx}", self.context)
        };
        let saved_ctx = std::mem::replace(&mut self.context, nested);
        let saved_fn = self.current_fn.replace(name.to_string());
        let mut fenv = Env { defs: BTreeMap::new() };
        for (k, v) in &env.defs {
            if !k.starts_with('_') || k == "__global__" {
                fenv.defs.insert(k.clone(), v.clone());
            }
        }
        for (i, p) in params.iter().enumerate() {
            fenv.defs.insert(p.clone(), bound.get(i).cloned().unwrap_or_default());
        }
        self.stack.push(name.to_string());
        self.frames.push(Frame { returns: Vec::new(), ret_defs: BTreeSet::new() });
        self.block(body, &mut fenv);
        let frame = self.frames.pop().expect("frame");
        self.b.pending.extend(frame.returns);
        self.stack.pop();
        self.context = saved_ctx;
        self.current_fn = saved_fn;
        frame.ret_defs
    }

    fn assign_targets(&self, targets: &str, defs: &BTreeSet<NodeId>, env: &mut Env, strong: bool) {
        for t in targets.split([',', '(', ')', '[', ']', '*']) {
            let t = t.trim();
            if t.is_empty() {
                continue;
            }
            let root = root_ident(t).to_string();
            if !root.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_') {
                continue;
            }
            if strong && !t.contains('.') {
                env.defs.insert(root, defs.clone());
            } else {
                env.defs.entry(root).or_default().extend(defs.iter().cloned());
            }
        }
    }

    fn simple(&mut self, s: &Stmt, env: &mut Env) {
        let text = self.text(s.span);
        let kw = first_word(text);
        match kw {
            "import" | "from" | "pass" | "break" | "continue" | "global" | "nonlocal" | "assert" | "del" => return,
            "return" => {
                let span = trim_span(self.src, s.span.0 + 6, s.span.1);
                let defs = if span.0 < span.1 { self.expr(span, env) } else { BTreeSet::new() };
                let pending = std::mem::take(&mut self.b.pending);
                if let Some(f) = self.frames.last_mut() {
                    f.ret_defs.extend(defs);
                    f.returns.extend(pending);
                }
                return;
            }
            _ => {}
        }
        // assignment: `a = b = expr`, `x += expr`, `x: T = expr`
        if let Some(eq) = find_top(self.src, self.strings, s.span.0, s.span.1, b'=') {
            let lhs = &self.src[s.span.0..eq];
            let augmented = lhs.ends_with(['+', '-', '*', '/', '%', '|', '&']);
            let rhs = trim_span(self.src, eq + 1, s.span.1);
            let mut defs = self.expr(rhs, env);
            let lhs = lhs.trim_end_matches(['+', '-', '*', '/', '%', '|', '&']);
            let lhs = lhs.split(':').next().unwrap_or(lhs);
            if augmented {
                defs.extend(env.get(lhs.trim()));
            }
            for target in lhs.split('=') {
                let subscript = target.contains('[') || target.contains('.');
                self.assign_targets(target, &defs, env, !augmented && !subscript);
            }
            return;
        }
        self.expr(s.span, env);
    }

    fn block(&mut self, stmts: &'a [Stmt], env: &mut Env) {
        for s in stmts {
            self.stmt(s, env);
        }
    }

    fn stmt(&mut self, s: &'a Stmt, env: &mut Env) {
        let t = || Some(super::TRUE_LABEL.to_string());
        let f = || Some(super::FALSE_LABEL.to_string());
        match &s.kind {
            StmtKind::Simple => self.simple(s, env),
            StmtKind::Def { .. } => {}
            StmtKind::Main { body } => self.block(body, env),
            StmtKind::If { arms, else_body } => {
                let before = env.clone_env();
                let mut outs = Vec::new();
                let mut merged = Env { defs: BTreeMap::new() };
                let mut last_pred: Option<NodeId> = None;
                for (cond, body) in arms {
                    if let Some(p) = last_pred.take() {
                        self.b.pending = vec![(p, f())];
                    }
                    let mut benv = before.clone_env();
                    self.expr(*cond, &mut benv);
                    let p = self.add_predicate(*cond, PredKind::Branch);
                    self.b.pending = vec![(p.clone(), t())];
                    self.block(body, &mut benv);
                    outs.append(&mut self.b.pending);
                    merged.merge(&benv);
                    last_pred = Some(p);
                }
                let p = last_pred.expect("if has an arm");
                match else_body {
                    Some(body) => {
                        self.b.pending = vec![(p, f())];
                        let mut benv = before.clone_env();
                        self.block(body, &mut benv);
                        outs.append(&mut self.b.pending);
                        merged.merge(&benv);
                    }
                    None => {
                        outs.push((p, f()));
                        merged.merge(&before);
                    }
                }
                self.b.pending = outs;
                *env = merged;
            }
            StmtKind::For { target, iter, header, body, else_body } => {
                let defs = self.expr(*iter, env);
                self.assign_targets(target, &defs, env, true);
                self.looped(*header, body, else_body.as_deref(), env);
            }
            StmtKind::While { cond, body, else_body } => {
                self.expr(*cond, env);
                self.looped(*cond, body, else_body.as_deref(), env);
            }
            StmtKind::Try { body, handlers, else_body, finally_body } => {
                self.block(body, env);
                if let Some(e) = else_body {
                    self.block(e, env);
                }
                let mut outs = Vec::new();
                let before = env.clone_env();
                for (h, hbody) in handlers {
                    let p = self.add_predicate(*h, PredKind::Branch);
                    self.b.pending = vec![(p.clone(), t())];
                    let mut henv = before.clone_env();
                    self.block(hbody, &mut henv);
                    outs.append(&mut self.b.pending);
                    env.merge(&henv);
                    self.b.pending = vec![(p, f())];
                }
                self.b.pending.extend(outs);
                if let Some(fb) = finally_body {
                    self.block(fb, env);
                }
            }
            StmtKind::With { items, body } => {
                for item in split_top(self.src, self.strings, items.0, items.1, b',') {
                    let text = self.text(item);
                    match text.find(" as ") {
                        Some(p) => {
                            let defs = self.expr((item.0, item.0 + p), env);
                            let target = text[p + 4..].to_string();
                            self.assign_targets(&target, &defs, env, true);
                        }
                        None => {
                            self.expr(item, env);
                        }
                    }
                }
                self.block(body, env);
            }
        }
    }

    fn looped(&mut self, header: Span, body: &'a [Stmt], else_body: Option<&'a [Stmt]>, env: &mut Env) {
        let p = self.add_predicate(header, PredKind::Loop);
        self.b.pending = vec![(p.clone(), Some(super::TRUE_LABEL.to_string()))];
        let mut benv = env.clone_env();
        self.block(body, &mut benv);
        self.b.connect_to(&p);
        env.merge(&benv);
        self.b.pending = vec![(p, Some(super::FALSE_LABEL.to_string()))];
        if let Some(e) = else_body {
            self.block(e, env);
        }
    }
}

fn module_consts(src: &str, strings: &[Span], stmts: &[Stmt]) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for s in stmts {
        if s.kind != StmtKind::Simple {
            continue;
        }
        let Some(eq) = find_top(src, strings, s.span.0, s.span.1, b'=') else { continue };
        let name = src[s.span.0..eq].trim();
        if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') || name.is_empty() {
            continue;
        }
        let rhs = trim_span(src, eq + 1, s.span.1);
        if strings.contains(&rhs) {
            out.insert(name.to_string(), unquote_literal(&src[rhs.0..rhs.1]));
        }
    }
    out
}

fn collect_functions<'a>(stmts: &'a [Stmt], out: &mut BTreeMap<String, &'a Stmt>, order: &mut Vec<String>) {
    for s in stmts {
        match &s.kind {
            StmtKind::Def { name, .. } => {
                if !out.contains_key(name) {
                    order.push(name.clone());
                }
                out.insert(name.clone(), s);
            }
            StmtKind::Main { body } => collect_functions(body, out, order),
            _ => {}
        }
    }
}

pub fn build(owning_skill: &str, script: &ScriptArtifact, opts: BuildOptions) -> UnifiedGraph {
    let module = match parse(&script.source) {
        Ok(m) => m,
        Err(e) => return super::opaque_graph(owning_skill, script, &e.to_string()),
    };
    let artifact = Artifact::Script(script.relative_path.clone());
    let mut functions = BTreeMap::new();
    let mut order = Vec::new();
    collect_functions(&module.stmts, &mut functions, &mut order);
    let mut ctx = Ctx {
        b: Builder::new(owning_skill, artifact.clone()),
        src: &script.source,
        strings: &module.strings,
        artifact,
        consts: module_consts(&script.source, &module.strings, &module.stmts),
        functions,
        splice_count: BTreeMap::new(),
        stack: Vec::new(),
        frames: vec![Frame { returns: Vec::new(), ret_defs: BTreeSet::new() }],
        context: String::new(),
        current_fn: None,
        opts,
        write_handles: BTreeMap::new(),
    };
    let mut env = Env { defs: BTreeMap::new() };
    ctx.block(&module.stmts, &mut env);
    let top = ctx.frames.pop().expect("module frame");
    ctx.b.pending.extend(top.returns);
    let exit = ctx.b.g.exit().to_string();
    ctx.b.connect_to(&exit);
    // functions never called from the main flow are still screened, detached
    for name in order {
        if ctx.splice_count.contains_key(&name) {
            continue;
        }
        ctx.b.pending.clear();
        let params = match &ctx.functions[&name].kind {
            StmtKind::Def { params, .. } => params.len(),
            _ => 0,
        };
        let empty = Env { defs: BTreeMap::new() };
        ctx.frames.push(Frame { returns: Vec::new(), ret_defs: BTreeSet::new() });
        ctx.splice(&name, vec![BTreeSet::new(); params], &empty);
        ctx.frames.pop();
        ctx.b.pending.clear();
    }
    ctx.b.finish()
}

/// Innermost `def` enclosing `pos`: (name, body span).
pub fn enclosing_function(module: &Module, pos: usize) -> Option<(String, Span)> {
    let mut found = None;
    walk(&module.stmts, &mut |s, _| {
        if let StmtKind::Def { name, body, .. } = &s.kind {
            if let (Some(first), Some(last)) = (body.first(), body.last()) {
                if first.span.0 <= pos && pos < last.span.1 {
                    found = Some((name.clone(), (first.span.0, last.span.1)));
                }
            }
        }
    });
    found
}

/// Innermost simple statement containing `[s, e)`.
pub fn enclosing_simple(module: &Module, s: usize, e: usize) -> Option<&Stmt> {
    let mut found = None;
    walk(&module.stmts, &mut |st, _| {
        if st.kind == StmtKind::Simple && st.span.0 <= s && e <= st.span.1 {
            found = Some(st);
        }
    });
    found
}

/// Simple statements whose text calls `name(`.
pub fn call_sites(module: &Module, src: &str, name: &str) -> Vec<Span> {
    let mut out = Vec::new();
    walk(&module.stmts, &mut |st, _| {
        if st.kind == StmtKind::Simple
            && calls_in(src, &module.strings, st.span.0, st.span.1).iter().any(|c| c.name == name)
        {
            out.push(st.span);
        }
    });
    out
}

/// Names assigned by a simple statement.
pub fn assigned_names(module: &Module, src: &str, stmt: Span) -> Vec<String> {
    match find_top(src, &module.strings, stmt.0, stmt.1, b'=') {
        Some(eq) => src[stmt.0..eq]
            .split([',', '=', '(', ')', ':', '+', '-', '*', '/'])
            .map(|t| root_ident(t.trim()).to_string())
            .filter(|t| !t.is_empty() && t.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
            .collect(),
        None => Vec::new(),
    }
}

/// Whether identifier `name` appears (outside strings) after byte `pos`.
pub fn used_after(module: &Module, src: &str, name: &str, pos: usize) -> bool {
    let b = src.as_bytes();
    let mut from = pos;
    while let Some(p) = src[from..].find(name) {
        let at = from + p;
        let end = at + name.len();
        let left = at == 0 || !(is_ident_byte(b[at - 1]) || b[at - 1] == b'.');
        let right = end >= b.len() || !is_ident_byte(b[end]);
        if left && right && in_string(&module.strings, at).is_none() {
            return true;
        }
        from = end;
    }
    false
}
