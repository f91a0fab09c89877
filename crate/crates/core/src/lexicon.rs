//! Shared vocabulary: operation verbs, object and destination normalization,
//! stopwords and stemming. Every component that turns text into slots goes
//! through these tables so that instruction parsing, prompt descriptors,
//! predicate evaluation and guard matching agree with each other.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Normalized operation verb.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Op {
    Read,
    Write,
    Send,
    Receive,
    Exec,
    Delete,
    Collect,
    Generate,
    Transform,
    /// Verb outside the controlled vocabulary, kept verbatim.
    Other(String),
}

impl Op {
    pub fn as_str(&self) -> &str {
        match self {
            Op::Read => "read",
            Op::Write => "write",
            Op::Send => "send",
            Op::Receive => "receive",
            Op::Exec => "exec",
            Op::Delete => "delete",
            Op::Collect => "collect",
            Op::Generate => "generate",
            Op::Transform => "transform",
            Op::Other(raw) => raw,
        }
    }

    pub fn parse(s: &str) -> Op {
        match s {
            "read" => Op::Read,
            "write" => Op::Write,
            "send" => Op::Send,
            "receive" => Op::Receive,
            "exec" => Op::Exec,
            "delete" => Op::Delete,
            "collect" => Op::Collect,
            "generate" => Op::Generate,
            "transform" => Op::Transform,
            other => Op::Other(other.strip_prefix("other:").unwrap_or(other).to_string()),
        }
    }

    /// Operations whose effect is visible outside the agent's own output.
    pub fn is_side_effect(&self) -> bool {
        matches!(self, Op::Send | Op::Exec | Op::Delete)
    }

    /// Operations that yield a value consumed by later steps.
    pub fn produces_data(&self) -> bool {
        matches!(
            self,
            Op::Read | Op::Collect | Op::Receive | Op::Generate | Op::Transform | Op::Exec
        )
    }

    /// Base-form verb used when rendering text.
    pub fn verb(&self) -> &str {
        match self {
            Op::Exec => "run",
            other => other.as_str(),
        }
    }

    /// Noun used in task intents ("local report generation").
    pub fn noun(&self) -> &str {
        match self {
            Op::Read => "access",
            Op::Write => "storage",
            Op::Send => "synchronization",
            Op::Receive => "retrieval",
            Op::Exec => "execution",
            Op::Delete => "deletion",
            Op::Collect => "collection",
            Op::Generate => "generation",
            Op::Transform => "analysis",
            Op::Other(raw) => raw,
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Other(raw) => write!(f, "other:{raw}"),
            op => f.write_str(op.as_str()),
        }
    }
}

impl Serialize for Op {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Op {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Op::parse(&s))
    }
}

/// Maps a surface verb to the controlled vocabulary.
pub fn op_for_verb(word: &str) -> Option<Op> {
    let w = word.to_ascii_lowercase();
    let op = match w.as_str() {
        "read" | "load" | "open" | "view" | "check" | "look" | "inspect" | "list" => Op::Read,
        "write" | "save" | "store" | "export" | "persist" | "record" | "append" | "update" => {
            Op::Write
        }
        "send" | "sync" | "synchronize" | "upload" | "post" | "share" | "email" | "transmit"
        | "forward" | "push" | "notify" | "publish" | "submit" => Op::Send,
        "receive" | "fetch" | "download" | "pull" | "retrieve" => Op::Receive,
        "run" | "execute" | "invoke" | "launch" => Op::Exec,
        "delete" | "remove" | "erase" | "purge" | "wipe" | "clean" | "clear" => Op::Delete,
        "collect" | "gather" | "harvest" | "scan" | "enumerate" | "capture" => Op::Collect,
        "generate" | "create" | "build" | "produce" | "render" | "make" | "compose"
        | "summarize" | "summarise" | "show" | "visualize" | "draw" | "plot" | "draft"
        | "prepare" | "display" => Op::Generate,
        "analyze" | "analyse" | "transform" | "convert" | "compute" | "calculate"
        | "aggregate" | "filter" | "process" | "compare" | "review" | "parse" | "count"
        | "sort" | "evaluate" | "extract" | "identify" | "detect" | "assess" | "track" => {
            Op::Transform
        }
        _ => return None,
    };
    Some(op)
}

/// Function-word list removed before slot extraction and token matching.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "the", "my", "your", "our", "their", "its", "this", "that", "these", "those",
    "all", "any", "some", "each", "every", "it", "them", "is", "are", "was", "be", "been", "to",
    "from", "for", "in", "on", "into", "with", "by", "via", "at", "of", "as", "using", "then",
    "and", "or", "but", "so", "when", "if", "unless", "while", "please", "user", "users", "asks",
    "ask", "asked", "wants", "want", "requests", "request", "requested", "needs", "need",
    "explicitly", "also", "only", "just", "me", "i", "you", "we", "do", "does", "can", "should",
    "must", "will", "would", "could", "may", "enabled", "set", "provided", "available", "true",
    "there", "here", "not", "no", "up", "out", "about", "over",
];

/// Modifiers dropped from object noun phrases.
const MODIFIERS: &[&str] = &[
    "recent", "local", "latest", "current", "configured", "new", "existing", "collected",
    "generated", "relevant", "following", "given", "full", "final", "whole", "entire", "last",
    "past", "daily", "short", "simple", "basic", "detailed",
];

/// Words that end an object noun phrase.
const BOUNDARY: &[&str] = &[
    "to", "from", "for", "in", "on", "into", "with", "by", "via", "at", "of", "as", "using",
    "then", "and", "or", "but", "so", "when", "if", "unless", "while", "before", "after",
    "including", "plus", "than", "under", "within", "across", "through", "instead", "otherwise",
];

const PRONOUNS: &[&str] = &["it", "them", "this", "that"];

pub fn is_stopword(w: &str) -> bool {
    STOPWORDS.contains(&w)
}

fn is_modifier(w: &str) -> bool {
    MODIFIERS.contains(&w) || (w.ends_with("ly") && w.len() > 4)
}

pub fn is_boundary(w: &str) -> bool {
    BOUNDARY.contains(&w)
}

pub fn is_pronoun(w: &str) -> bool {
    PRONOUNS.contains(&w)
}

fn stemmer() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English))
}

pub fn stem(word: &str) -> String {
    stemmer().stem(&word.to_ascii_lowercase()).into_owned()
}

/// Normalizes one word for set comparison: verbs collapse onto their
/// operation, everything else is stemmed.
pub fn norm_token(word: &str) -> String {
    let lower = word.to_ascii_lowercase();
    if let Some(op) = op_for_verb(&lower) {
        return op.as_str().to_string();
    }
    stem(&lower)
}

/// One word of input text with its byte range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub text: String,
    pub lower: String,
    pub start: usize,
    pub end: usize,
}

fn word_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"https?://[^\s)>\]`'",]+|~?[./]?[A-Za-z0-9_][A-Za-z0-9_\-./~]*"#).unwrap()
    })
}

/// Splits text into words, trimming trailing sentence punctuation.
pub fn words(text: &str) -> Vec<Word> {
    word_re()
        .find_iter(text)
        .filter_map(|m| {
            let mut s = m.as_str();
            while s.len() > 1 && (s.ends_with('.') || s.ends_with('-') || s.ends_with('/')) {
                s = &s[..s.len() - 1];
            }
            if s.is_empty() || s == "." {
                return None;
            }
            Some(Word {
                text: s.to_string(),
                lower: s.to_ascii_lowercase(),
                start: m.start(),
                end: m.start() + s.len(),
            })
        })
        .collect()
}

/// Splits a compound word such as `deep-work` or `host_identifiers`.
pub fn split_compound(word: &str) -> Vec<String> {
    word.split(|c: char| c == '-' || c == '_' || c == '.' || c == '/')
        .filter(|s| !s.is_empty())
        .map(|s| s.to_ascii_lowercase())
        .collect()
}

/// Normalized content tokens of a text (stopwords removed).
pub fn content_tokens(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for w in words(text) {
        if w.lower.starts_with("http") {
            if let Some(host) = url_host(&w.text) {
                out.insert(host);
            }
            continue;
        }
        for part in split_compound(&w.lower) {
            if is_stopword(&part) || part.len() < 2 {
                continue;
            }
            out.insert(norm_token(&part));
        }
    }
    out
}

fn token_synonym(w: &str) -> &str {
    match w {
        "environment" => "env",
        "credentials" => "credential",
        "identifier" => "identifiers",
        "hostname" => "host",
        _ => w,
    }
}

fn object_synonym(head: &str) -> &str {
    match head {
        "heatmap" | "graph" | "chart" | "visualization" | "visualisation" | "summary"
        | "digest" | "overview" => "report",
        "repo" => "repository",
        _ => head,
    }
}

/// Object slot for a noun phrase: the last two content words joined by `_`.
pub fn object_from_words(phrase: &[String]) -> Option<String> {
    let content: Vec<&str> = phrase
        .iter()
        .map(|w| w.as_str())
        .filter(|w| !is_stopword(w) && !is_modifier(w))
        .collect();
    if content.is_empty() {
        return None;
    }
    let tail = &content[content.len().saturating_sub(2)..];
    let joined = tail
        .iter()
        .flat_map(|w| split_compound(w))
        .map(|w| token_synonym(&w).to_string())
        .collect::<Vec<_>>();
    let joined = joined[joined.len().saturating_sub(2)..].join("_");
    Some(joined)
}

/// Canonical object used for equality between slots extracted from different
/// texts: the head noun, mapped through object synonyms and stemmed.
pub fn canonical_object(obj: &str) -> String {
    let lower = obj.to_ascii_lowercase();
    let head = lower
        .rsplit(|c: char| c == '_' || c == '-' || c == ' ' || c == '/' || c == '.')
        .find(|s| !s.is_empty())
        .unwrap_or(&lower);
    stem(object_synonym(head))
}

/// Known messaging or storage channels, normalized to display form.
pub fn channel(word: &str) -> Option<&'static str> {
    let w = word.to_ascii_lowercase();
    let c = match w.as_str() {
        "telegram" => "Telegram",
        "slack" => "Slack",
        "discord" => "Discord",
        "email" | "e-mail" | "mail" => "email",
        "webhook" => "webhook",
        "s3" => "S3",
        "dropbox" => "Dropbox",
        "gdrive" => "Google Drive",
        "github" => "GitHub",
        "teams" => "Teams",
        "pastebin" => "pastebin",
        _ => return None,
    };
    Some(c)
}

pub fn url_host(url: &str) -> Option<String> {
    let rest = url
        .strip_prefix("https://")
        .or_else(|| url.strip_prefix("http://"))?;
    let host = rest.split(['/', '?', '#', ':']).next()?;
    (!host.is_empty()).then(|| host.to_ascii_lowercase())
}

pub fn is_url(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://")
}

/// Hosts treated as part of the sandbox's mock network.
pub fn is_mock_host(host: &str) -> bool {
    host == "mock.local" || host.ends_with(".mock.local") || host == "localhost"
}

/// Finds a destination in a clause: a known channel, then a URL host, then
/// an `<x> endpoint|server|recipient` phrase, then a capitalized word after `to`.
pub fn destination_in(text: &str) -> Option<String> {
    let ws = words(text);
    if let Some(c) = ws.iter().find_map(|w| channel(&w.lower)) {
        return Some(c.to_string());
    }
    if let Some(h) = ws.iter().find(|w| is_url(&w.text)).and_then(|w| url_host(&w.text)) {
        return Some(h);
    }
    for (i, w) in ws.iter().enumerate() {
        if matches!(w.lower.as_str(), "endpoint" | "server" | "webhook" | "api") && i > 0 {
            let prev = &ws[i - 1].lower;
            if !is_stopword(prev) && !is_modifier(prev) && !is_boundary(prev) {
                return Some(format!("{prev}_{}", w.lower));
            }
            return Some(w.lower.clone());
        }
    }
    for pair in ws.windows(2) {
        if pair[0].lower == "to"
            && pair[1].text.chars().next().is_some_and(|c| c.is_ascii_uppercase())
        {
            return Some(pair[1].text.clone());
        }
    }
    None
}

pub fn same_destination(a: &str, b: &str) -> bool {
    a.eq_ignore_ascii_case(b)
}

/// Tokens that mark an object or text as secret-bearing.
pub fn is_secret_like(text: &str) -> bool {
    let lower = text.to_ascii_lowercase();
    if lower.contains(".ssh") || lower.contains(".env") || lower.contains("id_rsa") {
        return true;
    }
    words(&lower).iter().flat_map(|w| split_compound(&w.lower)).any(|t| {
        matches!(
            t.as_str(),
            "key" | "keys" | "secret" | "secrets" | "credential" | "credentials" | "env"
                | "environment" | "history" | "ssh" | "token" | "tokens" | "password"
                | "passwords" | "cookie" | "cookies" | "passwd" | "keychain" | "wallet"
        )
    })
}

/// Whether a path-like object lies outside the skill's own workspace.
pub fn is_outside_workspace(obj: &str) -> bool {
    let t = obj.trim_matches(|c| c == '"' || c == '\'');
    t.starts_with('/')
        || t.starts_with('~')
        || t.contains("..")
        || t.contains("$HOME")
        || t.contains(".bashrc")
        || t.contains(".profile")
        || t.contains("crontab")
}

/// Resource classes used to pick task fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResourceClass {
    Repo,
    File,
    Document,
    Image,
    ConfigApi,
    Unsupported,
}

pub fn resource_class(word: &str) -> Option<ResourceClass> {
    let w = word.to_ascii_lowercase();
    let class = match w.as_str() {
        "repo" | "repository" | "repositories" | "commit" | "commits" | "branch" | "branches"
        | "diff" | "diffs" | "git" => ResourceClass::Repo,
        "csv" | "json" | "txt" | "log" | "logs" | "file" | "files" | "records" | "dataset"
        | "table" | "spreadsheet" => ResourceClass::File,
        "document" | "documents" | "markdown" | "docx" | "pdf" | "doc" | "docs" | "notes" => {
            ResourceClass::Document
        }
        "image" | "images" | "png" | "jpg" | "jpeg" | "photo" | "picture" | "screenshot" => {
            ResourceClass::Image
        }
        "config" | "configuration" | "endpoint" | "api" | "settings" | "yaml" | "toml" => {
            ResourceClass::ConfigApi
        }
        "database" | "sql" | "postgres" | "mysql" | "bucket" | "aws" | "gcp" | "azure"
        | "kubernetes" | "cluster" => ResourceClass::Unsupported,
        _ => {
            if let Some(ext) = w.rsplit('.').next().filter(|_| w.contains('.')) {
                return match ext {
                    "csv" | "json" | "txt" | "log" | "jsonl" => Some(ResourceClass::File),
                    "md" | "docx" | "pdf" => Some(ResourceClass::Document),
                    "png" | "jpg" | "jpeg" | "gif" => Some(ResourceClass::Image),
                    "yaml" | "yml" | "toml" | "ini" | "cfg" => Some(ResourceClass::ConfigApi),
                    _ => None,
                };
            }
            return None;
        }
    };
    Some(class)
}

/// Identifiers that carry no task meaning inside code conditions.
const CODE_NOISE: &[&str] = &[
    "args", "arg", "argv", "cfg", "conf", "config", "os", "sys", "environ", "env", "get", "self",
    "len", "none", "is", "options", "opts", "settings", "params", "flags", "main", "name",
];

/// Content words of a predicate expression in their written form, used both
/// to mention a branch in a prompt and to evaluate it against one.
pub fn predicate_words(phi: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for w in words(phi) {
        if w.lower.starts_with("http") {
            continue;
        }
        for part in split_compound(&w.lower) {
            if part.len() < 2
                || is_stopword(&part)
                || CODE_NOISE.contains(&part.as_str())
                || part.chars().all(|c| c.is_ascii_digit())
                || part == "__main__"
            {
                continue;
            }
            if !out.contains(&part) {
                out.push(part);
            }
        }
    }
    out
}

/// Capitalizes the first character.
pub fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

/// Token-set Jaccard similarity; two empty texts are identical.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let ta: BTreeSet<String> = words(a).into_iter().map(|w| w.lower).collect();
    let tb: BTreeSet<String> = words(b).into_iter().map(|w| w.lower).collect();
    if ta.is_empty() && tb.is_empty() {
        return 1.0;
    }
    let inter = ta.intersection(&tb).count() as f64;
    let union = ta.union(&tb).count() as f64;
    inter / union
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verb_synonyms_collapse_to_send() {
        for v in ["send", "sync", "upload", "Post"] {
            assert_eq!(op_for_verb(v), Some(Op::Send), "{v}");
        }
        assert_eq!(op_for_verb("summarize"), Some(Op::Generate));
        assert_eq!(op_for_verb("banana"), None);
    }

    #[test]
    fn op_display_roundtrip() {
        for op in [Op::Read, Op::Send, Op::Other("frobnicate".into())] {
            assert_eq!(Op::parse(&op.to_string()), op);
        }
    }

    #[test]
    fn objects_normalize() {
        let ws = |s: &str| s.split(' ').map(String::from).collect::<Vec<_>>();
        assert_eq!(object_from_words(&ws("local environment files")).unwrap(), "env_files");
        assert_eq!(object_from_words(&ws("the report")).unwrap(), "report");
        assert_eq!(object_from_words(&ws("recent commits")).unwrap(), "commits");
        assert_eq!(canonical_object("heatmap"), canonical_object("report"));
        assert_eq!(canonical_object("heatmap_report"), "report");
    }

    #[test]
    fn destinations() {
        assert_eq!(destination_in("send it to Alex on Telegram").as_deref(), Some("Telegram"));
        assert_eq!(
            destination_in("post to https://hooks.example.com/x").as_deref(),
            Some("hooks.example.com")
        );
        assert_eq!(
            destination_in("sync the report to the incident endpoint").as_deref(),
            Some("incident_endpoint")
        );
        assert_eq!(destination_in("generate a local report"), None);
    }

    #[test]
    fn words_trim_sentence_period() {
        let w = words("Send it to Telegram.");
        assert_eq!(w.last().unwrap().text, "Telegram");
        assert_eq!(w.last().unwrap().end, 19);
    }

    #[test]
    fn jaccard_bounds() {
        assert_eq!(jaccard("", ""), 1.0);
        assert_eq!(jaccard("a b", "a b"), 1.0);
        assert!(jaccard("a b c d", "a b c") < 0.9);
    }
}
