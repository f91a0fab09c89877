//! Skill bundle model: loading, profiling and materializing bundles on disk.
//!
//! Layout:
//!
//! ```text
//! <root>/SKILL.md      frontmatter (`---` delimited) + markdown instructions
//! <root>/skill.json    optional metadata sidecar, wins over frontmatter
//! <root>/scripts/*     bundled scripts
//! <root>/...           anything else is kept as an opaque resource
//! ```
//!
//! Files are kept byte-for-byte so that `write_bundle(load_bundle(p))`
//! reproduces the original tree.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

use crate::provenance::{Artifact, Provenance};

pub const INSTRUCTION_FILE: &str = "SKILL.md";
pub const SIDECAR_FILE: &str = "skill.json";
pub const SCRIPTS_DIR: &str = "scripts";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("bundle has no metadata name")]
    MissingMetadata,
    #[error("malformed frontmatter at line {line}: {reason}")]
    MalformedFrontmatter { line: usize, reason: String },
    #[error("malformed sidecar metadata: {0}")]
    MalformedSidecar(String),
    #[error("script path escapes the bundle root: {0}")]
    PathEscape(String),
    #[error("not a bundle directory: {0}")]
    NotADirectory(PathBuf),
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::IoFailure {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum Quote {
    None,
    Single,
    Double,
}

/// Declared skill metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillMetadata {
    pub name: String,
    pub description: String,
    pub use_when: Option<String>,
    /// Unknown keys, preserved verbatim.
    pub extra: BTreeMap<String, String>,
    #[serde(skip)]
    layout: Vec<(String, Quote)>,
}

impl SkillMetadata {
    pub fn new(name: impl Into<String>, description: impl Into<String>) -> Self {
        SkillMetadata {
            name: name.into(),
            description: description.into(),
            use_when: None,
            extra: BTreeMap::new(),
            layout: Vec::new(),
        }
    }

    fn get(&self, key: &str) -> Option<&str> {
        match key {
            "name" => Some(&self.name),
            "description" => Some(&self.description),
            "use_when" => self.use_when.as_deref(),
            other => self.extra.get(other).map(String::as_str),
        }
    }

    /// Parses `key: value` frontmatter lines.
    pub fn parse_frontmatter(text: &str) -> Result<Self, BundleError> {
        let mut meta = SkillMetadata::new("", "");
        let mut last_key: Option<String> = None;
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if line.starts_with(' ') || line.starts_with('\t') {
                // folded continuation of the previous value
                let key = last_key.clone().ok_or(BundleError::MalformedFrontmatter {
                    line: i + 1,
                    reason: "continuation without a key".into(),
                })?;
                let prev = meta.get(&key).unwrap_or("").to_string();
                let joined = if prev.is_empty() || prev == "|" || prev == ">" {
                    trimmed.to_string()
                } else {
                    format!("{prev} {trimmed}")
                };
                meta.set(&key, joined, Quote::None);
                continue;
            }
            let (key, value) = line.split_once(':').ok_or(BundleError::MalformedFrontmatter {
                line: i + 1,
                reason: "expected `key: value`".into(),
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(' ') {
                return Err(BundleError::MalformedFrontmatter {
                    line: i + 1,
                    reason: format!("invalid key `{key}`"),
                });
            }
            let raw = value.trim();
            let (value, quote) = unquote(raw).ok_or(BundleError::MalformedFrontmatter {
                line: i + 1,
                reason: "unterminated quoted value".into(),
            })?;
            meta.set(key, value, quote);
            last_key = Some(key.to_string());
        }
        Ok(meta)
    }

    fn set(&mut self, key: &str, value: String, quote: Quote) {
        match key {
            "name" => self.name = value,
            "description" => self.description = value,
            "use_when" => self.use_when = Some(value),
            other => {
                self.extra.insert(other.to_string(), value);
            }
        }
        match self.layout.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = quote,
            None => self.layout.push((key.to_string(), quote)),
        }
    }

    /// Serializes back to frontmatter lines (without the `---` fences),
    /// keeping the original key order and quoting.
    pub fn to_frontmatter(&self) -> String {
        let mut keys: Vec<(String, Quote)> = self.layout.clone();
        for k in ["name", "description", "use_when"]
            .into_iter()
            .map(String::from)
            .chain(self.extra.keys().cloned())
        {
            if self.get(&k).is_some() && !keys.iter().any(|(x, _)| *x == k) {
                keys.push((k, Quote::None));
            }
        }
        let mut out = String::new();
        for (k, q) in keys {
            let Some(v) = self.get(&k) else { continue };
            let v = match q {
                Quote::None => v.to_string(),
                Quote::Single => format!("'{v}'"),
                Quote::Double => format!("\"{v}\""),
            };
            out.push_str(&format!("{k}: {v}\n"));
        }
        out
    }

    fn from_sidecar(text: &str) -> Result<Self, BundleError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| BundleError::MalformedSidecar(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| BundleError::MalformedSidecar("expected a JSON object".into()))?;
        let mut meta = SkillMetadata::new("", "");
        for (k, v) in obj {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            meta.set(k, s, Quote::None);
        }
        Ok(meta)
    }
}

fn unquote(raw: &str) -> Option<(String, Quote)> {
    for (q, style) in [('"', Quote::Double), ('\'', Quote::Single)] {
        if raw.starts_with(q) {
            if raw.len() >= 2 && raw.ends_with(q) {
                return Some((raw[1..raw.len() - 1].to_string(), style));
            }
            return None;
        }
    }
    Some((raw.to_string(), Quote::None))
}

/// A markdown section of the instruction body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub heading_range: Option<(usize, usize)>,
    pub body_range: (usize, usize),
}

/// The instruction layer (`SKILL.md`). Offsets are into `raw_text`, which
/// holds the whole file including frontmatter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionDoc {
    pub raw_text: String,
    pub body_start: usize,
    pub sections: Vec<Section>,
}

fn heading_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(#{1,6})[ \t]+(.*?)[ \t#]*$").unwrap())
}

impl InstructionDoc {
    /// Parses a full `SKILL.md`; returns the doc and its frontmatter text.
    pub fn parse(raw: &str) -> Result<(Self, Option<String>), BundleError> {
        let (front, body_start) = split_frontmatter(raw)?;
        let sections = sections_of(raw, body_start);
        Ok((
            InstructionDoc {
                raw_text: raw.to_string(),
                body_start,
                sections,
            },
            front,
        ))
    }

    pub fn empty() -> Self {
        InstructionDoc {
            raw_text: String::new(),
            body_start: 0,
            sections: Vec::new(),
        }
    }

    pub fn body(&self) -> &str {
        &self.raw_text[self.body_start..]
    }

    pub fn headings(&self) -> impl Iterator<Item = &str> {
        self.sections
            .iter()
            .map(|s| s.heading.as_str())
            .filter(|h| !h.is_empty())
    }
}

fn split_frontmatter(raw: &str) -> Result<(Option<String>, usize), BundleError> {
    let first_len = if raw.starts_with("---\n") {
        4
    } else if raw.starts_with("---\r\n") {
        5
    } else {
        return Ok((None, 0));
    };
    let mut offset = first_len;
    for line in raw[first_len..].split_inclusive('\n') {
        let content = line.trim_end_matches(['\n', '\r']);
        if content == "---" {
            let front = raw[first_len..offset].to_string();
            return Ok((Some(front), offset + line.len()));
        }
        offset += line.len();
    }
    Err(BundleError::MalformedFrontmatter {
        line: 1,
        reason: "frontmatter is not closed by `---`".into(),
    })
}

fn sections_of(raw: &str, body_start: usize) -> Vec<Section> {
    let mut sections = Vec::new();
    let mut current = Section {
        heading: String::new(),
        heading_range: None,
        body_range: (body_start, body_start),
    };
    let mut offset = body_start;
    let mut in_fence = false;
    for line in raw[body_start..].split_inclusive('\n') {
        let content = line.trim_end_matches(['\n', '\r']);
        if content.trim_start().starts_with("```") {
            in_fence = !in_fence;
        }
        if !in_fence {
            if let Some(c) = heading_re().captures(content) {
                current.body_range.1 = offset;
                if current.heading_range.is_some() || current.body_range.1 > current.body_range.0 {
                    sections.push(current);
                }
                let end = offset + line.len();
                current = Section {
                    heading: c[2].to_string(),
                    heading_range: Some((offset, offset + content.len())),
                    body_range: (end, end),
                };
                offset = end;
                continue;
            }
        }
        offset += line.len();
    }
    current.body_range.1 = raw.len();
    if current.heading_range.is_some() || current.body_range.1 > current.body_range.0 {
        sections.push(current);
    }
    sections
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageHint {
    Python,
    Shell,
    Other,
}

impl LanguageHint {
    /// Extension first, shebang second.
    pub fn detect(path: &str, source: &str) -> Self {
        let ext = Path::new(path)
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("");
        match ext {
            "py" => return LanguageHint::Python,
            "sh" | "bash" => return LanguageHint::Shell,
            _ => {}
        }
        let first = source.lines().next().unwrap_or("");
        if first.starts_with("#!") {
            if first.contains("python") {
                return LanguageHint::Python;
            }
            if first.contains("sh") {
                return LanguageHint::Shell;
            }
        }
        LanguageHint::Other
    }

    /// Interpreter command used to invoke a script of this language.
    pub fn interpreter(self) -> &'static str {
        match self {
            LanguageHint::Python => "python3",
            LanguageHint::Shell => "bash",
            LanguageHint::Other => "sh",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptArtifact {
    pub relative_path: String,
    pub language_hint: LanguageHint,
    pub source: String,
}

impl ScriptArtifact {
    pub fn new(relative_path: impl Into<String>, source: impl Into<String>) -> Self {
        let relative_path = relative_path.into();
        let source = source.into();
        ScriptArtifact {
            language_hint: LanguageHint::detect(&relative_path, &source),
            relative_path,
            source,
        }
    }
}

/// Opaque auxiliary file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resource {
    pub relative_path: String,
    pub bytes: Vec<u8>,
}

/// A loaded skill package. Immutable once built; edits produce new bundles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillBundle {
    pub root_path: PathBuf,
    pub metadata: SkillMetadata,
    pub instruction_doc: InstructionDoc,
    pub scripts: Vec<ScriptArtifact>,
    pub resources: Vec<Resource>,
    sidecar: Option<Vec<u8>>,
    has_instruction_file: bool,
}

impl SkillBundle {
    /// Builds a bundle from in-memory parts, as if loaded from `root`.
    pub fn from_parts(
        root: impl Into<PathBuf>,
        skill_md: &str,
        scripts: Vec<ScriptArtifact>,
    ) -> Result<Self, BundleError> {
        let (doc, front) = InstructionDoc::parse(skill_md)?;
        let metadata = match front {
            Some(f) => SkillMetadata::parse_frontmatter(&f)?,
            None => SkillMetadata::new("", ""),
        };
        if metadata.name.trim().is_empty() {
            return Err(BundleError::MissingMetadata);
        }
        let mut scripts = scripts;
        scripts.sort_by(|a, b| a.relative_path.cmp(&b.relative_path));
        for s in &scripts {
            check_relative(&s.relative_path)?;
        }
        Ok(SkillBundle {
            root_path: root.into(),
            metadata,
            instruction_doc: doc,
            scripts,
            resources: Vec::new(),
            sidecar: None,
            has_instruction_file: true,
        })
    }

    pub fn script(&self, path: &str) -> Option<&ScriptArtifact> {
        self.scripts.iter().find(|s| s.relative_path == path)
    }

    /// Text of an artifact, for provenance checks and edits.
    pub fn artifact_text(&self, artifact: &Artifact) -> Option<&str> {
        match artifact {
            Artifact::Instruction => Some(&self.instruction_doc.raw_text),
            Artifact::Script(p) => self.script(p).map(|s| s.source.as_str()),
            Artifact::Metadata => None,
        }
    }

    pub fn provenance_holds(&self, prov: &Provenance) -> bool {
        !prov.excerpt.is_empty()
            && self
                .artifact_text(&prov.artifact)
                .is_some_and(|t| prov.matches(t))
    }

    /// Returns a copy with `SKILL.md` replaced; sections are recomputed.
    pub fn with_instruction_text(&self, raw: String) -> Result<Self, BundleError> {
        let (doc, _) = InstructionDoc::parse(&raw)?;
        let mut out = self.clone();
        out.instruction_doc = doc;
        out.has_instruction_file = true;
        Ok(out)
    }

    /// Returns a copy with the script at `path` replaced or added.
    pub fn with_script(&self, path: &str, source: String) -> Result<Self, BundleError> {
        check_relative(path)?;
        let mut out = self.clone();
        match out.scripts.iter_mut().find(|s| s.relative_path == path) {
            Some(s) => s.source = source,
            None => {
                out.scripts.push(ScriptArtifact::new(path, source));
                out.scripts.sort_by(|a, b| a.relative_path.cmp(&b.relative_path));
            }
        }
        Ok(out)
    }

    /// Digest over every byte that influences analysis.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.instruction_doc.raw_text.as_bytes());
        h.update([0]);
        h.update(self.metadata.name.as_bytes());
        h.update([0]);
        h.update(self.metadata.description.as_bytes());
        h.update([0]);
        for s in &self.scripts {
            h.update(s.relative_path.as_bytes());
            h.update([0]);
            h.update(s.source.as_bytes());
            h.update([0]);
        }
        hex::encode(&h.finalize()[..12])
    }
}

fn check_relative(path: &str) -> Result<(), BundleError> {
    let p = Path::new(path);
    let mut depth: i32 = 0;
    for c in p.components() {
        match c {
            Component::Normal(_) => depth += 1,
            Component::CurDir => {}
            Component::ParentDir => {
                depth -= 1;
                if depth < 0 {
                    return Err(BundleError::PathEscape(path.to_string()));
                }
            }
            Component::RootDir | Component::Prefix(_) => {
                return Err(BundleError::PathEscape(path.to_string()))
            }
        }
    }
    Ok(())
}

/// Normalizes `./a/../b` style relative paths without touching the filesystem.
pub fn normalize_relative(path: &str) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for c in path.split('/') {
        match c {
            "" | "." => {}
            ".." => {
                if parts.pop().is_none() {
                    parts.push("..");
                }
            }
            other => parts.push(other),
        }
    }
    parts.join("/")
}

fn script_ref_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:^|[\s`'\x22(])((?:\.{1,2}/)*[\w\-][\w\-./]*\.(?:py|sh|bash))\b").unwrap())
}

/// Script paths mentioned in instruction text, normalized and deduplicated.
pub fn referenced_script_paths(text: &str) -> Vec<String> {
    let mut out: Vec<String> = script_ref_re()
        .captures_iter(text)
        .map(|c| c[1].to_string())
        .collect();
    out.sort();
    out.dedup();
    out
}

fn rel_string(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Loads a bundle directory.
pub fn load_bundle(path: &Path) -> Result<SkillBundle, BundleError> {
    if !path.is_dir() {
        return Err(BundleError::NotADirectory(path.to_path_buf()));
    }
    let root = path.canonicalize().map_err(io_err(path))?;

    let md_path = root.join(INSTRUCTION_FILE);
    let has_instruction_file = md_path.is_file();
    let raw_md = if has_instruction_file {
        fs::read_to_string(&md_path).map_err(io_err(&md_path))?
    } else {
        String::new()
    };
    let (doc, front) = InstructionDoc::parse(&raw_md)?;

    let sidecar_path = root.join(SIDECAR_FILE);
    let sidecar = if sidecar_path.is_file() {
        Some(fs::read(&sidecar_path).map_err(io_err(&sidecar_path))?)
    } else {
        None
    };
    let front_meta = front
        .as_deref()
        .map(SkillMetadata::parse_frontmatter)
        .transpose()?;
    let metadata = match &sidecar {
        Some(bytes) => {
            let text = String::from_utf8_lossy(bytes);
            let mut meta = SkillMetadata::from_sidecar(&text)?;
            // frontmatter fills fields the sidecar leaves out
            if let Some(fm) = &front_meta {
                if meta.name.is_empty() {
                    meta.name = fm.name.clone();
                }
                if meta.description.is_empty() {
                    meta.description = fm.description.clone();
                }
                if meta.use_when.is_none() {
                    meta.use_when = fm.use_when.clone();
                }
            }
            meta
        }
        None => front_meta.unwrap_or_else(|| SkillMetadata::new("", "")),
    };
    if metadata.name.trim().is_empty() {
        return Err(BundleError::MissingMetadata);
    }

    let mut script_paths: Vec<String> = Vec::new();
    let scripts_dir = root.join(SCRIPTS_DIR);
    if scripts_dir.is_dir() {
        for entry in WalkDir::new(&scripts_dir).sort_by_file_name() {
            let entry = entry.map_err(|e| BundleError::IoFailure {
                path: scripts_dir.clone(),
                source: e.into(),
            })?;
            if entry.file_type().is_dir() {
                continue;
            }
            let real = entry.path().canonicalize().map_err(io_err(entry.path()))?;
            if !real.starts_with(&root) {
                return Err(BundleError::PathEscape(rel_string(&root, entry.path())));
            }
            script_paths.push(rel_string(&root, entry.path()));
        }
    }
    for r in referenced_script_paths(doc.body()) {
        let norm = normalize_relative(&r);
        let candidate = root.join(&norm);
        if !candidate.is_file() {
            continue;
        }
        let real = candidate.canonicalize().map_err(io_err(&candidate))?;
        if !real.starts_with(&root) || norm.starts_with("..") {
            return Err(BundleError::PathEscape(r));
        }
        if !script_paths.contains(&norm) {
            script_paths.push(norm);
        }
    }
    script_paths.sort();

    // non-UTF-8 files under scripts/ stay opaque resources
    let mut scripts = Vec::new();
    for rel in &script_paths {
        let p = root.join(rel);
        let bytes = fs::read(&p).map_err(io_err(&p))?;
        if let Ok(source) = String::from_utf8(bytes) {
            scripts.push(ScriptArtifact::new(rel.clone(), source));
        }
    }

    let mut resources = Vec::new();
    for entry in WalkDir::new(&root).sort_by_file_name() {
        let entry = entry.map_err(|e| BundleError::IoFailure {
            path: root.clone(),
            source: e.into(),
        })?;
        if entry.file_type().is_dir() {
            continue;
        }
        let rel = rel_string(&root, entry.path());
        if rel == INSTRUCTION_FILE
            || rel == SIDECAR_FILE
            || scripts.iter().any(|s| s.relative_path == rel)
        {
            continue;
        }
        let bytes = fs::read(entry.path()).map_err(io_err(entry.path()))?;
        resources.push(Resource {
            relative_path: rel,
            bytes,
        });
    }

    Ok(SkillBundle {
        root_path: root,
        metadata,
        instruction_doc: doc,
        scripts,
        resources,
        sidecar,
        has_instruction_file,
    })
}

/// Writes a bundle so that its on-disk layout mirrors the loaded one.
pub fn write_bundle(bundle: &SkillBundle, out: &Path) -> Result<(), BundleError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let write = |rel: &str, bytes: &[u8]| -> Result<(), BundleError> {
        let target = out.join(rel);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&target, bytes).map_err(io_err(&target))
    };
    if bundle.has_instruction_file {
        write(INSTRUCTION_FILE, bundle.instruction_doc.raw_text.as_bytes())?;
    }
    if let Some(sidecar) = &bundle.sidecar {
        write(SIDECAR_FILE, sidecar)?;
    }
    for s in &bundle.scripts {
        write(&s.relative_path, s.source.as_bytes())?;
    }
    for r in &bundle.resources {
        write(&r.relative_path, &r.bytes)?;
    }
    Ok(())
}

/// Declared functionality of a skill, the reference for consistency checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillProfile {
    pub name: String,
    pub description: String,
    pub use_when: Option<String>,
    pub summary: String,
}

impl SkillProfile {
    /// All profile text, lowercased.
    pub fn text(&self) -> String {
        format!(
            "{} {} {} {}",
            self.name,
            self.description,
            self.use_when.as_deref().unwrap_or(""),
            self.summary
        )
        .to_ascii_lowercase()
    }

    pub fn tokens(&self) -> std::collections::BTreeSet<String> {
        crate::lexicon::content_tokens(&self.text())
    }

    /// Short human-readable scope, e.g. "deep work tracker".
    pub fn scope(&self) -> String {
        self.name.replace(['-', '_'], " ")
    }
}

pub const DEFAULT_SUMMARY_BUDGET: usize = 400;

/// Prose of a section body with procedure removed: list items, fenced code
/// and sentences that open with an action verb describe what the skill does
/// step by step, not what it is for.
fn descriptive_prose(body: &str) -> String {
    let mut out: Vec<&str> = Vec::new();
    let mut fenced = false;
    for line in body.lines() {
        let t = line.trim();
        if t.starts_with("```") || t.starts_with("~~~") {
            fenced = !fenced;
            continue;
        }
        let list = t.starts_with(['-', '*', '+'])
            || t.split_once(['.', ')']).is_some_and(|(n, _)| !n.is_empty() && n.chars().all(|c| c.is_ascii_digit()));
        if fenced || list || t.is_empty() {
            continue;
        }
        for sentence in t.split_inclusive(". ") {
            let first = sentence.split_whitespace().next().unwrap_or("");
            if crate::lexicon::op_for_verb(first).is_none() {
                out.extend(sentence.split_whitespace());
            }
        }
    }
    out.join(" ")
}

/// Derives the skill profile; a pure function of the bundle bytes.
pub fn derive_profile(bundle: &SkillBundle, summary_budget: usize) -> SkillProfile {
    let doc = &bundle.instruction_doc;
    let mut summary = String::new();
    for s in &doc.sections {
        let body = descriptive_prose(&doc.raw_text[s.body_range.0..s.body_range.1]);
        if body.is_empty() {
            continue;
        }
        if !summary.is_empty() {
            summary.push(' ');
        }
        summary.push_str(&body);
        if summary.len() >= summary_budget {
            break;
        }
    }
    if summary.len() > summary_budget {
        let mut cut = summary_budget;
        while !summary.is_char_boundary(cut) {
            cut -= 1;
        }
        summary.truncate(cut);
    }
    let meta = &bundle.metadata;
    let description = if meta.description.trim().is_empty() {
        let headings: Vec<&str> = doc.headings().collect();
        if headings.is_empty() {
            meta.name.clone()
        } else {
            format!("{}: {}", meta.name, headings.join("; "))
        }
    } else {
        meta.description.clone()
    };
    SkillProfile {
        name: meta.name.clone(),
        description,
        use_when: meta.use_when.clone(),
        summary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frontmatter_roundtrip() {
        let fm = "name: repo-assistant\ndescription: \"Analyze repositories\"\nuse_when: 'reviewing code'\nowner: team-x\n";
        let meta = SkillMetadata::parse_frontmatter(fm).unwrap();
        assert_eq!(meta.name, "repo-assistant");
        assert_eq!(meta.description, "Analyze repositories");
        assert_eq!(meta.use_when.as_deref(), Some("reviewing code"));
        assert_eq!(meta.extra.get("owner").map(String::as_str), Some("team-x"));
        assert_eq!(meta.to_frontmatter(), fm);
    }

    #[test]
    fn malformed_frontmatter() {
        assert!(matches!(
            SkillMetadata::parse_frontmatter("name repo\n"),
            Err(BundleError::MalformedFrontmatter { line: 1, .. })
        ));
        assert!(matches!(
            InstructionDoc::parse("---\nname: x\nno closing fence\n"),
            Err(BundleError::MalformedFrontmatter { .. })
        ));
        assert!(matches!(
            SkillMetadata::parse_frontmatter("name: \"open\n"),
            Err(BundleError::MalformedFrontmatter { .. })
        ));
    }

    #[test]
    fn sections_are_ordered_and_in_bounds() {
        let raw = "---\nname: x\n---\nIntro line.\n# Steps\n1. Do a.\n## More\ntext\n";
        let (doc, _) = InstructionDoc::parse(raw).unwrap();
        assert_eq!(doc.body(), "Intro line.\n# Steps\n1. Do a.\n## More\ntext\n");
        let headings: Vec<_> = doc.sections.iter().map(|s| s.heading.as_str()).collect();
        assert_eq!(headings, vec!["", "Steps", "More"]);
        let mut last = doc.body_start;
        for s in &doc.sections {
            if let Some((a, b)) = s.heading_range {
                assert!(a >= last && b <= raw.len());
            }
            assert!(s.body_range.0 >= last && s.body_range.1 <= raw.len());
            last = s.body_range.1;
        }
        assert_eq!(&raw[doc.sections[1].body_range.0..doc.sections[1].body_range.1], "1. Do a.\n");
    }

    #[test]
    fn headings_inside_fences_are_ignored() {
        let raw = "```\n# not a heading\n```\n# Real\n";
        let (doc, _) = InstructionDoc::parse(raw).unwrap();
        let headings: Vec<_> = doc.headings().collect();
        assert_eq!(headings, vec!["Real"]);
    }

    #[test]
    fn language_detection() {
        assert_eq!(LanguageHint::detect("a.py", ""), LanguageHint::Python);
        assert_eq!(LanguageHint::detect("run", "#!/bin/bash\n"), LanguageHint::Shell);
        assert_eq!(LanguageHint::detect("run", "#!/usr/bin/env python3\n"), LanguageHint::Python);
        assert_eq!(LanguageHint::detect("x.rb", "puts 1"), LanguageHint::Other);
    }

    #[test]
    fn script_references() {
        let refs = referenced_script_paths("Run `python3 scripts/monitor.py` then `bash ./tools/x.sh`.");
        assert_eq!(refs, vec!["./tools/x.sh", "scripts/monitor.py"]);
        assert_eq!(normalize_relative("./tools/../scripts/x.py"), "scripts/x.py");
        assert!(check_relative("../x.py").is_err());
        assert!(check_relative("scripts/../x.py").is_ok());
    }

    #[test]
    fn profile_fallback_and_determinism() {
        let md = "---\nname: tracker\ndescription: \"\"\n---\n# Collect\nThis tracks focus.\n# Report\nGenerate it.\n";
        let b = SkillBundle::from_parts("/tmp/x", md, vec![]).unwrap();
        let p = derive_profile(&b, DEFAULT_SUMMARY_BUDGET);
        assert_eq!(p.description, "tracker: Collect; Report");
        assert_eq!(p, derive_profile(&b.clone(), DEFAULT_SUMMARY_BUDGET));
        let short = derive_profile(&b, 5);
        assert_eq!(short.summary, "This ");
    }

    #[test]
    fn missing_name_is_rejected() {
        assert!(matches!(
            SkillBundle::from_parts("/tmp/x", "---\ndescription: d\n---\n", vec![]),
            Err(BundleError::MissingMetadata)
        ));
    }
}
