//! Source locations inside a bundle and byte-level edits over them.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Which artifact of a bundle a span points into.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "path")]
pub enum Artifact {
    Instruction,
    Script(String),
    Metadata,
}

impl Artifact {
    pub fn key(&self) -> String {
        match self {
            Artifact::Instruction => "instruction".to_string(),
            Artifact::Script(p) => format!("script:{p}"),
            Artifact::Metadata => "metadata".to_string(),
        }
    }
}

impl fmt::Display for Artifact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// Exact origin of an analysis element: `excerpt` equals the bytes at
/// `byte_range` of `artifact`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub artifact: Artifact,
    pub byte_range: (usize, usize),
    pub excerpt: String,
}

impl Provenance {
    pub fn new(artifact: Artifact, text: &str, start: usize, end: usize) -> Self {
        Provenance {
            artifact,
            byte_range: (start, end),
            excerpt: text[start..end].to_string(),
        }
    }

    pub fn start(&self) -> usize {
        self.byte_range.0
    }

    pub fn end(&self) -> usize {
        self.byte_range.1
    }

    /// Re-slices `text` and compares with the stored excerpt.
    pub fn matches(&self, text: &str) -> bool {
        text.get(self.start()..self.end()) == Some(self.excerpt.as_str())
    }

    pub fn overlaps(&self, other: &Provenance) -> bool {
        self.artifact == other.artifact
            && self.start() < other.end()
            && other.start() < self.end()
    }
}

/// Replacement of `old_len` bytes at `start` by `replacement`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanEdit {
    pub artifact: Artifact,
    pub start: usize,
    pub old_len: usize,
    pub replacement: String,
}

impl SpanEdit {
    pub fn end(&self) -> usize {
        self.start + self.old_len
    }

    pub fn overlaps(&self, other: &SpanEdit) -> bool {
        if self.artifact != other.artifact {
            return false;
        }
        // Two pure insertions at the same point conflict as well.
        if self.start == other.start {
            return true;
        }
        self.start < other.end() && other.start < self.end()
    }
}

/// Applies edits to one text in descending offset order so that earlier
/// offsets stay valid. Edits must not overlap.
pub fn apply_edits(text: &str, edits: &[&SpanEdit]) -> String {
    let mut sorted: Vec<&&SpanEdit> = edits.iter().collect();
    sorted.sort_by(|a, b| b.start.cmp(&a.start));
    let mut out = text.to_string();
    for e in sorted {
        out.replace_range(e.start..e.end(), &e.replacement);
    }
    out
}

/// Maps offsets of an edited artifact back to the original coordinates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditMap {
    edits: Vec<SpanEdit>,
}

impl EditMap {
    pub fn new(mut edits: Vec<SpanEdit>) -> Self {
        edits.sort_by(|a, b| (a.artifact.key(), a.start).cmp(&(b.artifact.key(), b.start)));
        EditMap { edits }
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    pub fn edits(&self) -> &[SpanEdit] {
        &self.edits
    }

    /// Original range for a range of the edited text; `None` when the range
    /// touches inserted bytes.
    pub fn to_original(&self, artifact: &Artifact, range: (usize, usize)) -> Option<(usize, usize)> {
        let mut delta: isize = 0;
        for e in self.edits.iter().filter(|e| &e.artifact == artifact) {
            let new_start = (e.start as isize + delta) as usize;
            let new_end = new_start + e.replacement.len();
            if range.1 <= new_start {
                break;
            }
            if range.0 < new_end && range.1 > new_start {
                return None;
            }
            delta += e.replacement.len() as isize - e.old_len as isize;
        }
        Some((
            (range.0 as isize - delta) as usize,
            (range.1 as isize - delta) as usize,
        ))
    }
}
