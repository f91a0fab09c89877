//! JSON-lines transcripts and a backend that answers from one.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{request_hash, Capability, OracleBackend, OracleError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub capability: Capability,
    pub request_hash: String,
    pub request: Value,
    pub response: Value,
}

pub fn write(path: &Path, entries: &[TranscriptEntry]) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    for e in entries {
        writeln!(f, "{}", serde_json::to_string(e).map_err(std::io::Error::other)?)?;
    }
    Ok(())
}

pub fn parse(text: &str) -> Result<Vec<TranscriptEntry>, OracleError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| OracleError::Malformed(format!("transcript line {}: {e}", i + 1)))
        })
        .collect()
}

/// Replays recorded responses keyed by capability and request hash.
#[derive(Debug, Clone, Default)]
pub struct TranscriptBackend {
    responses: BTreeMap<(Capability, String), Value>,
}

impl TranscriptBackend {
    pub fn from_entries(entries: Vec<TranscriptEntry>) -> Self {
        let responses = entries
            .into_iter()
            .map(|e| ((e.capability, e.request_hash), e.response))
            .collect();
        TranscriptBackend { responses }
    }

    pub fn load(path: &Path) -> Result<Self, OracleError> {
        let text = fs::read_to_string(path)
            .map_err(|e| OracleError::OracleUnavailable(format!("{}: {e}", path.display())))?;
        Ok(Self::from_entries(parse(&text)?))
    }
}

impl OracleBackend for TranscriptBackend {
    fn call(&self, capability: Capability, request: &Value) -> Result<Value, OracleError> {
        let hash = request_hash(capability, request);
        self.responses
            .get(&(capability, hash.clone()))
            .cloned()
            .ok_or(OracleError::TranscriptMiss { capability: capability.to_string(), request_hash: hash })
    }
}
