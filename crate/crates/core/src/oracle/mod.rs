//! One seam for every semantic judgment: a backend answers JSON requests per
//! capability and [`SemanticOracle`] types and logs them.

pub mod remote;
pub mod rules;
pub mod transcript;
pub mod types;

use std::fmt;
use std::path::Path;
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bundle::SkillProfile;
use crate::graph::instr::{Fragment, NormalizedActions};
use crate::graph::{ActionNode, BidirectionalContext};

pub use remote::{RemoteBackend, RemoteConfig};
pub use rules::RuleBackend;
pub use transcript::{TranscriptBackend, TranscriptEntry};
pub use types::*;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),
    #[error("no transcript entry for {capability} request {request_hash}")]
    TranscriptMiss { capability: String, request_hash: String },
    #[error("malformed oracle payload: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    NormalizeActions,
    ClassifyConsistency,
    SynthesizePrompt,
    JudgeCoreEq,
    JudgeOutEq,
    SynthesizeGuardText,
}

impl Capability {
    pub fn as_str(self) -> &'static str {
        match self {
            Capability::NormalizeActions => "normalize_actions",
            Capability::ClassifyConsistency => "classify_consistency",
            Capability::SynthesizePrompt => "synthesize_prompt",
            Capability::JudgeCoreEq => "judge_core_eq",
            Capability::JudgeOutEq => "judge_out_eq",
            Capability::SynthesizeGuardText => "synthesize_guard_text",
        }
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Anything that can answer capability requests.
pub trait OracleBackend: Send + Sync {
    fn call(&self, capability: Capability, request: &Value) -> Result<Value, OracleError>;
}

/// Stable hash of a request; `serde_json` maps are key-ordered.
pub fn request_hash(capability: Capability, request: &Value) -> String {
    let mut h = Sha256::new();
    h.update(capability.as_str().as_bytes());
    h.update(b"\n");
    h.update(request.to_string().as_bytes());
    hex::encode(&h.finalize()[..16])
}

pub struct SemanticOracle {
    backend: Box<dyn OracleBackend>,
    transcript: Mutex<Vec<TranscriptEntry>>,
}

impl fmt::Debug for SemanticOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SemanticOracle").field("calls", &self.transcript().len()).finish()
    }
}

impl Default for SemanticOracle {
    fn default() -> Self {
        SemanticOracle::rule()
    }
}

impl SemanticOracle {
    pub fn new(backend: Box<dyn OracleBackend>) -> Self {
        SemanticOracle { backend, transcript: Mutex::new(Vec::new()) }
    }

    /// The deterministic default.
    pub fn rule() -> Self {
        SemanticOracle::new(Box::new(RuleBackend))
    }

    /// Parses `rule`, `remote` or `transcript:<file>`.
    pub fn from_choice(choice: &str) -> Result<Self, OracleError> {
        match choice {
            "rule" => Ok(SemanticOracle::rule()),
            "remote" => Ok(SemanticOracle::new(Box::new(RemoteBackend::new(RemoteConfig::from_env()?)))),
            s => match s.strip_prefix("transcript:") {
                Some(path) => Ok(SemanticOracle::new(Box::new(TranscriptBackend::load(Path::new(path))?))),
                None => Err(OracleError::OracleUnavailable(format!("unknown oracle `{s}`"))),
            },
        }
    }

    /// Copy of every call made so far, in call order.
    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        self.transcript.lock().expect("transcript lock").clone()
    }

    pub fn write_transcript(&self, path: &Path) -> std::io::Result<()> {
        transcript::write(path, &self.transcript())
    }

    fn call<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        capability: Capability,
        request: &Req,
    ) -> Result<Resp, OracleError> {
        let req = serde_json::to_value(request).map_err(|e| OracleError::Malformed(e.to_string()))?;
        let resp = self.backend.call(capability, &req)?;
        let typed = serde_json::from_value(resp.clone())
            .map_err(|e| OracleError::Malformed(format!("{capability}: {e}")))?;
        self.transcript.lock().expect("transcript lock").push(TranscriptEntry {
            capability,
            request_hash: request_hash(capability, &req),
            request: req,
            response: resp,
        });
        Ok(typed)
    }

    pub fn normalize_actions(&self, fragments: &[Fragment]) -> Result<NormalizedActions, OracleError> {
        self.call(Capability::NormalizeActions, &serde_json::json!({ "fragments": fragments }))
    }

    pub fn classify_consistency(
        &self,
        profile: &SkillProfile,
        action: &ActionNode,
        context: &BidirectionalContext,
    ) -> Result<ConsistencyVerdict, OracleError> {
        let req = ClassifyRequest { profile: profile.clone(), action: action.clone(), context: context.clone() };
        self.call(Capability::ClassifyConsistency, &req)
    }

    pub fn synthesize_prompt(&self, profile: &SkillProfile, steps: &[PromptStep]) -> Result<String, OracleError> {
        let req = PromptRequest { profile: profile.clone(), steps: steps.to_vec() };
        self.call(Capability::SynthesizePrompt, &req)
    }

    pub fn judge_core_eq(&self, req: &CoreEqRequest) -> Result<bool, OracleError> {
        self.call(Capability::JudgeCoreEq, req)
    }

    pub fn judge_out_eq(&self, req: &OutEqRequest) -> Result<bool, OracleError> {
        self.call(Capability::JudgeOutEq, req)
    }

    pub fn synthesize_guard_text(&self, req: &GuardTextRequest) -> Result<String, OracleError> {
        self.call(Capability::SynthesizeGuardText, req)
    }
}
