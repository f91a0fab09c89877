//! Consistency screening of every action node against the skill profile.

use serde::{Deserialize, Serialize};

use crate::bundle::SkillProfile;
use crate::graph::{context_window, BidirectionalContext, GraphError, Layer, NodeId, UnifiedGraph};
use crate::lexicon::{self, Op};
use crate::oracle::{ConsistencyVerdict, SemanticOracle, Verdict};

pub const DEFAULT_RADIUS: usize = 2;

/// Privilege-relevant action types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivilegeType {
    SensitiveDataAccess,
    ExternalTransmission,
    CommandExecution,
    PersistentStateModification,
}

impl PrivilegeType {
    pub fn as_str(self) -> &'static str {
        match self {
            PrivilegeType::SensitiveDataAccess => "sensitive_data_access",
            PrivilegeType::ExternalTransmission => "external_transmission",
            PrivilegeType::CommandExecution => "command_execution",
            PrivilegeType::PersistentStateModification => "persistent_state_modification",
        }
    }
}

/// Fixed op mapping into the privilege types; `None` for actions outside it.
pub fn privilege_type(op: &Op, obj: &str, excerpt: &str) -> Option<PrivilegeType> {
    match op {
        Op::Send | Op::Receive => Some(PrivilegeType::ExternalTransmission),
        Op::Collect => Some(PrivilegeType::SensitiveDataAccess),
        Op::Read if lexicon::is_secret_like(obj) || lexicon::is_secret_like(excerpt) => {
            Some(PrivilegeType::SensitiveDataAccess)
        }
        Op::Exec => Some(PrivilegeType::CommandExecution),
        Op::Write | Op::Delete if lexicon::is_outside_workspace(obj) || lexicon::is_outside_workspace(excerpt) => {
            Some(PrivilegeType::PersistentStateModification)
        }
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverprivilegeCandidate {
    pub node: NodeId,
    pub layer: Layer,
    pub verdict: ConsistencyVerdict,
    pub context: BidirectionalContext,
    pub privilege_type: PrivilegeType,
    pub excerpt: String,
}

/// Screens action nodes in id order. Script invocations are skipped: the
/// actions inside the invoked script are screened on their own.
pub fn extract_candidates(
    g: &UnifiedGraph,
    profile: &SkillProfile,
    oracle: &SemanticOracle,
    radius: usize,
) -> Result<Vec<OverprivilegeCandidate>, GraphError> {
    let mut out = Vec::new();
    for a in g.actions() {
        if a.is_invocation() {
            continue;
        }
        let Some(ptype) = privilege_type(&a.op, &a.obj, &a.src.excerpt) else { continue };
        let mut ctx = context_window(g, &a.id, radius)?;
        if g.detached.contains(&a.id) {
            ctx = ctx.without_backward();
        }
        let verdict = oracle.classify_consistency(profile, a, &ctx)?;
        if verdict.verdict == Verdict::Candidate {
            out.push(OverprivilegeCandidate {
                node: a.id.clone(),
                layer: a.layer,
                verdict,
                context: ctx,
                privilege_type: ptype,
                excerpt: a.src.excerpt.clone(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mapping_is_closed() {
        assert_eq!(privilege_type(&Op::Generate, "report", ""), None);
        assert_eq!(privilege_type(&Op::Transform, "commits", ""), None);
        assert_eq!(privilege_type(&Op::Read, "records", "read the records"), None);
        assert_eq!(privilege_type(&Op::Read, "env_files", ""), Some(PrivilegeType::SensitiveDataAccess));
        assert_eq!(privilege_type(&Op::Write, "~/.bashrc", ""), Some(PrivilegeType::PersistentStateModification));
        assert_eq!(privilege_type(&Op::Write, "out.csv", "write out.csv"), None);
        assert_eq!(privilege_type(&Op::Send, "report", ""), Some(PrivilegeType::ExternalTransmission));
    }
}
