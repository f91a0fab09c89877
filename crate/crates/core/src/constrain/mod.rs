//! Task-conditioned guards and their projection back into the bundle.

pub mod descriptor;
pub mod guard;
pub mod insert;
pub mod project;
pub mod reorganize;

use thiserror::Error;

pub use descriptor::{describe_prompt, extract_descriptor, requests_effect, ExecutionScope, TaskContextDescriptor, ValidationResult};
pub use guard::{normalize_and_cluster, synthesize_guard, Clause, ClusterKey, ContextCluster, GuardCondition};
pub use project::{insert_guard, plan_constraint, project_constraints, reorganize_script, ConstrainedNode, ManifestEntry, Projection};
pub use reorganize::{plan_reorganization, ScriptPlan};

#[derive(Debug, Error)]
pub enum ConstrainError {
    #[error("ConflictError: {0}")]
    Conflict(String),
    #[error("SpanConflict: {0}")]
    SpanConflict(String),
    #[error("RefactorFailure: {0}")]
    RefactorFailure(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error(transparent)]
    Bundle(#[from] crate::bundle::BundleError),
    #[error(transparent)]
    Oracle(#[from] crate::oracle::OracleError),
}
