//! Original-versus-ablated replay and confirmation of unnecessary actions.

pub mod ablation;
pub mod confirm;
pub mod driver;
pub mod sandbox;

use thiserror::Error;

pub use ablation::{apply_ablation, apply_ablations, Ablation, AblationMode};
pub use confirm::{
    chain_triggered, confirm_overprivilege, execute, replay_task, ConfirmOptions, OverprivilegeVerdict, ReplayRecord,
};
pub use driver::{AgentDriver, GraphDriver};
pub use sandbox::Sandbox;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("SandboxViolation: {0}")]
    SandboxViolation(String),
    #[error("DriverFailure: {0}")]
    DriverFailure(String),
    #[error("AblationSpanConflict: {0}")]
    AblationSpanConflict(String),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Oracle(#[from] crate::oracle::OracleError),
    #[error(transparent)]
    Bundle(#[from] crate::bundle::BundleError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
