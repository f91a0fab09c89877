//! Task-conditioned least-privilege analysis for agent skill bundles.

pub mod bundle;
pub mod candidates;
pub mod graph;
pub mod lexicon;
pub mod oracle;
pub mod provenance;
pub mod tasks;
pub mod constrain;
pub mod replay;
pub mod stats;
pub mod config;
pub mod report;
pub mod pipeline;
