//! Candidate-aware action chains and the tasks instantiated from them.

pub mod chains;
pub mod fixtures;
pub mod instantiate;

pub use chains::{chain_is_valid, enumerate_chains, ActionChain, ChainEnumeration, ChainLimits};
pub use fixtures::{Fixture, FixtureFile, FixtureKind, FixtureProvider, LocalFixtures};
pub use instantiate::{instantiate_task, prompt_steps, TaskInstance};
