//! Turning an action chain into an executable task: prompt plus fixture.

use serde::{Deserialize, Serialize};

use super::chains::ActionChain;
use super::fixtures::{resource_need, Fixture, FixtureKind, FixtureProvider, ResourceNeed};
use crate::bundle::SkillProfile;
use crate::graph::{Layer, NodeId, PredKind, UnifiedGraph};
use crate::oracle::{OracleError, PromptStep, SemanticOracle};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub prompt: String,
    pub chain: ActionChain,
    pub fixture: Option<Fixture>,
    pub target_candidate: Option<NodeId>,
    /// Set when the chain needs a resource the fixture taxonomy lacks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unvalidatable: Option<String>,
}

impl TaskInstance {
    /// A task built from a user-supplied prompt rather than a chain.
    pub fn from_prompt(prompt: impl Into<String>, fixture: Option<Fixture>) -> Self {
        TaskInstance {
            prompt: prompt.into(),
            chain: ActionChain::default(),
            fixture,
            target_candidate: None,
            unvalidatable: None,
        }
    }

    pub fn fixture_kind(&self) -> FixtureKind {
        self.fixture.as_ref().map_or(FixtureKind::None, |f| f.kind)
    }
}

/// The chain as prompt synthesis sees it. Code actions stay implicit; the
/// user asks for what the instructions describe.
pub fn prompt_steps(g: &UnifiedGraph, chain: &ActionChain) -> Vec<PromptStep> {
    let mut steps = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for id in &chain.nodes {
        if let Some(a) = g.action(id) {
            if a.layer == Layer::Instr && !a.is_invocation() {
                steps.push(PromptStep::Action {
                    op: a.op.clone(),
                    obj: a.obj.clone(),
                    destination: a.destination.clone(),
                    phrase: a.phrase.clone(),
                    excerpt: a.src.excerpt.clone(),
                });
            }
        } else if let Some(p) = g.predicate(id) {
            if !seen.insert(id.clone()) {
                continue;
            }
            let Some(&taken) = chain.predicate_assignments.get(id) else { continue };
            if p.layer == Layer::Code && crate::graph::fixed_code_condition(&p.phi).is_some() {
                continue;
            }
            match p.pred_kind {
                PredKind::Branch => steps.push(PromptStep::Branch { phi: p.phi.clone(), include: taken != p.negated }),
                PredKind::Guard => steps.push(PromptStep::Guard { phi: p.phi.clone(), taken }),
                PredKind::Loop => {}
            }
        }
    }
    steps
}

/// Object and phrase terms of every concrete action on the chain.
pub fn resource_terms(g: &UnifiedGraph, chain: &ActionChain) -> Vec<String> {
    let mut terms = Vec::new();
    for a in chain.actions(g) {
        terms.push(a.obj.clone());
        if a.layer == Layer::Instr {
            terms.extend(crate::lexicon::words(&a.phrase).into_iter().map(|w| w.text));
        }
    }
    terms
}

pub fn instantiate_task(
    g: &UnifiedGraph,
    chain: &ActionChain,
    target: Option<&str>,
    profile: &SkillProfile,
    oracle: &SemanticOracle,
    fixtures: &dyn FixtureProvider,
    seed: u64,
) -> Result<TaskInstance, OracleError> {
    let prompt = oracle.synthesize_prompt(profile, &prompt_steps(g, chain))?;
    let terms = resource_terms(g, chain);
    let (fixture, unvalidatable) = match resource_need(&terms) {
        ResourceNeed::Kind(FixtureKind::None) => (None, None),
        ResourceNeed::Kind(k) => (Some(fixtures.provide(k, &terms, seed)), None),
        ResourceNeed::Unsupported(t) => (None, Some(format!("UnsupportedResource: {t}"))),
    };
    Ok(TaskInstance {
        prompt,
        chain: chain.clone(),
        fixture,
        target_candidate: target.map(str::to_string),
        unvalidatable,
    })
}
