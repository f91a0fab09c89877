//! End-to-end orchestration: load, graph, candidates, tasks, replay,
//! confirmation and optional constraining.

use std::collections::BTreeSet;
use std::path::Path;

use thiserror::Error;

use crate::bundle::{derive_profile, load_bundle, SkillBundle, SkillProfile};
use crate::candidates::{extract_candidates, OverprivilegeCandidate};
use crate::config::Config;
use crate::constrain::{
    extract_descriptor, normalize_and_cluster, plan_constraint, project_constraints, synthesize_guard, ConstrainedNode,
    Projection,
};
use crate::graph::{build_graph, UnifiedGraph};
use crate::lexicon;
use crate::oracle::SemanticOracle;
use crate::replay::{confirm_overprivilege, replay_task, ConfirmOptions, GraphDriver, OverprivilegeVerdict};
use crate::report::{AnalysisReport, ChainStats, ConstraintSummary};
use crate::tasks::{enumerate_chains, instantiate_task, FixtureKind, FixtureProvider, LocalFixtures, TaskInstance};
use crate::tasks::fixtures::{resource_need, ResourceNeed};

/// A fatal error, tagged with the stage that raised it.
#[derive(Debug, Error)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: &'static str,
    pub message: String,
}

fn stage<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError { stage, message: e.to_string() }
}

/// Where replay tasks come from.
#[derive(Debug, Clone)]
pub enum TaskSet {
    /// Chains are enumerated per candidate and turned into prompts; the
    /// configured extra prompts are added.
    Generated,
    /// The given tasks are replayed against every candidate.
    Fixed(Vec<TaskInstance>),
}

/// Every intermediate artifact of one run.
#[derive(Debug)]
pub struct PipelineOutcome {
    pub bundle: SkillBundle,
    pub profile: SkillProfile,
    pub graph: UnifiedGraph,
    pub candidates: Vec<OverprivilegeCandidate>,
    /// Distinct prompts and fixtures replayed, in first-use order.
    pub tasks: Vec<TaskInstance>,
    pub verdicts: Vec<OverprivilegeVerdict>,
    pub projection: Option<Projection>,
    pub report: AnalysisReport,
}

impl PipelineOutcome {
    /// The tasks again, stripped of their chains, for re-analysis of a
    /// rewritten bundle whose node ids differ.
    pub fn task_set(&self) -> TaskSet {
        TaskSet::Fixed(self.tasks.iter().map(|t| TaskInstance::from_prompt(t.prompt.clone(), t.fixture.clone())).collect())
    }
}

pub fn oracle_for(cfg: &Config) -> Result<SemanticOracle, PipelineError> {
    SemanticOracle::from_choice(&cfg.oracle).map_err(stage("oracle"))
}

/// Loads the bundle at `path` and runs the configured pipeline.
pub fn run_pipeline(path: &Path, cfg: &Config, oracle: &SemanticOracle) -> Result<PipelineOutcome, PipelineError> {
    cfg.validate().map_err(stage("config"))?;
    let bundle = load_bundle(path).map_err(stage("load"))?;
    let mut out = analyze(bundle, cfg, oracle, TaskSet::Generated)?;
    if cfg.constrain {
        constrain(&mut out, oracle);
    }
    Ok(out)
}

/// Fixture for a free-form prompt, chosen from the resources it mentions.
pub fn prompt_fixture(prompt: &str, seed: u64) -> Option<crate::tasks::Fixture> {
    let terms: Vec<String> = lexicon::content_tokens(prompt).into_iter().collect();
    match resource_need(&terms) {
        ResourceNeed::Kind(FixtureKind::None) | ResourceNeed::Unsupported(_) => None,
        ResourceNeed::Kind(k) => Some(LocalFixtures.provide(k, &terms, seed)),
    }
}

pub fn analyze(
    bundle: SkillBundle,
    cfg: &Config,
    oracle: &SemanticOracle,
    tasks: TaskSet,
) -> Result<PipelineOutcome, PipelineError> {
    let graph = build_graph(&bundle, oracle).map_err(stage("graph"))?;
    let profile = derive_profile(&bundle, cfg.summary_budget);
    let candidates = extract_candidates(&graph, &profile, oracle, cfg.context_radius).map_err(stage("candidates"))?;
    let driver = GraphDriver::new(oracle);
    let opts = ConfirmOptions { order_sensitive: cfg.order_sensitive, out_eq_threshold: cfg.out_eq_threshold };

    let mut diagnostics: Vec<String> = graph.diagnostics.clone();
    let mut stats = ChainStats::default();
    let mut truncated = false;
    let mut verdicts = Vec::new();
    let mut used: Vec<TaskInstance> = Vec::new();
    let mut seed = cfg.seed;

    let extra: Vec<TaskInstance> = match &tasks {
        TaskSet::Fixed(ts) => ts.clone(),
        TaskSet::Generated => cfg
            .extra_prompts
            .iter()
            .enumerate()
            .map(|(i, p)| TaskInstance::from_prompt(p.clone(), prompt_fixture(p, cfg.seed.wrapping_add(i as u64))))
            .collect(),
    };

    for c in &candidates {
        let mut mine: Vec<TaskInstance> = Vec::new();
        if matches!(tasks, TaskSet::Generated) {
            let en = enumerate_chains(&graph, Some(&c.node), cfg.limits());
            truncated |= en.truncated;
            stats.chains += en.chains.len();
            for chain in &en.chains {
                let t = instantiate_task(&graph, chain, Some(&c.node), &profile, oracle, &LocalFixtures, seed)
                    .map_err(stage("tasks"))?;
                seed = seed.wrapping_add(1);
                mine.push(t);
            }
        }
        mine.extend(extra.iter().cloned());

        let mut confirmed = 0usize;
        for t in mine {
            stats.tasks += 1;
            if let Some(why) = &t.unvalidatable {
                stats.unvalidatable += 1;
                diagnostics.push(format!("unvalidatable: {} under \"{}\": {why}", c.node, t.prompt));
                continue;
            }
            let record = match replay_task(&bundle, &graph, &t, &c.node, &driver) {
                Ok(r) => r,
                Err(e) => {
                    stats.failed += 1;
                    diagnostics.push(format!("replay: {} under \"{}\": {e}", c.node, t.prompt));
                    continue;
                }
            };
            if !record.triggered {
                stats.untriggered += 1;
                diagnostics.push(format!("untriggered: {} under \"{}\"", c.node, t.prompt));
                continue;
            }
            stats.triggered += 1;
            let v = confirm_overprivilege(&record, oracle, opts).map_err(stage("confirm"))?;
            if v.candidate_executed_in_original {
                confirmed += 1;
            }
            if !used.iter().any(|u| u.prompt == t.prompt && u.fixture == t.fixture) {
                used.push(TaskInstance { chain: Default::default(), target_candidate: None, ..t.clone() });
            }
            verdicts.push(v);
        }
        if confirmed == 0 {
            diagnostics.push(format!("untriggered: {} is not executed by any task", c.node));
        }
    }

    let report = AnalysisReport::assemble(&graph, &candidates, &verdicts, stats, truncated, diagnostics);
    Ok(PipelineOutcome { bundle, profile, graph, candidates, tasks: used, verdicts, projection: None, report })
}

/// Synthesizes and projects a guard for every action with a positive
/// verdict. Actions whose guard cannot be built or placed are reported and
/// left unconstrained. A no-op when nothing is positive.
pub fn constrain(out: &mut PipelineOutcome, oracle: &SemanticOracle) {
    let positive: BTreeSet<&str> =
        out.verdicts.iter().filter(|v| v.unnecessary).map(|v| v.candidate.as_str()).collect();
    if positive.is_empty() {
        return;
    }
    let mut nodes: Vec<ConstrainedNode> = Vec::new();
    let mut projection: Option<Projection> = None;
    for c in &out.candidates {
        if !positive.contains(c.node.as_str()) {
            continue;
        }
        let Some(action) = out.graph.action(&c.node) else { continue };
        let descriptors: Vec<_> = out
            .verdicts
            .iter()
            .filter(|v| v.candidate == c.node && v.candidate_executed_in_original)
            .map(|v| extract_descriptor(&v.task, action, v))
            .collect();
        let clusters = normalize_and_cluster(&descriptors);
        let planned = synthesize_guard(&clusters, action)
            .and_then(|guard| plan_constraint(&out.bundle, &out.graph, action, guard, oracle));
        let cn = match planned {
            Ok(cn) => cn,
            Err(e) => {
                out.report.diagnostics.push(format!("constrain: {}: {e}", c.node));
                continue;
            }
        };
        nodes.push(cn);
        match project_constraints(&out.bundle, &out.graph, &nodes) {
            Ok(p) => projection = Some(p),
            Err(e) => {
                out.report.diagnostics.push(format!("constrain: {}: {e}", c.node));
                nodes.pop();
            }
        }
    }
    if let Some(p) = &projection {
        out.report.constraints = p
            .constraints
            .iter()
            .map(|e| ConstraintSummary {
                action: e.action.clone(),
                condition: e.condition.clone(),
                instruction_text: e.instruction_text.clone(),
            })
            .collect();
        for e in &p.constraints {
            out.report.diagnostics.extend(e.diagnostics.iter().map(|d| format!("constrain: {}: {d}", e.action)));
        }
    }
    out.projection = projection;
}

/// Runs the analysis again on the constrained bundle with the task set of
/// the original run.
pub fn reanalyze(out: &PipelineOutcome, cfg: &Config, oracle: &SemanticOracle) -> Option<Result<PipelineOutcome, PipelineError>> {
    let bundle = out.projection.as_ref()?.bundle.clone()?;
    Some(analyze(bundle, cfg, oracle, out.task_set()))
}
