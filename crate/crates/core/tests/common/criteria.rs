//! One check per acceptance criterion. Each returns a short summary on
//! success and the first problem found otherwise.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use skillpriv::bundle::{load_bundle, write_bundle, SkillBundle};
use skillpriv::config::Config;
use skillpriv::constrain::{extract_descriptor, normalize_and_cluster, synthesize_guard};
use skillpriv::graph::{build_graph, terminal_id, EdgeKind, Layer, Node, UnifiedGraph};
use skillpriv::oracle::{SemanticOracle, TranscriptBackend};
use skillpriv::pipeline::{analyze, constrain, run_pipeline, TaskSet};
use skillpriv::replay::{apply_ablation, confirm_overprivilege, execute, replay_task, ConfirmOptions, GraphDriver, Sandbox};
use skillpriv::stats::{compute_stratified_validity, StratifiedSample, DEFAULT_Z};
use skillpriv::tasks::{enumerate_chains, ActionChain, ChainLimits, TaskInstance};

use super::*;

pub type Outcome = Result<String, String>;

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    if took < limit {
        Ok(took)
    } else {
        Err(format!("took {took:?}, limit {limit:?}"))
    }
}

pub fn stratified_rows() -> Outcome {
    let rows = [
        ((5541, 1498, 200, 100, 189, 93), "94.18% [91.48%, 96.89%]"),
        ((9846, 3171, 150, 50, 140, 46), "93.01% [89.48%, 96.54%]"),
        ((6075, 1642, 150, 50, 141, 46), "93.57% [90.18%, 96.97%]"),
    ];
    let start = Instant::now();
    let got: Vec<String> = rows
        .iter()
        .map(|&((a, b, c, d, e, f), _)| {
            let s = StratifiedSample { N_I: a, N_C: b, n_I: c, n_C: d, h_I: e, h_C: f };
            compute_stratified_validity(&s, DEFAULT_Z).map(|v| v.display()).unwrap_or_else(|e| e.to_string())
        })
        .collect();
    let took = within(Duration::from_millis(1), start)?;
    for (g, (_, want)) in got.iter().zip(rows.iter()) {
        if g != want {
            return Err(format!("got {g}, expected {want}"));
        }
    }
    Ok(format!("{} in {took:?}", got.join("; ")))
}

fn send_node(g: &UnifiedGraph) -> Option<String> {
    g.actions().find(|a| a.op.as_str() == "send" && a.obj == "report").map(|a| a.id.clone())
}

pub fn worked_guard_example() -> Outcome {
    let start = Instant::now();
    let o = SemanticOracle::rule();
    let b = load_bundle(&fixture("deep-work")).map_err(|e| e.to_string())?;
    let prompts: Vec<TaskInstance> =
        LOCAL_PROMPTS.iter().chain(SYNC_PROMPTS.iter()).map(|p| TaskInstance::from_prompt(*p, None)).collect();
    let mut out = analyze(b, &Config::default(), &o, TaskSet::Fixed(prompts.clone())).map_err(|e| e.to_string())?;
    let send = send_node(&out.graph).ok_or("no send(report) action")?;
    let action = out.graph.action(&send).unwrap().clone();
    let descriptors: Vec<_> = out
        .verdicts
        .iter()
        .filter(|v| v.candidate == send && v.candidate_executed_in_original)
        .map(|v| extract_descriptor(&v.task, &action, v))
        .collect();
    if descriptors.len() != 4 {
        return Err(format!("{} descriptors for the send action", descriptors.len()));
    }
    let clusters = normalize_and_cluster(&descriptors);
    if clusters.len() != 2 {
        return Err(format!("{} clusters", clusters.len()));
    }
    let guard = synthesize_guard(&clusters, &action).map_err(|e| e.to_string())?.to_string();
    if guard != "explicit_request(send) ∧ object=report ∧ destination=Telegram" {
        return Err(format!("guard {guard}"));
    }
    constrain(&mut out, &o);
    let cb = out.projection.as_ref().and_then(|p| p.bundle.clone()).ok_or("no constrained bundle")?;
    let d = GraphDriver::new(&o);
    for t in &prompts {
        let sandbox = Sandbox::temp().map_err(|e| e.to_string())?;
        let (trace, _) = execute(&cb, t, &d, &sandbox, &Default::default()).map_err(|e| e.to_string())?;
        let sent = trace.op_obj().iter().any(|(op, obj)| op.as_str() == "send" && obj == "report");
        let should = SYNC_PROMPTS.contains(&t.prompt.as_str());
        if sent != should {
            return Err(format!("send {} under {:?}", if sent { "ran" } else { "skipped" }, t.prompt));
        }
    }
    let took = within(Duration::from_secs(1), start)?;
    Ok(format!("2 clusters, guard {guard}, skipped locally and sent on sync, {took:?}"))
}

const EXTRA: &[&str] =
    &["Generate the summary and send it to Telegram.", "Read the records and write the table.", "Generate the weekly chart."];

/// Pipeline verdicts and exhaustive ablation of every action under every
/// task, both against the direct definition.
pub fn unnecessary_equivalence(skills: u64) -> Outcome {
    let start = Instant::now();
    let o = SemanticOracle::rule();
    let d = GraphDriver::new(&o);
    let cfg = Config { extra_prompts: EXTRA.iter().map(|s| s.to_string()).collect(), ..Config::default() };
    let (mut pairs, mut positives) = (0usize, 0usize);
    for seed in 0..skills {
        let b = random_skill(1000 + seed, 8);
        let out = analyze(b.clone(), &cfg, &o, TaskSet::Generated).map_err(|e| e.to_string())?;
        if out.graph.actions().count() > 8 {
            return Err(format!("seed {seed}: more than 8 actions"));
        }
        for v in &out.verdicts {
            let r = replay_task(&b, &out.graph, &v.task, &v.candidate, &d).map_err(|e| e.to_string())?;
            if v.unnecessary != brute_force_unnecessary(&v.candidate, &r.original, &r.replay) {
                return Err(format!("seed {seed}: pipeline verdict differs for {} under {:?}", v.candidate, v.task.prompt));
            }
            pairs += 1;
        }
        let mut tasks = out.tasks.clone();
        tasks.extend(EXTRA.iter().map(|p| TaskInstance::from_prompt(*p, None)));
        for a in out.graph.actions().filter(|a| !a.is_invocation()) {
            for t in &tasks {
                let r = replay_task(&b, &out.graph, t, &a.id, &d).map_err(|e| e.to_string())?;
                let v = confirm_overprivilege(&r, &o, ConfirmOptions::default()).map_err(|e| e.to_string())?;
                let want = brute_force_unnecessary(&a.id, &r.original, &r.replay);
                if v.unnecessary != want {
                    return Err(format!("seed {seed}: {} {} under {:?}", a.op, a.obj, t.prompt));
                }
                pairs += 1;
                positives += want as usize;
            }
        }
    }
    let took = within(Duration::from_secs(60), start)?;
    Ok(format!("{skills} skills, {pairs} action-in-task pairs agree ({positives} unnecessary), {took:?}"))
}

pub fn suppression_utility() -> Outcome {
    let start = Instant::now();
    let corpus = injected_corpus();
    let t = suppression_and_utility(&corpus);
    let took = within(Duration::from_secs(120), start)?;
    if let Some(f) = t.failures.first() {
        return Err(f.clone());
    }
    if t.positives == 0 || t.suppressed != t.positives || t.completed != t.legitimate {
        return Err(format!("{t:?}"));
    }
    Ok(format!(
        "{} skills: suppressed {}/{} (100.00%), completed {}/{} (100.00%), {took:?}",
        corpus.len(),
        t.suppressed,
        t.positives,
        t.completed,
        t.legitimate
    ))
}

/// Named fixtures, the injected corpus and a slice of random skills.
pub fn corpus() -> Vec<(String, SkillBundle)> {
    let mut out: Vec<(String, SkillBundle)> =
        FIXTURES.iter().map(|n| (n.to_string(), load_bundle(&fixture(n)).expect("fixture loads"))).collect();
    out.extend(injected_corpus().into_iter().map(|i| (i.bundle.metadata.name.clone(), i.bundle)));
    out.extend((0..100).map(|s| (format!("random-{s}"), random_skill(s, 8))));
    out
}

/// Independent structural checks on one graph.
pub fn graph_problems(b: &SkillBundle, g: &UnifiedGraph) -> Vec<String> {
    let mut p = g.violations();
    p.extend(g.provenance_violations(b));
    for e in &g.edges {
        if !g.nodes.contains_key(&e.from) || !g.nodes.contains_key(&e.to) {
            p.push(format!("dangling edge {} -> {}", e.from, e.to));
        }
    }
    for n in g.nodes.values() {
        if n.layer() != Layer::of(n.artifact()) {
            p.push(format!("{} sits in the wrong layer", n.id()));
        }
        if let Some(src) = n.src() {
            if b.artifact_text(&src.artifact).and_then(|t| t.get(src.start()..src.end())) != Some(src.excerpt.as_str()) {
                p.push(format!("{} excerpt does not re-slice", n.id()));
            }
        }
        if matches!(n, Node::Action(_) | Node::Predicate(_)) && n.src().is_none() {
            p.push(format!("{} has no provenance", n.id()));
        }
    }
    for c in g.edges.iter().filter(|e| e.kind == EdgeKind::Call) {
        let Some(Node::Entry(t)) = g.nodes.get(&c.to) else {
            p.push(format!("call into non-entry {}", c.to));
            continue;
        };
        let exit = terminal_id(&t.artifact, "exit");
        let rets = g.edges.iter().filter(|r| r.kind == EdgeKind::Ret && r.from == exit && r.label.as_deref() == Some(c.from.as_str())).count();
        let succs = g.edges.iter().filter(|e| e.kind == EdgeKind::Ctrl && e.from == c.from).count();
        if rets != succs {
            p.push(format!("call from {} has {rets} returns for {succs} successors", c.from));
        }
    }
    for r in g.edges.iter().filter(|e| e.kind == EdgeKind::Ret) {
        let caller = r.label.as_deref().unwrap_or_default();
        if !g.edges.iter().any(|c| c.kind == EdgeKind::Call && c.from == caller) {
            p.push(format!("return to {} without a call", r.to));
        }
    }
    let json = g.to_json();
    match UnifiedGraph::from_json(&json) {
        Ok(back) if back == *g && back.to_json() == json => {}
        Ok(_) => p.push("serialization round-trip changes the graph".into()),
        Err(e) => p.push(format!("graph JSON does not parse: {e}")),
    }
    p
}

pub fn graph_invariants() -> Outcome {
    let o = SemanticOracle::rule();
    let corpus = corpus();
    let mut nodes = 0;
    for (name, b) in &corpus {
        let g = build_graph(b, &o).map_err(|e| format!("{name}: {e}"))?;
        nodes += g.nodes.len();
        if let Some(v) = graph_problems(b, &g).first() {
            return Err(format!("{name}: {v}"));
        }
    }
    Ok(format!("{} graphs, {nodes} nodes, 0 violations", corpus.len()))
}

pub fn chain_oracle() -> Outcome {
    let o = SemanticOracle::rule();
    let unlimited = ChainLimits { max_chains: usize::MAX, max_depth: usize::MAX };
    let (mut graphs, mut checks) = (0, 0);
    let mut bundles = corpus();
    bundles.extend((0..400).map(|s| (format!("small-{s}"), random_skill(s, 6))));
    for (name, b) in &bundles {
        let g = build_graph(b, &o).map_err(|e| format!("{name}: {e}"))?;
        if g.nodes.len() > 8 {
            continue;
        }
        graphs += 1;
        let mut targets: Vec<Option<&str>> = vec![None];
        targets.extend(g.actions().map(|a| Some(a.id.as_str())));
        for t in targets {
            let got: BTreeSet<ActionChain> = enumerate_chains(&g, t, unlimited).chains.into_iter().collect();
            let want = brute_force_chains(&g, t);
            if got != want && !(g.edges.is_empty() && t.is_none()) {
                return Err(format!("{name}: mismatch for {t:?}"));
            }
            checks += 1;
        }
    }
    if graphs == 0 {
        return Err("no graph with at most 8 nodes".into());
    }
    Ok(format!("{graphs} graphs, {checks} enumerations, 0 mismatches"))
}

fn tree_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = walkdir::WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| (e.path().strip_prefix(dir).unwrap().display().to_string(), std::fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

pub fn determinism() -> Outcome {
    let cfg = Config {
        constrain: true,
        seed: 7,
        extra_prompts: LOCAL_PROMPTS.iter().chain(SYNC_PROMPTS.iter()).map(|s| s.to_string()).collect(),
        ..Config::default()
    };
    let mut checked = 0;
    for name in FIXTURES {
        let recorder = SemanticOracle::rule();
        let first = run_pipeline(&fixture(name), &cfg, &recorder).map_err(|e| e.to_string())?;
        let second = run_pipeline(&fixture(name), &cfg, &SemanticOracle::rule()).map_err(|e| e.to_string())?;
        let replayed = run_pipeline(
            &fixture(name),
            &cfg,
            &SemanticOracle::new(Box::new(TranscriptBackend::from_entries(recorder.transcript()))),
        )
        .map_err(|e| e.to_string())?;
        let reports = [&first, &second, &replayed].map(|o| o.report.to_json());
        if reports[0] != reports[1] || reports[0] != reports[2] {
            return Err(format!("{name}: reports differ"));
        }
        let trees: Vec<_> = [&first, &second, &replayed]
            .iter()
            .map(|o| {
                let dir = tempfile::tempdir().unwrap();
                match &o.projection {
                    Some(p) => p.write(dir.path()).unwrap(),
                    None => write_bundle(&o.bundle, dir.path()).unwrap(),
                }
                tree_bytes(dir.path())
            })
            .collect();
        if trees[0] != trees[1] || trees[0] != trees[2] {
            return Err(format!("{name}: constrained bundles differ"));
        }
        checked += 1;
    }
    Ok(format!("{checked} bundles x 3 runs (rule, rule, transcript replay): byte-identical"))
}

/// The single changed region between two texts: (start, removed, inserted).
pub fn diff_region(a: &str, b: &str) -> (usize, String, String) {
    let pre = a.bytes().zip(b.bytes()).take_while(|(x, y)| x == y).count();
    let max_suf = a.len().min(b.len()) - pre;
    let suf = a.bytes().rev().zip(b.bytes().rev()).take(max_suf).take_while(|(x, y)| x == y).count();
    (pre, a[pre..a.len() - suf].to_string(), b[pre..b.len() - suf].to_string())
}

pub fn round_trip_and_golden_diffs() -> Outcome {
    let o = SemanticOracle::rule();
    let mut n = 0;
    for (name, b) in corpus() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        write_bundle(&b, d1.path()).map_err(|e| format!("{name}: {e}"))?;
        let loaded = load_bundle(d1.path()).map_err(|e| format!("{name}: {e}"))?;
        write_bundle(&loaded, d2.path()).map_err(|e| format!("{name}: {e}"))?;
        if tree_bytes(d1.path()) != tree_bytes(d2.path()) {
            return Err(format!("{name}: load/write is not byte-identical"));
        }
        n += 1;
    }
    for name in FIXTURES {
        let dir = fixture(name);
        let b = load_bundle(&dir).map_err(|e| e.to_string())?;
        let out = tempfile::tempdir().unwrap();
        write_bundle(&b, out.path()).map_err(|e| e.to_string())?;
        if tree_bytes(&dir) != tree_bytes(out.path()) {
            return Err(format!("{name}: written bundle differs from the fixture directory"));
        }
    }

    let b = load_bundle(&fixture("deep-work")).map_err(|e| e.to_string())?;
    let g = build_graph(&b, &o).map_err(|e| e.to_string())?;
    let text = &b.instruction_doc.raw_text;
    let send = send_node(&g).ok_or("no send action")?;
    let (ablated, _) = apply_ablation(&b, &g, &send).map_err(|e| e.to_string())?;
    let region = diff_region(text, &ablated.instruction_doc.raw_text);
    let step = "4. Send the report to Telegram.\n";
    if region != (text.find(step).unwrap(), step.to_string(), String::new()) {
        return Err(format!("instruction ablation diff {region:?}"));
    }

    let collect = g.actions().find(|a| a.op.as_str() == "collect").ok_or("no collect action")?.id.clone();
    let (ablated, _) = apply_ablation(&b, &g, &collect).map_err(|e| e.to_string())?;
    let src = &b.script("scripts/host_info.py").unwrap().source;
    let region = diff_region(src, &ablated.script("scripts/host_info.py").unwrap().source);
    let body = "host = socket.gethostname()\n    print(host)";
    if region != (src.find(body).unwrap(), body.to_string(), "return None".to_string()) {
        return Err(format!("code ablation diff {region:?}"));
    }

    let guarded = skillpriv::constrain::insert_guard(
        &b,
        &g,
        &skillpriv::constrain::plan_constraint(
            &b,
            &g,
            g.action(&send).unwrap(),
            skillpriv::constrain::GuardCondition::from_guard_text(
                "the user explicitly asks to send the report to Telegram",
            )
            .ok_or("guard text does not parse")?,
            &o,
        )
        .map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let region = diff_region(text, &guarded.instruction_doc.raw_text);
    let sentence = "Only if the user explicitly asks to send the report to Telegram, perform the next step; otherwise skip it. ";
    if region != (text.find("Send the report").unwrap(), String::new(), sentence.to_string()) {
        return Err(format!("guard insertion diff {region:?}"));
    }
    Ok(format!("{n} bundles round-trip byte-identically; 3 golden single-region diffs match"))
}
