use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use skillpriv::bundle::write_bundle;
use skillpriv::config::Config;
use skillpriv::pipeline::{oracle_for, run_pipeline, PipelineOutcome};
use skillpriv::stats::{compute_stratified_validity, StratifiedSample, DEFAULT_Z};

#[derive(Parser)]
#[command(name = "skillpriv", version, about = "Find and constrain task-unnecessary privileged actions in agent skills")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one skill bundle and print or write the report.
    Analyze {
        bundle: PathBuf,
        #[arg(long)]
        graph_out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Analyze a bundle and write the constrained bundle to a directory.
    Constrain {
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Analyze every bundle under a directory, one report file per bundle.
    Batch {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        jobs: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Statistics utilities.
    Stats {
        #[command(subcommand)]
        command: StatsCommand,
    },
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Population-weighted validity rate with a normal confidence interval.
    Stratified {
        /// JSON or TOML file with N_I, N_C, n_I, n_C, h_I, h_C.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_Z)]
        z: f64,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// rule, remote, or transcript:<file>
    #[arg(long)]
    oracle: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_chains: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Extra task prompt replayed against every candidate; repeatable.
    #[arg(long = "prompt")]
    prompts: Vec<String>,
    /// Record every oracle call to this file.
    #[arg(long)]
    transcript_out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<Config, String> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p).map_err(|e| e.to_string())?,
            None => Config::default(),
        };
        if let Some(o) = &self.oracle {
            cfg.oracle = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.max_chains {
            cfg.max_chains = n;
        }
        if let Some(n) = self.max_depth {
            cfg.max_depth = n;
        }
        cfg.extra_prompts.extend(self.prompts.iter().cloned());
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    fn run(&self, bundle: &Path, cfg: &Config) -> Result<PipelineOutcome, String> {
        let oracle = oracle_for(cfg).map_err(|e| e.to_string())?;
        let out = run_pipeline(bundle, cfg, &oracle).map_err(|e| e.to_string());
        if let Some(t) = &self.transcript_out {
            oracle.write_transcript(t).map_err(|e| format!("transcript: {e}"))?;
        }
        out
    }
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn emit_report(out: &PipelineOutcome, path: Option<&Path>) -> Result<(), String> {
    match path {
        Some(p) => write(p, &out.report.to_json()),
        None => {
            print!("{}", out.report.to_json());
            Ok(())
        }
    }
}

fn verdict_code(found: bool) -> ExitCode {
    if found {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn bundles_under(dir: &Path) -> Vec<PathBuf> {
    let mut found: Vec<PathBuf> = walkdir::WalkDir::new(dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.file_name() == "SKILL.md")
        .filter_map(|e| e.path().parent().map(Path::to_path_buf))
        .collect();
    found.dedup();
    found
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Analyze { bundle, graph_out, report, run } => {
            let cfg = run.config()?;
            let out = run.run(&bundle, &cfg)?;
            if let Some(g) = graph_out {
                write(&g, &out.graph.to_json())?;
            }
            emit_report(&out, report.as_deref())?;
            Ok(verdict_code(out.report.skill_verdict))
        }
        Command::Constrain { bundle, out: dir, report, run } => {
            let cfg = Config { constrain: true, ..run.config()? };
            let out = run.run(&bundle, &cfg)?;
            match &out.projection {
                Some(p) => p.write(&dir).map_err(|e| format!("constrain: {e}"))?,
                None => {
                    write_bundle(&out.bundle, &dir).map_err(|e| format!("constrain: {e}"))?;
                    write(&dir.join("constraints.json"), "[]\n")?;
                }
            }
            emit_report(&out, report.as_deref())?;
            Ok(verdict_code(out.report.skill_verdict))
        }
        Command::Batch { dir, out, jobs, run } => {
            let cfg = run.config()?;
            std::fs::create_dir_all(&out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
            let bundles = bundles_under(&dir);
            let next = AtomicUsize::new(0);
            let results: Mutex<Vec<(usize, Result<bool, String>)>> = Mutex::new(Vec::new());
            std::thread::scope(|s| {
                for _ in 0..jobs.max(1).min(bundles.len().max(1)) {
                    s.spawn(|| loop {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        let Some(b) = bundles.get(i) else { break };
                        let name = b.strip_prefix(&dir).unwrap_or(b).to_string_lossy().replace(['/', '\\'], "__");
                        let name = if name.is_empty() { "bundle".to_string() } else { name };
                        let r = run
                            .run(b, &cfg)
                            .and_then(|o| write(&out.join(format!("{name}.json")), &o.report.to_json()).map(|_| o))
                            .map(|o| o.report.skill_verdict);
                        results.lock().expect("results lock").push((i, r));
                    });
                }
            });
            let mut results = results.into_inner().expect("results lock");
            results.sort_by_key(|(i, _)| *i);
            let mut found = false;
            let mut failed = false;
            for (i, r) in results {
                match r {
                    Ok(v) => {
                        found |= v;
                        println!("{}\t{}", bundles[i].display(), if v { "over-privileged" } else { "clean" });
                    }
                    Err(e) => {
                        failed = true;
                        eprintln!("{}\terror: {e}", bundles[i].display());
                    }
                }
            }
            Ok(if failed { ExitCode::FAILURE } else { verdict_code(found) })
        }
        Command::Stats { command: StatsCommand::Stratified { input, z } } => {
            let text = std::fs::read_to_string(&input).map_err(|e| format!("cannot read {}: {e}", input.display()))?;
            let sample: StratifiedSample = if input.extension().is_some_and(|e| e == "toml") {
                toml::from_str(&text).map_err(|e| e.to_string())?
            } else {
                serde_json::from_str(&text).map_err(|e| e.to_string())?
            };
            let est = compute_stratified_validity(&sample, z).map_err(|e| e.to_string())?;
            println!("{}", serde_json::to_string_pretty(&est).expect("estimate serializes"));
            println!("{}", est.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
