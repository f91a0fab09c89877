//! Minimal hermetic resources that let a generated task actually run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lexicon::{self, ResourceClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    None,
    File,
    Repo,
    Document,
    Image,
    ConfigApi,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureFile {
    pub path: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub kind: FixtureKind,
    pub files: Vec<FixtureFile>,
    /// Commands a real harness would run to finish the setup; recorded only.
    pub setup_commands: Vec<String>,
}

impl Fixture {
    pub fn none() -> Self {
        Fixture { kind: FixtureKind::None, files: Vec::new(), setup_commands: Vec::new() }
    }

    /// Relative paths only, and no endpoint outside the mock network.
    pub fn is_hermetic(&self) -> bool {
        let paths_ok = self.files.iter().all(|f| {
            !f.path.starts_with('/') && !f.path.starts_with('~') && !f.path.split('/').any(|c| c == "..")
        });
        let hosts_ok = self.files.iter().all(|f| {
            let text = String::from_utf8_lossy(&f.bytes);
            lexicon::words(&text)
                .iter()
                .filter(|w| lexicon::is_url(&w.text))
                .all(|w| lexicon::url_host(&w.text).is_some_and(|h| lexicon::is_mock_host(&h)))
        });
        paths_ok && hosts_ok
    }
}

/// Resource need of a chain as decided from its terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResourceNeed {
    Kind(FixtureKind),
    Unsupported(String),
}

/// Picks the fixture kind for a set of object terms. Precedence:
/// repo, file, document, image, config/API.
pub fn resource_need(terms: &[String]) -> ResourceNeed {
    let mut classes = Vec::new();
    for t in terms {
        let parts = std::iter::once(t.to_ascii_lowercase()).chain(lexicon::split_compound(t));
        for p in parts {
            match lexicon::resource_class(&p) {
                Some(ResourceClass::Unsupported) => return ResourceNeed::Unsupported(p),
                Some(c) => classes.push(c),
                None => {}
            }
        }
    }
    for (class, kind) in [
        (ResourceClass::Repo, FixtureKind::Repo),
        (ResourceClass::File, FixtureKind::File),
        (ResourceClass::Document, FixtureKind::Document),
        (ResourceClass::Image, FixtureKind::Image),
        (ResourceClass::ConfigApi, FixtureKind::ConfigApi),
    ] {
        if classes.contains(&class) {
            return ResourceNeed::Kind(kind);
        }
    }
    ResourceNeed::Kind(FixtureKind::None)
}

pub trait FixtureProvider: Send + Sync {
    fn provide(&self, kind: FixtureKind, terms: &[String], seed: u64) -> Fixture;
}

/// Built-in provider: everything is generated in memory.
#[derive(Debug, Clone, Copy, Default)]
pub struct LocalFixtures;

/// 1x1 transparent PNG.
pub const PLACEHOLDER_PNG: &[u8] = &[
    0x89, 0x50, 0x4E, 0x47, 0x0D, 0x0A, 0x1A, 0x0A, 0x00, 0x00, 0x00, 0x0D, 0x49, 0x48, 0x44, 0x52, 0x00,
    0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x06, 0x00, 0x00, 0x00, 0x1F, 0x15, 0xC4, 0x89, 0x00,
    0x00, 0x00, 0x0D, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9C, 0x63, 0x00, 0x01, 0x00, 0x00, 0x05, 0x00, 0x01,
    0x0D, 0x0A, 0x2D, 0xB4, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4E, 0x44, 0xAE, 0x42, 0x60, 0x82,
];

fn file_name(terms: &[String], exts: &[&str], fallback: &str) -> String {
    terms
        .iter()
        .filter(|t| !lexicon::is_outside_workspace(t))
        .find(|t| exts.iter().any(|e| t.to_ascii_lowercase().ends_with(e)))
        .map(|t| t.trim_start_matches("./").to_string())
        .unwrap_or_else(|| fallback.to_string())
}

fn header_fields(terms: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for t in terms {
        for p in lexicon::split_compound(t) {
            let p = p.trim_end_matches(".csv").to_string();
            if p.len() > 1 && !lexicon::is_stopword(&p) && !matches!(p.as_str(), "csv" | "json" | "txt" | "file" | "files") && !out.contains(&p) {
                out.push(p);
            }
        }
    }
    if out.is_empty() {
        out.push("value".into());
    }
    out
}

impl FixtureProvider for LocalFixtures {
    fn provide(&self, kind: FixtureKind, terms: &[String], seed: u64) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let file = |path: &str, bytes: Vec<u8>| FixtureFile { path: path.to_string(), bytes };
        let (files, setup_commands) = match kind {
            FixtureKind::None => (Vec::new(), Vec::new()),
            FixtureKind::File => {
                let name = file_name(terms, &[".csv", ".json", ".txt", ".log", ".jsonl"], "data.csv");
                let fields = header_fields(terms);
                let bytes = if name.ends_with(".json") {
                    let rows: Vec<serde_json::Value> = (1..=3)
                        .map(|i| {
                            let mut m = serde_json::Map::new();
                            m.insert("id".into(), i.into());
                            for f in &fields {
                                m.insert(f.clone(), rng.gen_range(1..100).into());
                            }
                            serde_json::Value::Object(m)
                        })
                        .collect();
                    serde_json::to_vec_pretty(&rows).expect("json")
                } else {
                    let mut s = format!("id,{}\n", fields.join(","));
                    for i in 1..=3 {
                        let vals: Vec<String> = fields.iter().map(|_| rng.gen_range(1..100).to_string()).collect();
                        s.push_str(&format!("{i},{}\n", vals.join(",")));
                    }
                    s.into_bytes()
                };
                (vec![file(&name, bytes)], Vec::new())
            }
            FixtureKind::Repo => {
                let authors = ["ada", "lin", "sam"];
                let mut log = String::new();
                for (i, a) in authors.iter().enumerate() {
                    let hash: u32 = rng.gen();
                    log.push_str(&format!("{hash:08x} {a} commit {} updates app\n", i + 1));
                }
                (
                    vec![
                        file("repo/README.md", b"# Toy repository\n\nA tiny fixture project.\n".to_vec()),
                        file("repo/src/app.py", b"def main():\n    return 1\n".to_vec()),
                        file("repo/commits.log", log.into_bytes()),
                    ],
                    vec![
                        "git init repo".to_string(),
                        "git -C repo add .".to_string(),
                        "git -C repo commit -m 'initial commit'".to_string(),
                    ],
                )
            }
            FixtureKind::Document => {
                let name = file_name(terms, &[".md", ".txt", ".docx", ".pdf"], "notes.md");
                let n: u8 = rng.gen_range(2..5);
                let mut body = String::from("# Notes\n\n");
                for i in 0..n {
                    body.push_str(&format!("- item {}\n", i + 1));
                }
                (vec![file(&name, body.into_bytes())], Vec::new())
            }
            FixtureKind::Image => {
                let name = file_name(terms, &[".png"], "image.png");
                (vec![file(&name, PLACEHOLDER_PNG.to_vec())], Vec::new())
            }
            FixtureKind::ConfigApi => {
                let cfg = serde_json::json!({ "endpoint": "http://mock.local/api", "token": "mock-token" });
                (vec![file("config.json", serde_json::to_vec_pretty(&cfg).expect("json"))], Vec::new())
            }
        };
        Fixture { kind, files, setup_commands }
    }
}
