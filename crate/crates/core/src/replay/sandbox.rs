//! Per-run directory with a workspace, an outbox and a trace file.

use std::fs;
use std::io::Write;
use std::path::{Component, Path, PathBuf};

use serde_json::json;
use tempfile::TempDir;

use super::ReplayError;
use crate::oracle::{ExecutionTrace, TraceStep};
use crate::tasks::Fixture;

#[derive(Debug)]
pub struct Sandbox {
    root: PathBuf,
    _tmp: Option<TempDir>,
}

impl Sandbox {
    /// Fresh sandbox in a temporary directory removed on drop.
    pub fn temp() -> Result<Self, ReplayError> {
        let tmp = tempfile::Builder::new().prefix("skillpriv-run-").tempdir()?;
        let root = tmp.path().to_path_buf();
        let s = Sandbox { root, _tmp: Some(tmp) };
        fs::create_dir_all(s.workspace())?;
        Ok(s)
    }

    /// Sandbox rooted at an existing or new directory that is kept.
    pub fn at(root: &Path) -> Result<Self, ReplayError> {
        fs::create_dir_all(root.join("workspace"))?;
        Ok(Sandbox { root: root.to_path_buf(), _tmp: None })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn workspace(&self) -> PathBuf {
        self.root.join("workspace")
    }

    pub fn outbox(&self) -> PathBuf {
        self.root.join("outbox.jsonl")
    }

    pub fn trace_file(&self) -> PathBuf {
        self.root.join("trace.jsonl")
    }

    pub fn materialize(&self, fixture: &Fixture) -> Result<(), ReplayError> {
        for f in &fixture.files {
            let p = self.map_path(&f.path)?;
            if let Some(parent) = p.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(p, &f.bytes)?;
        }
        Ok(())
    }

    /// Maps a path named by the skill into the workspace: `~` lands under
    /// `home/`, absolute paths under `root/`. Escaping with `..` is refused.
    pub fn map_path(&self, raw: &str) -> Result<PathBuf, ReplayError> {
        let raw = raw.trim_matches(|c| c == '"' || c == '\'');
        let (base, rest) = if let Some(r) = raw.strip_prefix("~/").or(raw.strip_prefix("$HOME/")) {
            ("home", r)
        } else if raw == "~" {
            ("home", "")
        } else if let Some(r) = raw.strip_prefix('/') {
            ("root", r)
        } else {
            ("", raw)
        };
        let mut out = self.workspace();
        if !base.is_empty() {
            out.push(base);
        }
        for c in Path::new(rest).components() {
            match c {
                Component::Normal(part) => out.push(part),
                Component::CurDir => {}
                _ => return Err(ReplayError::SandboxViolation(raw.to_string())),
            }
        }
        Ok(out)
    }

    pub fn append_outbox(&self, destination: &str, obj: &str, value: &str) -> Result<(), ReplayError> {
        let mut f = fs::OpenOptions::new().create(true).append(true).open(self.outbox())?;
        writeln!(f, "{}", json!({ "destination": destination, "obj": obj, "value": value }))?;
        Ok(())
    }

    pub fn write_trace(&self, trace: &ExecutionTrace) -> Result<(), ReplayError> {
        let mut out = String::new();
        for s in &trace.steps {
            out.push_str(&trace_line(s));
            out.push('\n');
        }
        fs::write(self.trace_file(), out)?;
        Ok(())
    }
}

/// One `trace.jsonl` line: `{tick, op, obj, args, node}`.
pub fn trace_line(s: &TraceStep) -> String {
    json!({ "tick": s.tick, "op": s.op, "obj": s.obj, "args": s.args, "node": s.node }).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_stay_inside() {
        let s = Sandbox::temp().unwrap();
        let ws = s.workspace();
        assert_eq!(s.map_path("~/.ssh/id_rsa").unwrap(), ws.join("home/.ssh/id_rsa"));
        assert_eq!(s.map_path("/etc/passwd").unwrap(), ws.join("root/etc/passwd"));
        assert_eq!(s.map_path("./out/a.csv").unwrap(), ws.join("out/a.csv"));
        assert!(matches!(s.map_path("../../x"), Err(ReplayError::SandboxViolation(_))));
        assert!(matches!(s.map_path("/a/../../x"), Err(ReplayError::SandboxViolation(_))));
    }
}
