//! Run configuration, read from TOML or JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidates::DEFAULT_RADIUS;
use crate::tasks::ChainLimits;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// `rule`, `remote`, or `transcript:<file>`.
    pub oracle: String,
    pub seed: u64,
    pub max_chains: usize,
    pub max_depth: usize,
    pub context_radius: usize,
    pub summary_budget: usize,
    pub order_sensitive: bool,
    pub out_eq_threshold: f64,
    pub constrain: bool,
    /// Prompts replayed against every candidate in addition to generated ones.
    pub extra_prompts: Vec<String>,
}

impl Default for Config {
    fn default() -> Self {
        let limits = ChainLimits::default();
        Config {
            oracle: "rule".into(),
            seed: 0,
            max_chains: limits.max_chains,
            max_depth: limits.max_depth,
            context_radius: DEFAULT_RADIUS,
            summary_budget: crate::bundle::DEFAULT_SUMMARY_BUDGET,
            order_sensitive: true,
            out_eq_threshold: 0.8,
            constrain: false,
            extra_prompts: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {0}: {1}")]
    Io(String, std::io::Error),
    #[error("invalid TOML config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid JSON config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl Config {
    pub fn limits(&self) -> ChainLimits {
        ChainLimits { max_chains: self.max_chains, max_depth: self.max_depth }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.display().to_string(), e))?;
        let cfg: Config = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_chains == 0 || self.max_depth == 0 {
            return Err(ConfigError::Invalid("max_chains and max_depth must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.out_eq_threshold) {
            return Err(ConfigError::Invalid("out_eq_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("c.toml");
        std::fs::write(&t, "seed = 7\nmax_chains = 5\nextra_prompts = [\"Show my heatmap.\"]\n").unwrap();
        let j = dir.path().join("c.json");
        std::fs::write(&j, r#"{"seed": 7, "max_chains": 5, "extra_prompts": ["Show my heatmap."]}"#).unwrap();
        let a = Config::load(&t).unwrap();
        assert_eq!(a, Config::load(&j).unwrap());
        assert_eq!(a.max_depth, 128);
        std::fs::write(&t, "bogus = 1\n").unwrap();
        assert!(Config::load(&t).is_err());
    }
}
