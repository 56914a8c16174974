//! Settings shared by every command: a TOML file, overridden by flags.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use servdial_core::dataset::{QcConfig, DEFAULT_COPY_THRESHOLD};
use servdial_core::gateway::{FixtureStore, IntentRules, DEFAULT_CAP};
use servdial_core::generation::adapter::AdapterGenerator;
use servdial_core::generation::{GenerationOptions, GeneratorBinding};
use servdial_core::Gateway;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    /// Directory with replacement fixture files; shipped fixtures otherwise.
    pub fixtures: Option<PathBuf>,
    /// Model adapter endpoint; the rule-based baseline otherwise.
    pub adapter_url: Option<String>,
    pub cap: usize,
    pub copy_threshold: f64,
    pub seed: u64,
    /// Serialize the USER's topic into generator prompts.
    pub include_topic: bool,
    /// Event log used by `serve`.
    pub log: PathBuf,
    pub bind: String,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            fixtures: None,
            adapter_url: None,
            cap: DEFAULT_CAP,
            copy_threshold: DEFAULT_COPY_THRESHOLD,
            seed: 0,
            include_topic: false,
            log: PathBuf::from("sessions.events.jsonl"),
            bind: "127.0.0.1:8080".into(),
        }
    }
}

/// Flag values that win over the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// TOML config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Fixture directory (weather.tsv, stocks.tsv, poi.tsv, translations.tsv, locations.tsv, corpus.jsonl, intent_rules.tsv)
    #[arg(long, global = true)]
    pub fixtures: Option<PathBuf>,
    /// Model adapter endpoint URL [default: rule-based baseline]
    #[arg(long, global = true)]
    pub adapter_url: Option<String>,
    /// Knowledge condensation cap in characters [default: 400]
    #[arg(long, global = true)]
    pub cap: Option<usize>,
    /// Reply/knowledge character F1 at which a reply counts as copying [default: 0.8]
    #[arg(long, global = true)]
    pub copy_threshold: Option<f64>,
    /// Random seed [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

impl CliConfig {
    pub fn resolve(o: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match &o.config {
            Some(path) => {
                let src =
                    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                toml::from_str(&src).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => CliConfig::default(),
        };
        if let Some(v) = &o.fixtures {
            cfg.fixtures = Some(v.clone());
        }
        if let Some(v) = &o.adapter_url {
            cfg.adapter_url = Some(v.clone());
        }
        if let Some(v) = o.cap {
            cfg.cap = v;
        }
        if let Some(v) = o.copy_threshold {
            cfg.copy_threshold = v;
        }
        if let Some(v) = o.seed {
            cfg.seed = v;
        }
        if cfg.cap == 0 {
            return Err(CliError::Usage("cap must be positive".into()));
        }
        if !(0.0..=1.0).contains(&cfg.copy_threshold) {
            return Err(CliError::Usage("copy threshold must lie in [0, 1]".into()));
        }
        if let Some(dir) = &cfg.fixtures {
            if !dir.is_dir() {
                return Err(CliError::Io(format!("fixture directory {} does not exist", dir.display())));
            }
        }
        Ok(cfg)
    }

    pub fn gateway(&self) -> Result<Gateway, CliError> {
        let fixture_err = |e: servdial_core::gateway::FixtureError| CliError::Io(e.to_string());
        let (store, rules) = match &self.fixtures {
            None => (FixtureStore::builtin(), IntentRules::builtin()),
            Some(dir) => {
                let rules = match read_optional(&dir.join("intent_rules.tsv"))? {
                    Some(src) => IntentRules::parse(&src).map_err(fixture_err)?,
                    None => IntentRules::builtin(),
                };
                (FixtureStore::load_dir(dir).map_err(fixture_err)?, rules)
            }
        };
        Ok(Gateway::new(store, rules).with_cap(self.cap))
    }

    pub fn binding(&self) -> GeneratorBinding {
        match &self.adapter_url {
            Some(url) => GeneratorBinding::adapter(AdapterGenerator::new(url.clone())),
            None => GeneratorBinding::baseline(),
        }
    }

    pub fn qc(&self) -> QcConfig {
        QcConfig::default().with_copy_threshold(self.copy_threshold)
    }

    pub fn generation(&self) -> GenerationOptions {
        GenerationOptions { include_topic: self.include_topic, want_logprobs: false }
    }

    pub fn shared_gateway(&self) -> Result<Arc<Gateway>, CliError> {
        self.gateway().map(Arc::new)
    }
}

fn read_optional(path: &Path) -> Result<Option<String>, CliError> {
    match std::fs::read_to_string(path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(CliError::Io(format!("{}: {e}", path.display()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "cap = 300\nseed = 9\ncopy_threshold = 0.7\n").unwrap();
        let o = Overrides { config: Some(path), cap: Some(200), ..Default::default() };
        let cfg = CliConfig::resolve(&o).unwrap();
        assert_eq!((cfg.cap, cfg.seed, cfg.copy_threshold), (200, 9, 0.7));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(
            CliConfig::resolve(&Overrides { cap: Some(0), ..Default::default() }),
            Err(CliError::Usage(_))
        ));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "nonsense = 1\n").unwrap();
        assert!(matches!(
            CliConfig::resolve(&Overrides { config: Some(path), ..Default::default() }),
            Err(CliError::Usage(_))
        ));
    }
}
