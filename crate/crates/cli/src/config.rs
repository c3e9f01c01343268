//! Service configuration: file paths, LLM endpoint settings, default mode
//! and trial budget. Relative paths resolve against the config file's
//! directory; referenced files are validated eagerly at load time.

use serde::Deserialize;
use sqlbridge_core::engine::TranslationMode;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize, Default)]
pub struct LlmSettings {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
    /// Fixture file for the deterministic mock client, used when no
    /// endpoint is configured.
    pub mock_fixture: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Config {
    pub grammars_dir: PathBuf,
    pub kb_path: PathBuf,
    pub rules_path: PathBuf,
    pub error_patterns_path: PathBuf,
    /// Embedding model weights; required for hybrid mode.
    pub weights_path: Option<PathBuf>,
    pub history_path: PathBuf,
    #[serde(default = "default_mode")]
    pub default_mode: TranslationMode,
    #[serde(default = "default_max_trials")]
    pub max_trials: u32,
    #[serde(default)]
    pub llm: LlmSettings,
}

fn default_mode() -> TranslationMode {
    TranslationMode::RulePlusLlm
}

fn default_max_trials() -> u32 {
    3
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path} is not valid JSON: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("configured {what} does not exist: {path}")]
    Missing { what: &'static str, path: PathBuf },
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: Config =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve(base);
        config.apply_env();
        config.validate()?;
        Ok(config)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        fix(&mut self.grammars_dir);
        fix(&mut self.kb_path);
        fix(&mut self.rules_path);
        fix(&mut self.error_patterns_path);
        if let Some(w) = &mut self.weights_path {
            fix(w);
        }
        fix(&mut self.history_path);
        if let Some(f) = &mut self.llm.mock_fixture {
            fix(f);
        }
    }

    /// LLM_ENDPOINT, LLM_MODEL and LLM_API_KEY override the config file.
    fn apply_env(&mut self) {
        if let Ok(v) = std::env::var("LLM_ENDPOINT") {
            if !v.is_empty() {
                self.llm.endpoint = Some(v);
            }
        }
        if let Ok(v) = std::env::var("LLM_MODEL") {
            if !v.is_empty() {
                self.llm.model = Some(v);
            }
        }
        if let Ok(v) = std::env::var("LLM_API_KEY") {
            if !v.is_empty() {
                self.llm.api_key = Some(v);
            }
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let checks: [(&'static str, &Path); 4] = [
            ("grammars_dir", &self.grammars_dir),
            ("kb_path", &self.kb_path),
            ("rules_path", &self.rules_path),
            ("error_patterns_path", &self.error_patterns_path),
        ];
        for (what, p) in checks {
            if !p.exists() {
                return Err(ConfigError::Missing { what, path: p.to_path_buf() });
            }
        }
        if let Some(w) = &self.weights_path {
            if !w.exists() {
                return Err(ConfigError::Missing { what: "weights_path", path: w.clone() });
            }
        }
        if let Some(f) = &self.llm.mock_fixture {
            if !f.exists() {
                return Err(ConfigError::Missing { what: "llm.mock_fixture", path: f.clone() });
            }
        }
        if let Some(parent) = self.history_path.parent() {
            if !parent.as_os_str().is_empty() && !parent.exists() {
                return Err(ConfigError::Missing {
                    what: "history_path directory",
                    path: parent.to_path_buf(),
                });
            }
        }
        Ok(())
    }
}
