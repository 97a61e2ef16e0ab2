use std::path::{Path, PathBuf};

use optformkit_core::prompt::PromptKind;
use optformkit_core::MatchConfig;
use optformkit_gateway::ProviderConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config {path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Http,
    Mock,
    Replay,
}

impl std::fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProviderKind::Http => "http",
            ProviderKind::Mock => "mock",
            ProviderKind::Replay => "replay",
        })
    }
}

/// What the mock provider answers with.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MockMode {
    /// The problem's gold formulation rendered as IR text.
    Oracle,
    /// The prompt itself.
    Echo,
    /// Canned completions from a JSON object mapping problem id to text.
    Responses(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_path: PathBuf,
    pub prompt_kind: PromptKind,
    pub provider: ProviderKind,
    pub provider_config: ProviderConfig,
    pub match_config: MatchConfig,
    pub output_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub model_id: String,
    /// Name shown in the report's model column; defaults to `model_id`.
    pub label: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Send the instruction as a system message instead of prefixing it to
    /// the user prompt.
    pub instruction_as_system: bool,
    /// Flag names outside the gold vocabulary as unknown variables.
    pub check_vocabulary: bool,
    pub mock: MockMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_path: PathBuf::new(),
            prompt_kind: PromptKind::ZeroShot,
            provider: ProviderKind::Mock,
            provider_config: ProviderConfig::default(),
            match_config: MatchConfig::default(),
            output_dir: PathBuf::from("out"),
            cache_dir: None,
            model_id: "mock".into(),
            label: None,
            temperature: 0.0,
            max_tokens: optformkit_gateway::DEFAULT_MAX_TOKENS,
            instruction_as_system: false,
            check_vocabulary: false,
            mock: MockMode::Oracle,
        }
    }
}

impl RunConfig {
    /// Reads a config file: TOML when the extension is `.toml`, JSON otherwise.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let syntax = |message: String| ConfigError::Syntax {
            path: path.to_path_buf(),
            message,
        };
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml")) {
            toml::from_str(&text).map_err(|e| syntax(e.to_string()))
        } else {
            serde_json::from_str(&text).map_err(|e| syntax(e.to_string()))
        }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.dataset_path.as_os_str().is_empty() {
            return invalid("dataset_path is not set".into());
        }
        if self.prompt_kind == PromptKind::FineTune {
            return invalid("evaluation runs take zero- or one-shot prompts; finetune prompts are export-only".into());
        }
        if self.model_id.trim().is_empty() {
            return invalid("model_id is empty".into());
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return invalid(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if self.max_tokens == 0 {
            return invalid("max_tokens must be positive".into());
        }
        if self.provider == ProviderKind::Replay && self.cache_dir.is_none() {
            return invalid("the replay provider needs cache_dir".into());
        }
        self.match_config
            .check()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.provider_config
            .check()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.model_id)
    }
}
