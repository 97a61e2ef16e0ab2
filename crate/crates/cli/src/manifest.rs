//! Hyperparameter manifest for an external fine-tuning stack.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("unknown manifest field {0:?}")]
    UnknownField(String),
    #[error("invalid value {value:?} for {field}: {reason}")]
    InvalidValue {
        field: String,
        value: String,
        reason: String,
    },
    #[error("override {0:?} is not of the form key=value")]
    MalformedOverride(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneManifest {
    pub epochs: u32,
    pub batch_size: u32,
    pub gradient_accumulation: u32,
    pub optimizer: String,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub neftune_noise_alpha: f64,
    pub max_response_length: u32,
    pub gradient_checkpointing: bool,
    /// Fine-tuning corpora in training order.
    pub stages: Vec<String>,
}

impl Default for FinetuneManifest {
    fn default() -> Self {
        Self {
            epochs: 7,
            batch_size: 4,
            gradient_accumulation: 1,
            optimizer: "AdamW".into(),
            learning_rate: 3e-4,
            weight_decay: 0.001,
            neftune_noise_alpha: 5.0,
            max_response_length: 200,
            gradient_checkpointing: true,
            stages: vec!["GSM8K".into(), "NL4Opt".into()],
        }
    }
}

fn parse<T: std::str::FromStr>(field: &str, value: &str) -> Result<T, ManifestError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| ManifestError::InvalidValue {
        field: field.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

impl FinetuneManifest {
    /// Applies one `field=value` override. `stages` takes a comma-separated
    /// list.
    pub fn apply(&mut self, field: &str, value: &str) -> Result<(), ManifestError> {
        match field.trim() {
            "epochs" => self.epochs = parse(field, value)?,
            "batch_size" => self.batch_size = parse(field, value)?,
            "gradient_accumulation" => self.gradient_accumulation = parse(field, value)?,
            "optimizer" => self.optimizer = value.trim().to_string(),
            "learning_rate" => self.learning_rate = parse(field, value)?,
            "weight_decay" => self.weight_decay = parse(field, value)?,
            "neftune_noise_alpha" => self.neftune_noise_alpha = parse(field, value)?,
            "max_response_length" => self.max_response_length = parse(field, value)?,
            "gradient_checkpointing" => self.gradient_checkpointing = parse(field, value)?,
            "stages" => {
                self.stages = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            other => return Err(ManifestError::UnknownField(other.to_string())),
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// The default manifest with `overrides` (`field=value` strings) applied.
pub fn build_manifest<S: AsRef<str>>(overrides: &[S]) -> Result<FinetuneManifest, ManifestError> {
    let mut m = FinetuneManifest::default();
    for o in overrides {
        let o = o.as_ref();
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| ManifestError::MalformedOverride(o.to_string()))?;
        m.apply(k, v)?;
    }
    Ok(m)
}

/// Writes the manifest as pretty JSON to `path` and returns it.
pub fn emit_finetune_manifest<S: AsRef<str>>(overrides: &[S], path: &Path) -> Result<FinetuneManifest, ManifestError> {
    let m = build_manifest(overrides)?;
    std::fs::write(path, m.to_json())?;
    Ok(m)
}
