//! Evaluation harness: runs a dataset through a completion provider, scores
//! the parsed formulations and writes reports. Also hosts the carbon
//! estimator and the fine-tuning manifest emitter.

pub mod carbon;
pub mod config;
pub mod manifest;
pub mod report;
pub mod run;

pub use carbon::{estimate_carbon, CarbonParams, InvalidParams};
pub use config::{ConfigError, MockMode, ProviderKind, RunConfig};
pub use manifest::{build_manifest, emit_finetune_manifest, FinetuneManifest, ManifestError};
pub use report::{render, write_report, ReportFormat};
pub use run::{evaluate, run_eval, score_predictions, RunError, RunOutput};
