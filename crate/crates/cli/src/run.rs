//! Dataset to report: prompts, completions, parsing, canonicalization and
//! scoring.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use optformkit_core::canonical::to_canonical_with_notes;
use optformkit_core::dataset::{
    load_dataset, write_predictions, Dataset, DatasetError, PredictionRecord, ProblemInstance,
};
use optformkit_core::prompt::{build_prompt, build_prompt_parts, PromptKind};
use optformkit_core::scorer::{aggregate, dedupe_rows, match_declarations, ProblemResult, ScoreError};
use optformkit_core::{
    parse_ir_with_reference, render_ir, CanonicalForm, Constraint, Direction, IRModel, LinearExpr, MatchConfig,
    Objective, ParseOutcome, ProblemScore, Relation, ScoreReport,
};
use optformkit_gateway::{
    run_batch, CachedProvider, CompletionRequest, CompletionResponse, GatewayError, HttpProvider, MockProvider,
    Provider, ReplayCache, ReplayOnly,
};
use thiserror::Error;

use crate::config::{ConfigError, MockMode, ProviderKind, RunConfig};
use crate::report::{write_report, ReportFormat};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("dataset has no problems")]
    EmptyRun,
    #[error("provider setup failed: {0}")]
    Provider(GatewayError),
    #[error("mock responses {path}: {message}")]
    MockResponses { path: PathBuf, message: String },
    #[error("prediction for unknown problem id {0:?}")]
    UnknownPrediction(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl From<ScoreError> for RunError {
    fn from(e: ScoreError) -> Self {
        match e {
            ScoreError::EmptyRun => RunError::EmptyRun,
            other => RunError::Config(ConfigError::Invalid(other.to_string())),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// An IR model equivalent to a canonical form: one `<=` constraint per row
/// and a minimize objective, all columns written out.
pub fn canonical_to_ir(form: &CanonicalForm) -> IRModel {
    let expr = |coeffs: &[f64], constant: f64| {
        LinearExpr::new(
            coeffs
                .iter()
                .zip(&form.variable_order)
                .map(|(c, v)| (*c, v.clone()))
                .collect(),
            constant,
        )
    };
    IRModel::new(
        form.variable_order.clone(),
        form.rows
            .iter()
            .map(|r| Constraint::new(expr(&r.coeffs, 0.0), Relation::LE, LinearExpr::constant(r.rhs)))
            .collect(),
        Objective::new(Direction::Minimize, expr(&form.objective, 0.0)),
    )
}

/// The gold formulation as IR text, as a perfect model would answer.
pub fn gold_text(problem: &ProblemInstance) -> String {
    let model = problem
        .gold_ir
        .clone()
        .unwrap_or_else(|| canonical_to_ir(&problem.gold_canonical));
    render_ir(&model).expect("loaded gold is valid")
}

/// The completion request for one problem.
pub fn request_for(problem: &ProblemInstance, config: &RunConfig) -> CompletionRequest {
    let mut req = CompletionRequest::new(config.model_id.clone(), String::new());
    if config.instruction_as_system {
        let (instruction, description) =
            build_prompt_parts(config.prompt_kind, &problem.description, None).expect("description is nonempty");
        req.system = Some(instruction);
        req.prompt = description;
    } else {
        req.prompt = build_prompt(config.prompt_kind, &problem.description, None).expect("description is nonempty");
    }
    req.temperature = config.temperature;
    req.max_tokens = config.max_tokens;
    req
}

fn mock_provider(
    config: &RunConfig,
    dataset: &Dataset,
    requests: &[(String, CompletionRequest)],
) -> Result<MockProvider, RunError> {
    let by_id: HashMap<String, String> = match &config.mock {
        MockMode::Echo => return Ok(MockProvider::echo()),
        MockMode::Oracle => dataset.problems.iter().map(|p| (p.id.clone(), gold_text(p))).collect(),
        MockMode::Responses(path) => {
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            serde_json::from_str(&text).map_err(|e| RunError::MockResponses {
                path: path.clone(),
                message: e.to_string(),
            })?
        }
    };
    let by_prompt: HashMap<String, String> = requests
        .iter()
        .filter_map(|(id, req)| by_id.get(id).map(|t| (req.prompt.clone(), t.clone())))
        .collect();
    Ok(MockProvider::from_map(by_prompt))
}

fn provider_for(
    config: &RunConfig,
    dataset: &Dataset,
    requests: &[(String, CompletionRequest)],
) -> Result<Box<dyn Provider>, RunError> {
    let inner: Box<dyn Provider> = match config.provider {
        ProviderKind::Mock => Box::new(mock_provider(config, dataset, requests)?),
        ProviderKind::Http => Box::new(HttpProvider::new(config.provider_config.clone()).map_err(RunError::Provider)?),
        ProviderKind::Replay => {
            let dir = config.cache_dir.clone().expect("checked by RunConfig::check");
            return Ok(Box::new(ReplayOnly::new(ReplayCache::new(dir))));
        }
    };
    Ok(match &config.cache_dir {
        Some(dir) => Box::new(CachedProvider::new(inner, ReplayCache::new(dir))),
        None => inner,
    })
}

/// Parses a completion (or records the provider failure) for one problem.
pub fn evaluate_completion(
    problem: &ProblemInstance,
    completion: Result<&CompletionResponse, &GatewayError>,
    check_vocabulary: bool,
) -> PredictionRecord {
    match completion {
        Ok(resp) => {
            let reference = check_vocabulary.then(|| problem.gold_variables());
            let outcome = parse_ir_with_reference(&resp.text, reference);
            let (canonical, error) = match &outcome.model {
                Some(m) => match to_canonical_with_notes(m) {
                    Ok((form, _)) => (Some(form), None),
                    Err(e) => (None, Some(e.to_string())),
                },
                None => (None, None),
            };
            PredictionRecord {
                id: problem.id.clone(),
                raw: resp.text.clone(),
                outcome,
                canonical,
                error,
            }
        }
        Err(e) => PredictionRecord {
            id: problem.id.clone(),
            raw: String::new(),
            outcome: ParseOutcome {
                model: None,
                diagnostics: Vec::new(),
                consumed: 0,
            },
            canonical: None,
            error: Some(e.to_string()),
        },
    }
}

/// Scores stored predictions against a dataset. Problems without a
/// prediction score zero.
pub fn score_predictions(
    dataset: &Dataset,
    records: &[PredictionRecord],
    cfg: &MatchConfig,
) -> Result<ScoreReport, RunError> {
    cfg.check()?;
    let known: HashSet<&str> = dataset.problems.iter().map(|p| p.id.as_str()).collect();
    if let Some(r) = records.iter().find(|r| !known.contains(r.id.as_str())) {
        return Err(RunError::UnknownPrediction(r.id.clone()));
    }
    let by_id: HashMap<&str, &PredictionRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    let results: Vec<ProblemResult> = dataset
        .problems
        .iter()
        .map(|p| {
            let gold = &p.gold_canonical;
            let Some(rec) = by_id.get(p.id.as_str()) else {
                return ProblemResult {
                    id: p.id.clone(),
                    score: ProblemScore::failed(dedupe_rows(&gold.rows).len() + 1),
                    parse_failed: true,
                    diagnostics: Vec::new(),
                };
            };
            let mut diagnostics = rec.outcome.diagnostics.clone();
            let score = match &rec.canonical {
                Some(form) => {
                    if let Some(Ok((_, notes))) = rec.outcome.model.as_ref().map(to_canonical_with_notes) {
                        diagnostics.extend(notes);
                    }
                    let counts = match_declarations(form, gold, cfg);
                    diagnostics.extend(counts.notes);
                    ProblemScore::from_counts(counts.matched, counts.pred_count, counts.gold_count)
                }
                None => optformkit_core::scorer::score_problem(None, gold, cfg),
            };
            ProblemResult {
                id: p.id.clone(),
                score,
                parse_failed: rec.canonical.is_none(),
                diagnostics,
            }
        })
        .collect();
    Ok(aggregate(&results)?)
}

fn settings(config: &RunConfig, dataset: &Dataset) -> BTreeMap<String, String> {
    let m = &config.match_config;
    [
        ("split", dataset.split_name.clone()),
        ("provider", config.provider.to_string()),
        ("model_id", config.model_id.clone()),
        ("prompt_kind", config.prompt_kind.to_string()),
        ("temperature", config.temperature.to_string()),
        ("max_tokens", config.max_tokens.to_string()),
        (
            "instruction_delivery",
            if config.instruction_as_system {
                "system"
            } else {
                "inline"
            }
            .to_string(),
        ),
        ("check_vocabulary", config.check_vocabulary.to_string()),
        ("tolerance", m.tolerance.to_string()),
        ("scale_normalize", m.scale_normalize.to_string()),
        ("dedupe_predictions", m.dedupe_predictions.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

pub fn k_shot_label(kind: PromptKind) -> String {
    kind.k_shot().map_or_else(|| "-".to_string(), |k| k.to_string())
}

/// Everything a run produced.
#[derive(Debug)]
pub struct RunOutput {
    pub report: ScoreReport,
    pub predictions: Vec<PredictionRecord>,
}

/// Runs an evaluation in memory without writing any files.
pub fn evaluate(config: &RunConfig) -> Result<RunOutput, RunError> {
    config.check()?;
    let dataset = load_dataset(&config.dataset_path)?;
    if dataset.is_empty() {
        return Err(RunError::EmptyRun);
    }
    let requests: Vec<(String, CompletionRequest)> = dataset
        .problems
        .iter()
        .map(|p| (p.id.clone(), request_for(p, config)))
        .collect();
    let provider = provider_for(config, &dataset, &requests)?;
    let completions = run_batch(&requests, &provider, config.provider_config.max_in_flight);
    let predictions: Vec<PredictionRecord> = dataset
        .problems
        .iter()
        .zip(&completions)
        .map(|(p, (_, result))| evaluate_completion(p, result.as_ref(), config.check_vocabulary))
        .collect();
    let mut report = score_predictions(&dataset, &predictions, &config.match_config)?;
    report.meta.model = config.label().to_string();
    report.meta.k_shot = k_shot_label(config.prompt_kind);
    report.meta.settings = settings(config, &dataset);
    Ok(RunOutput { report, predictions })
}

/// Runs an evaluation and writes `predictions.jsonl`, `report.json`,
/// `report.md` and `report.csv` under the output directory.
pub fn run_eval(config: &RunConfig) -> Result<ScoreReport, RunError> {
    let out = evaluate(config)?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let preds = dir.join("predictions.jsonl");
    write_predictions(&preds, &out.predictions).map_err(|e| match e {
        DatasetError::Io(source) => RunError::Io {
            path: preds.clone(),
            source,
        },
        other => RunError::Dataset(other),
    })?;
    for (name, format) in [
        ("report.json", ReportFormat::Json),
        ("report.md", ReportFormat::Markdown),
        ("report.csv", ReportFormat::Csv),
    ] {
        let path = dir.join(name);
        write_report(&out.report, format, &path).map_err(io_err(&path))?;
    }
    Ok(out.report)
}
