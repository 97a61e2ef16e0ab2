use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use optformkit::report::render;
use optformkit::run::RunError;
use optformkit::{
    build_manifest, estimate_carbon, run_eval, score_predictions, CarbonParams, ManifestError, MockMode, ProviderKind,
    ReportFormat, RunConfig,
};
use optformkit_core::dataset::{load_dataset, load_predictions};
use optformkit_core::prompt::{build_prompt, PromptKind};
use optformkit_core::{parse_ir, parse_ir_with_reference, to_canonical, IRModel, Identifier, MatchConfig};

#[derive(Parser)]
#[command(
    name = "optformkit",
    version,
    about = "Evaluate LP formulations produced from natural-language problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse IR text and print the outcome (model and diagnostics) as JSON.
    Parse {
        /// Input file; standard input when omitted or `-`.
        input: Option<PathBuf>,
        /// Comma-separated variable names; other names are flagged.
        #[arg(long, value_delimiter = ',')]
        reference: Vec<String>,
    },
    /// Convert an IR model (JSON, or IR text with --text) to canonical form.
    Canon {
        input: Option<PathBuf>,
        #[arg(long)]
        text: bool,
    },
    /// Score a predictions file against a dataset.
    Score {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[command(flatten)]
        matching: MatchArgs,
        #[arg(long, default_value = "json")]
        format: ReportFormat,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write one prompt per problem as JSONL records {id, prompt}.
    Prompt {
        #[arg(long)]
        kind: PromptKind,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a full evaluation.
    Run(RunArgs),
    /// Estimate fine-tuning emissions in grams of CO2.
    Carbon {
        #[arg(long, allow_negative_numbers = true)]
        runtime_h: f64,
        #[arg(long, allow_negative_numbers = true)]
        power_kw: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
        usage_factor: f64,
        #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
        pue: f64,
        #[arg(long, allow_negative_numbers = true)]
        carbon_intensity: f64,
    },
    /// Emit the fine-tuning hyperparameter manifest as JSON.
    FtConfig {
        /// Override a field, e.g. `--set epochs=1`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    scale_normalize: bool,
    #[arg(long)]
    no_dedupe: bool,
}

impl MatchArgs {
    fn apply(&self, cfg: &mut MatchConfig) {
        if let Some(t) = self.tolerance {
            cfg.tolerance = t;
        }
        if self.scale_normalize {
            cfg.scale_normalize = true;
        }
        if self.no_dedupe {
            cfg.dedupe_predictions = false;
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON or TOML run config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// `zero` or `one`.
    #[arg(long)]
    kind: Option<PromptKind>,
    /// `mock` (default), `http` or `replay`.
    #[arg(long, value_parser = parse_provider)]
    provider: Option<ProviderKind>,
    #[arg(long)]
    model: Option<String>,
    /// Model column in the reports; defaults to the model id.
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Record completions here and replay them on later runs.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    base_url: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    api_key_env: Option<String>,
    #[arg(long)]
    max_in_flight: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_tokens: Option<u32>,
    /// Canned mock completions: JSON object mapping problem id to text.
    #[arg(long)]
    mock_responses: Option<PathBuf>,
    #[arg(long)]
    mock_echo: bool,
    /// Send the instruction as a system message.
    #[arg(long)]
    system_instruction: bool,
    /// Flag names outside the gold vocabulary as unknown variables.
    #[arg(long)]
    check_vocabulary: bool,
    #[command(flatten)]
    matching: MatchArgs,
}

fn parse_provider(s: &str) -> Result<ProviderKind, String> {
    match s {
        "http" => Ok(ProviderKind::Http),
        "mock" => Ok(ProviderKind::Mock),
        "replay" => Ok(ProviderKind::Replay),
        _ => Err(format!("unknown provider {s:?} (expected http, mock or replay)")),
    }
}

enum Failure {
    Usage(String),
    Run(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Run(e.to_string())
    }
}

fn read_input(input: Option<&Path>) -> Result<String, Failure> {
    match input {
        Some(p) if p != Path::new("-") => {
            std::fs::read_to_string(p).map_err(|e| Failure::Run(format!("{}: {e}", p.display())))
        }
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Run(format!("{}: {e}", p.display()))),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn json_line<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn run_config(args: RunArgs) -> Result<RunConfig, Failure> {
    let mut c = match &args.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(v) = args.dataset {
        c.dataset_path = v;
    }
    if let Some(v) = args.kind {
        c.prompt_kind = v;
    }
    if let Some(v) = args.provider {
        c.provider = v;
    }
    if let Some(v) = args.model {
        c.model_id = v;
    }
    if args.label.is_some() {
        c.label = args.label;
    }
    if let Some(v) = args.output_dir {
        c.output_dir = v;
    }
    if args.cache_dir.is_some() {
        c.cache_dir = args.cache_dir;
    }
    if let Some(v) = args.base_url {
        c.provider_config.base_url = v;
    }
    if let Some(v) = args.api_key_env {
        c.provider_config.api_key_env = v;
    }
    if let Some(v) = args.max_in_flight {
        c.provider_config.max_in_flight = v;
    }
    if let Some(v) = args.temperature {
        c.temperature = v;
    }
    if let Some(v) = args.max_tokens {
        c.max_tokens = v;
    }
    if let Some(v) = args.mock_responses {
        c.mock = MockMode::Responses(v);
    }
    if args.mock_echo {
        c.mock = MockMode::Echo;
    }
    c.instruction_as_system |= args.system_instruction;
    c.check_vocabulary |= args.check_vocabulary;
    args.matching.apply(&mut c.match_config);
    c.check().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(c)
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Parse { input, reference } => {
            let text = read_input(input.as_deref())?;
            let outcome = if reference.is_empty() {
                parse_ir(&text)
            } else {
                let ids = reference
                    .iter()
                    .map(|r| Identifier::new(r).map_err(|e| Failure::Usage(e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                parse_ir_with_reference(&text, Some(&ids))
            };
            emit(None, &json_line(&outcome))
        }
        Command::Canon { input, text } => {
            let raw = read_input(input.as_deref())?;
            let model: IRModel = if text {
                let outcome = parse_ir(&raw);
                outcome.model.ok_or_else(|| {
                    let why: Vec<String> = outcome.diagnostics.iter().map(ToString::to_string).collect();
                    Failure::Run(format!("no model parsed: {}", why.join("; ")))
                })?
            } else {
                let m: IRModel = serde_json::from_str(&raw)?;
                m.check()?;
                m
            };
            emit(None, &json_line(&to_canonical(&model)?))
        }
        Command::Score {
            pred,
            gold,
            matching,
            format,
            model,
            out,
        } => {
            let mut cfg = MatchConfig::default();
            matching.apply(&mut cfg);
            cfg.check().map_err(|e| Failure::Usage(e.to_string()))?;
            let dataset = load_dataset(&gold)?;
            let records = load_predictions(&pred)?;
            let mut report = score_predictions(&dataset, &records, &cfg)?;
            report.meta.model = model.unwrap_or_else(|| "-".into());
            report.meta.k_shot = "-".into();
            emit(out.as_deref(), &render(&report, format))
        }
        Command::Prompt { kind, dataset, out } => {
            let dataset = load_dataset(&dataset)?;
            let mut text = String::new();
            for p in &dataset.problems {
                let prompt = build_prompt(kind, &p.description, None)?;
                text.push_str(&serde_json::json!({"id": p.id, "prompt": prompt}).to_string());
                text.push('\n');
            }
            emit(out.as_deref(), &text)
        }
        Command::Run(args) => {
            let config = run_config(args)?;
            let report = run_eval(&config).map_err(|e| match e {
                RunError::Config(c) => Failure::Usage(c.to_string()),
                other => Failure::Run(other.to_string()),
            })?;
            let a = &report.aggregate;
            eprintln!(
                "{} problems, macro F1 {:.4}, micro F1 {:.4}; reports in {}",
                a.problems,
                a.macro_f1,
                a.micro_f1,
                config.output_dir.display()
            );
            Ok(())
        }
        Command::Carbon {
            runtime_h,
            power_kw,
            usage_factor,
            pue,
            carbon_intensity,
        } => {
            let grams = estimate_carbon(&CarbonParams {
                runtime_h,
                power_kw,
                usage_factor,
                pue,
                carbon_intensity_g_per_kwh: carbon_intensity,
            })
            .map_err(|e| Failure::Usage(e.to_string()))?;
            emit(None, &format!("{grams}\n"))
        }
        Command::FtConfig { overrides, out } => {
            let manifest = build_manifest(&overrides).map_err(|e| match e {
                ManifestError::Io(io) => Failure::Run(io.to_string()),
                other => Failure::Usage(other.to_string()),
            })?;
            emit(out.as_deref(), &manifest.to_json())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
