//! Report writers. Every rate and score prints with four decimals.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use optformkit_core::ScoreReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(format!("unknown report format {s:?} (expected json, csv or markdown)")),
        }
    }
}

pub fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}

pub fn render_json(report: &ScoreReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub const CSV_HEADER: [&str; 10] = [
    "model",
    "k_shot",
    "problems",
    "macro_f1",
    "micro_precision",
    "micro_recall",
    "micro_f1",
    "parse_fail_rate",
    "hallucination_rate",
    "loop_rate",
];

pub fn render_csv(report: &ScoreReport) -> String {
    let a = &report.aggregate;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory csv");
    w.write_record([
        report.meta.model.clone(),
        report.meta.k_shot.clone(),
        a.problems.to_string(),
        fmt4(a.macro_f1),
        fmt4(a.micro_precision),
        fmt4(a.micro_recall),
        fmt4(a.micro_f1),
        fmt4(a.parse_fail_rate),
        fmt4(a.hallucination_rate),
        fmt4(a.loop_rate),
    ])
    .expect("in-memory csv");
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

fn cell(text: &str) -> String {
    text.replace('|', "\\|").replace('\n', " ")
}

/// Headline table (model, k-shot, macro F1), a diagnostics table and a
/// per-problem breakdown.
pub fn render_markdown(report: &ScoreReport) -> String {
    let a = &report.aggregate;
    let mut s = String::new();
    s.push_str("| Model | k-Shot | F1 |\n|---|---|---|\n");
    let _ = writeln!(
        s,
        "| {} | {} | {} |",
        cell(&report.meta.model),
        cell(&report.meta.k_shot),
        fmt4(a.macro_f1)
    );
    s.push_str("\n| Problems | Micro P | Micro R | Micro F1 | Parse-fail rate | Hallucination rate | Loop rate |\n");
    s.push_str("|---|---|---|---|---|---|---|\n");
    let _ = writeln!(
        s,
        "| {} | {} | {} | {} | {} | {} | {} |",
        a.problems,
        fmt4(a.micro_precision),
        fmt4(a.micro_recall),
        fmt4(a.micro_f1),
        fmt4(a.parse_fail_rate),
        fmt4(a.hallucination_rate),
        fmt4(a.loop_rate)
    );
    s.push_str("\n| Problem | Precision | Recall | F1 | Matched | Predicted | Gold | Diagnostics |\n");
    s.push_str("|---|---|---|---|---|---|---|---|\n");
    for p in &report.per_problem {
        let diags = if p.diagnostics.is_empty() {
            "-".to_string()
        } else {
            p.diagnostics
                .iter()
                .map(|(k, n)| format!("{k}={n}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} | {}{} |",
            cell(&p.id),
            fmt4(p.score.precision),
            fmt4(p.score.recall),
            fmt4(p.score.f1),
            p.score.matched,
            p.score.pred_count,
            p.score.gold_count,
            if p.parse_failed { "parse failed; " } else { "" },
            diags
        );
    }
    if !report.meta.settings.is_empty() {
        s.push_str("\n| Setting | Value |\n|---|---|\n");
        for (k, v) in &report.meta.settings {
            let _ = writeln!(s, "| {} | {} |", cell(k), cell(v));
        }
    }
    s
}

pub fn render(report: &ScoreReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => render_json(report),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Markdown => render_markdown(report),
    }
}

pub fn write_report(report: &ScoreReport, format: ReportFormat, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, render(report, format))
}
