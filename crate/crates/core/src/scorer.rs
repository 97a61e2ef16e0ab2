//! Declaration-level scoring of a predicted canonical form against gold.
//!
//! A formulation's declarations are its constraint rows plus its objective.
//! Predicted rows are matched one-to-one with gold rows (maximum bipartite
//! matching under a coefficient tolerance); the objective counts as one more
//! declaration. Precision, recall and F1 follow from the matched count.
//!
//! This is a reconstruction of the declaration-accuracy scoring used for
//! NL-to-LP benchmarks; the original competition formula (for instance,
//! whether variable declarations count) may differ in detail.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{scale_normalize_row, CanonicalForm, Row};
use crate::diagnostic::{Diagnostic, DiagnosticKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("no problems to aggregate")]
    EmptyRun,
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    pub tolerance: f64,
    pub scale_normalize: bool,
    pub dedupe_predictions: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            scale_normalize: false,
            dedupe_predictions: true,
        }
    }
}

impl MatchConfig {
    pub fn check(&self) -> Result<(), ScoreError> {
        if self.tolerance > 0.0 && self.tolerance.is_finite() {
            Ok(())
        } else {
            Err(ScoreError::InvalidTolerance(self.tolerance))
        }
    }
}

/// For each gold column, the predicted column feeding it (if any).
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnMapping {
    pub gold_to_pred: Vec<Option<usize>>,
    /// Predicted columns with no gold counterpart.
    pub dropped: Vec<usize>,
    pub notes: Vec<Diagnostic>,
}

/// Maps predicted columns onto gold columns: by name equivalence first, then,
/// when both sides declare the same number of variables, remaining columns
/// pair up by declaration position. Leftover predicted columns are dropped and
/// unmatched gold columns read as zero.
pub fn align_variables(pred: &CanonicalForm, gold: &CanonicalForm) -> ColumnMapping {
    let mut gold_to_pred: Vec<Option<usize>> = gold
        .variable_order
        .iter()
        .map(|g| pred.variable_order.iter().position(|p| p == g))
        .collect();
    let mut used = vec![false; pred.num_vars()];
    for p in gold_to_pred.iter().flatten() {
        used[*p] = true;
    }

    let mut notes = Vec::new();
    let unmatched_gold = gold_to_pred.iter().filter(|m| m.is_none()).count();
    if unmatched_gold > 0 && pred.num_vars() == gold.num_vars() {
        let free: Vec<usize> = (0..pred.num_vars()).filter(|p| !used[*p]).collect();
        let mut free = free.into_iter();
        for slot in gold_to_pred.iter_mut().filter(|m| m.is_none()) {
            if let Some(p) = free.next() {
                *slot = Some(p);
                used[p] = true;
            }
        }
        notes.push(Diagnostic::new(
            DiagnosticKind::VariableMismatch,
            (0, 0),
            format!("{unmatched_gold} variable(s) aligned by position rather than name"),
        ));
    }
    let dropped: Vec<usize> = (0..pred.num_vars()).filter(|p| !used[*p]).collect();
    let still_missing = gold_to_pred.iter().filter(|m| m.is_none()).count();
    if !dropped.is_empty() || still_missing > 0 {
        notes.push(Diagnostic::new(
            DiagnosticKind::VariableMismatch,
            (0, 0),
            format!(
                "{} predicted column(s) dropped, {} gold column(s) missing",
                dropped.len(),
                still_missing
            ),
        ));
    }
    ColumnMapping {
        gold_to_pred,
        dropped,
        notes,
    }
}

/// A predicted row expressed over gold columns. `spill` is set when the row
/// puts weight on a dropped column, which rules out a match.
#[derive(Clone, Debug, PartialEq)]
struct Projected {
    row: Row,
    spill: bool,
}

fn project(coeffs: &[f64], rhs: f64, mapping: &ColumnMapping) -> Projected {
    let row = Row::new(
        mapping
            .gold_to_pred
            .iter()
            .map(|m| m.map_or(0.0, |p| coeffs[p]))
            .collect(),
        rhs,
    );
    let spill = mapping.dropped.iter().any(|&p| coeffs[p] != 0.0);
    Projected { row, spill }
}

/// True iff every coefficient and the rhs agree within `cfg.tolerance`,
/// after optional scale normalization of both rows.
pub fn rows_match(a: &Row, b: &Row, cfg: &MatchConfig) -> bool {
    if a.coeffs.len() != b.coeffs.len() {
        return false;
    }
    let (a, b) = if cfg.scale_normalize {
        (scale_normalize_row(a), scale_normalize_row(b))
    } else {
        (a.clone(), b.clone())
    };
    a.coeffs
        .iter()
        .zip(&b.coeffs)
        .all(|(x, y)| (x - y).abs() <= cfg.tolerance)
        && (a.rhs - b.rhs).abs() <= cfg.tolerance
}

/// Size of a maximum matching in the bipartite graph `adj[left][right]`
/// (augmenting paths).
pub fn maximum_matching(adj: &[Vec<bool>]) -> usize {
    let right = adj.first().map_or(0, Vec::len);
    let mut owner: Vec<Option<usize>> = vec![None; right];

    fn augment(u: usize, adj: &[Vec<bool>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for v in 0..seen.len() {
            if adj[u][v] && !seen[v] {
                seen[v] = true;
                if owner[v].is_none_or(|w| augment(w, adj, seen, owner)) {
                    owner[v] = Some(u);
                    return true;
                }
            }
        }
        false
    }

    let mut size = 0;
    for u in 0..adj.len() {
        let mut seen = vec![false; right];
        if augment(u, adj, &mut seen, &mut owner) {
            size += 1;
        }
    }
    size
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchCounts {
    pub matched: usize,
    pub pred_count: usize,
    pub gold_count: usize,
    pub notes: Vec<Diagnostic>,
}

/// Predicted rows with exact duplicates removed, first occurrence kept.
pub fn dedupe_rows(rows: &[Row]) -> Vec<Row> {
    let mut out: Vec<Row> = Vec::with_capacity(rows.len());
    for r in rows {
        if !out.contains(r) {
            out.push(r.clone());
        }
    }
    out
}

/// Counts matched declarations between `pred` and `gold`. Gold rows are
/// always treated as a set; predicted rows only when `cfg.dedupe_predictions`.
pub fn match_declarations(pred: &CanonicalForm, gold: &CanonicalForm, cfg: &MatchConfig) -> MatchCounts {
    let mapping = align_variables(pred, gold);
    let pred_rows = if cfg.dedupe_predictions {
        dedupe_rows(&pred.rows)
    } else {
        pred.rows.clone()
    };
    let projected: Vec<Projected> = pred_rows.iter().map(|r| project(&r.coeffs, r.rhs, &mapping)).collect();
    let gold_rows = dedupe_rows(&gold.rows);
    let adj: Vec<Vec<bool>> = projected
        .iter()
        .map(|p| {
            gold_rows
                .iter()
                .map(|g| !p.spill && rows_match(&p.row, g, cfg))
                .collect()
        })
        .collect();
    let mut matched = maximum_matching(&adj);

    let pred_has_objective = !pred.objective.is_empty();
    if pred_has_objective {
        let obj = project(&pred.objective, 0.0, &mapping);
        if !obj.spill && rows_match(&obj.row, &Row::new(gold.objective.clone(), 0.0), cfg) {
            matched += 1;
        }
    }
    MatchCounts {
        matched,
        pred_count: pred_rows.len() + usize::from(pred_has_objective),
        gold_count: gold_rows.len() + 1,
        notes: mapping.notes,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
    pub pred_count: usize,
    pub gold_count: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

impl ProblemScore {
    pub fn from_counts(matched: usize, pred_count: usize, gold_count: usize) -> Self {
        let precision = ratio(matched, pred_count);
        let recall = ratio(matched, gold_count);
        Self {
            precision,
            recall,
            f1: f1(precision, recall),
            matched,
            pred_count,
            gold_count,
        }
    }

    /// Score of a problem with no usable prediction.
    pub fn failed(gold_count: usize) -> Self {
        Self::from_counts(0, 0, gold_count)
    }
}

/// Scores one problem. An absent prediction scores zero across the board.
pub fn score_problem(pred: Option<&CanonicalForm>, gold: &CanonicalForm, cfg: &MatchConfig) -> ProblemScore {
    match pred {
        Some(pred) => {
            let counts = match_declarations(pred, gold, cfg);
            ProblemScore::from_counts(counts.matched, counts.pred_count, counts.gold_count)
        }
        None => ProblemScore::failed(dedupe_rows(&gold.rows).len() + 1),
    }
}

/// Label and settings of the run a report belongs to.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub model: String,
    /// `0`, `1`, or `-` when not applicable.
    pub k_shot: String,
    #[serde(default)]
    pub settings: BTreeMap<String, String>,
}

/// Per-problem input to [`aggregate`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemResult {
    pub id: String,
    pub score: ProblemScore,
    /// No model could be parsed (or canonicalized) from the output.
    pub parse_failed: bool,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemReport {
    pub id: String,
    #[serde(flatten)]
    pub score: ProblemScore,
    pub parse_failed: bool,
    /// Diagnostic counts keyed by kind name.
    pub diagnostics: BTreeMap<String, usize>,
}

impl ProblemReport {
    pub fn hallucinated(&self) -> bool {
        self.diagnostics.contains_key(DiagnosticKind::UnknownVariable.as_str())
    }

    pub fn looped(&self) -> bool {
        self.diagnostics.contains_key(DiagnosticKind::ExtraBlock.as_str())
            || self
                .diagnostics
                .contains_key(DiagnosticKind::RepeatedConstraint.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateScores {
    pub problems: usize,
    pub macro_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub parse_fail_rate: f64,
    pub hallucination_rate: f64,
    pub loop_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    #[serde(default)]
    pub meta: ReportMeta,
    pub per_problem: Vec<ProblemReport>,
    pub aggregate: AggregateScores,
}

/// Folds per-problem results into a report. Macro F1 is the mean of
/// per-problem F1 (failures count as 0); micro figures pool the counts.
pub fn aggregate(results: &[ProblemResult]) -> Result<ScoreReport, ScoreError> {
    if results.is_empty() {
        return Err(ScoreError::EmptyRun);
    }
    let per_problem: Vec<ProblemReport> = results
        .iter()
        .map(|r| ProblemReport {
            id: r.id.clone(),
            score: r.score,
            parse_failed: r.parse_failed,
            diagnostics: crate::diagnostic::summarize(&r.diagnostics)
                .into_iter()
                .map(|(k, n)| (k.as_str().to_string(), n))
                .collect(),
        })
        .collect();

    let n = per_problem.len() as f64;
    let (m, p, g) = per_problem.iter().fold((0, 0, 0), |(m, p, g), r| {
        (m + r.score.matched, p + r.score.pred_count, g + r.score.gold_count)
    });
    let micro_precision = ratio(m, p);
    let micro_recall = ratio(m, g);
    let rate = |f: &dyn Fn(&ProblemReport) -> bool| per_problem.iter().filter(|r| f(r)).count() as f64 / n;
    let aggregate = AggregateScores {
        problems: per_problem.len(),
        macro_f1: per_problem.iter().map(|r| r.score.f1).sum::<f64>() / n,
        micro_precision,
        micro_recall,
        micro_f1: f1(micro_precision, micro_recall),
        parse_fail_rate: rate(&|r| r.parse_failed),
        hallucination_rate: rate(&|r| r.hallucinated()),
        loop_rate: rate(&|r| r.looped()),
    };
    Ok(ScoreReport {
        meta: ReportMeta::default(),
        per_problem,
        aggregate,
    })
}
