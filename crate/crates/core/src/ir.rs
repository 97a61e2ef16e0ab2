//! The equation-centric intermediate representation (IR) of a linear program:
//! declared variables, constraints with a linear expression on each side, and
//! a minimize/maximize objective.
//!
//! The textual layout produced by [`render_ir`] is the one models are asked to
//! emit:
//!
//! ```text
//! Variables: cleaners, receptionists
//! Constraints:
//! (-1.0) * cleaners + (-1.0) * receptionists <= -100.0
//! Objective Function:
//! minimize (500.0) * cleaners + (350.0) * receptionists
//! ```

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::diagnostic::{Diagnostic, DiagnosticKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IrError {
    #[error("invalid identifier {0:?}")]
    InvalidIdentifier(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// A variable name made of one or more word tokens.
///
/// Two identifiers are equal when their tokens match case-insensitively, with
/// whitespace and underscores both acting as token separators, so `thin jar`,
/// `Thin_Jar` and `thin  jar` all name the same variable. The original
/// spelling (with whitespace runs collapsed) is kept for rendering.
#[derive(Clone, Debug)]
pub struct Identifier {
    text: String,
    key: String,
}

impl Identifier {
    pub fn new(raw: &str) -> Result<Self, IrError> {
        let words: Vec<&str> = raw.split_whitespace().collect();
        if words.is_empty() {
            return Err(IrError::InvalidIdentifier(raw.to_string()));
        }
        for word in &words {
            if !is_identifier_word(word) {
                return Err(IrError::InvalidIdentifier(raw.to_string()));
            }
        }
        let text = words.join(" ");
        let key = word_subtokens(&text).collect::<Vec<_>>().join("_");
        if key.is_empty() {
            return Err(IrError::InvalidIdentifier(raw.to_string()));
        }
        Ok(Self { text, key })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// Word tokens, split on whitespace and underscores.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.text
            .split(|c: char| c.is_whitespace() || c == '_')
            .filter(|t| !t.is_empty())
    }

    /// Normalized comparison key: lowercase tokens joined by `_`.
    pub fn key(&self) -> &str {
        &self.key
    }
}

/// A whitespace-free word usable inside an identifier: starts with a letter or
/// underscore, continues with letters, digits or underscores, and contains at
/// least one letter or digit.
pub(crate) fn is_identifier_word(word: &str) -> bool {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    word.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') && word.chars().any(|c| c.is_ascii_alphanumeric())
}

pub(crate) fn word_subtokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| c.is_whitespace() || c == '_')
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
}

impl PartialEq for Identifier {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for Identifier {}

impl Hash for Identifier {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key.hash(state);
    }
}

impl fmt::Display for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Serialize for Identifier {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Identifier {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Identifier::new(&raw).map_err(serde::de::Error::custom)
    }
}

/// `sum(coef * var) + constant`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearExpr {
    pub terms: Vec<(f64, Identifier)>,
    #[serde(default)]
    pub constant: f64,
}

impl LinearExpr {
    pub fn new(terms: Vec<(f64, Identifier)>, constant: f64) -> Self {
        Self { terms, constant }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.constant.is_finite() && self.terms.iter().all(|(c, _)| c.is_finite())
    }

    /// Value of the expression under `assignment`; unassigned variables count as 0.
    pub fn evaluate(&self, assignment: &HashMap<Identifier, f64>) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|(c, v)| c * assignment.get(v).copied().unwrap_or(0.0))
                .sum::<f64>()
    }

    pub fn variables(&self) -> impl Iterator<Item = &Identifier> {
        self.terms.iter().map(|(_, v)| v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    LE,
    GE,
    EQ,
    LT,
    GT,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::LE => "<=",
            Relation::GE => ">=",
            Relation::EQ => "=",
            Relation::LT => "<",
            Relation::GT => ">",
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64, tolerance: f64) -> bool {
        match self {
            Relation::LE | Relation::LT => lhs <= rhs + tolerance,
            Relation::GE | Relation::GT => lhs + tolerance >= rhs,
            Relation::EQ => (lhs - rhs).abs() <= tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub lhs: LinearExpr,
    pub relation: Relation,
    pub rhs: LinearExpr,
}

impl Constraint {
    pub fn new(lhs: LinearExpr, relation: Relation, rhs: LinearExpr) -> Self {
        Self { lhs, relation, rhs }
    }

    pub fn variables(&self) -> impl Iterator<Item = &Identifier> {
        self.lhs.variables().chain(self.rhs.variables())
    }

    pub fn is_satisfied(&self, assignment: &HashMap<Identifier, f64>, tolerance: f64) -> bool {
        self.relation
            .holds(self.lhs.evaluate(assignment), self.rhs.evaluate(assignment), tolerance)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "MIN")]
    Minimize,
    #[serde(rename = "MAX")]
    Maximize,
}

impl Direction {
    pub fn keyword(self) -> &'static str {
        match self {
            Direction::Minimize => "minimize",
            Direction::Maximize => "maximize",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub direction: Direction,
    #[serde(flatten)]
    pub expr: LinearExpr,
}

impl Objective {
    pub fn new(direction: Direction, expr: LinearExpr) -> Self {
        Self { direction, expr }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub struct IRModel {
    pub variables: Vec<Identifier>,
    pub constraints: Vec<Constraint>,
    pub objective: Objective,
}

impl IRModel {
    pub fn new(variables: Vec<Identifier>, constraints: Vec<Constraint>, objective: Objective) -> Self {
        Self {
            variables,
            constraints,
            objective,
        }
    }

    /// Checks the structural invariants: nonempty distinct declarations,
    /// finite numbers, and a nonempty objective.
    pub fn check(&self) -> Result<(), IrError> {
        if self.variables.is_empty() {
            return Err(IrError::InvalidModel("no variables declared".into()));
        }
        for (i, v) in self.variables.iter().enumerate() {
            if self.variables[..i].contains(v) {
                return Err(IrError::InvalidModel(format!("variable {v} declared twice")));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.lhs.is_finite() || !c.rhs.is_finite() {
                return Err(IrError::InvalidModel(format!(
                    "constraint {} has a non-finite number",
                    i + 1
                )));
            }
        }
        if !self.objective.expr.is_finite() {
            return Err(IrError::InvalidModel("objective has a non-finite number".into()));
        }
        if self.objective.expr.terms.is_empty() {
            return Err(IrError::InvalidModel("objective has no terms".into()));
        }
        Ok(())
    }
}

/// Merges repeated variables by summing their coefficients. Terms keep the
/// order of first occurrence; zero coefficients are kept as explicit terms.
pub fn normalize_expr(expr: &LinearExpr) -> LinearExpr {
    let mut terms: Vec<(f64, Identifier)> = Vec::with_capacity(expr.terms.len());
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (coef, var) in &expr.terms {
        match index.get(var.key()) {
            Some(&i) => terms[i].0 += coef,
            None => {
                index.insert(var.key(), terms.len());
                terms.push((*coef, var.clone()));
            }
        }
    }
    for term in &mut terms {
        term.0 += 0.0;
    }
    LinearExpr {
        terms,
        constant: expr.constant + 0.0,
    }
}

/// Formats a number with at least one decimal place, never in exponent
/// notation, and with negative zero printed as `0.0`.
pub fn format_number(value: f64) -> String {
    if value == 0.0 {
        return "0.0".to_string();
    }
    let mut s = value.to_string();
    if value.is_finite() && !s.contains('.') {
        s.push_str(".0");
    }
    s
}

fn render_side(expr: &LinearExpr) -> String {
    if expr.terms.is_empty() {
        return format_number(expr.constant);
    }
    let mut out = expr
        .terms
        .iter()
        .map(|(c, v)| format!("({}) * {}", format_number(*c), v))
        .collect::<Vec<_>>()
        .join(" + ");
    if expr.constant != 0.0 {
        out.push_str(&format!(" + ({})", format_number(expr.constant)));
    }
    out
}

/// Renders one constraint as `lhs <rel> rhs`.
pub fn render_constraint(c: &Constraint) -> String {
    format!(
        "{} {} {}",
        render_side(&c.lhs),
        c.relation.symbol(),
        render_side(&c.rhs)
    )
}

/// Deterministic text rendering in the three-section IR layout.
pub fn render_ir(model: &IRModel) -> Result<String, IrError> {
    model.check()?;
    let mut out = String::new();
    out.push_str("Variables: ");
    out.push_str(
        &model
            .variables
            .iter()
            .map(Identifier::as_str)
            .collect::<Vec<_>>()
            .join(", "),
    );
    out.push_str("\nConstraints:");
    for c in &model.constraints {
        out.push('\n');
        out.push_str(&render_constraint(c));
    }
    out.push_str("\nObjective Function:\n");
    out.push_str(model.objective.direction.keyword());
    out.push(' ');
    out.push_str(&render_side(&model.objective.expr));
    Ok(out)
}

/// Byte spans of the model's parts in the source text, used to anchor
/// validation findings. Missing entries fall back to `(0, 0)`.
#[derive(Clone, Debug, Default)]
pub struct SourceSpans {
    pub variables: Option<(usize, usize)>,
    pub constraints: Vec<(usize, usize)>,
    pub objective: Option<(usize, usize)>,
}

/// Reports undeclared variables, repeated declarations and an empty
/// constraint set. An empty result means the model is clean.
pub fn validate_ir(model: &IRModel) -> Vec<Diagnostic> {
    validate_ir_spanned(model, &SourceSpans::default())
}

pub fn validate_ir_spanned(model: &IRModel, spans: &SourceSpans) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let var_span = spans.variables.unwrap_or((0, 0));

    let mut seen: Vec<&Identifier> = Vec::new();
    let mut reported_dup: Vec<&Identifier> = Vec::new();
    for v in &model.variables {
        if seen.contains(&v) {
            if !reported_dup.contains(&v) {
                reported_dup.push(v);
                out.push(
                    Diagnostic::new(
                        DiagnosticKind::DuplicateVariable,
                        var_span,
                        format!("variable `{v}` is declared more than once"),
                    )
                    .with_subject(v.as_str()),
                );
            }
        } else {
            seen.push(v);
        }
    }

    let mut used: Vec<(&Identifier, (usize, usize))> = Vec::new();
    for (i, c) in model.constraints.iter().enumerate() {
        let span = spans.constraints.get(i).copied().unwrap_or((0, 0));
        used.extend(c.variables().map(|v| (v, span)));
    }
    let obj_span = spans.objective.unwrap_or((0, 0));
    used.extend(model.objective.expr.variables().map(|v| (v, obj_span)));

    let mut reported_unknown: Vec<&Identifier> = Vec::new();
    for (var, span) in used {
        if model.variables.contains(var) || reported_unknown.contains(&var) {
            continue;
        }
        reported_unknown.push(var);
        out.push(
            Diagnostic::new(
                DiagnosticKind::UnknownVariable,
                span,
                format!("variable `{var}` is used but not declared"),
            )
            .with_subject(var.as_str()),
        );
    }

    if model.constraints.is_empty() {
        out.push(Diagnostic::new(
            DiagnosticKind::EmptyConstraintSet,
            spans.variables.unwrap_or((0, 0)),
            "model has no constraints",
        ));
    }
    out
}
