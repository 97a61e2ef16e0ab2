//! Structured findings produced while parsing, validating, canonicalizing and
//! scoring a formulation.

use std::fmt;

use serde::{Deserialize, Serialize};

/// What went wrong (or what was noticed) in a piece of model output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiagnosticKind {
    /// A variable used in a constraint or objective that was never declared,
    /// or a name absent from the reference vocabulary of the problem.
    UnknownVariable,
    DuplicateVariable,
    /// An exact copy of an earlier constraint.
    RepeatedConstraint,
    /// A second IR block after the first complete one (looping output).
    ExtraBlock,
    /// Non-IR text after the first complete block (instruction echo, chatter).
    TrailingNoise,
    /// The final constraint line stops mid-expression; it is dropped.
    TruncatedLine,
    MissingSection,
    EmptyConstraintSet,
    /// A constraint line that could not be parsed and is not a truncation.
    MalformedLine,
    /// A strict `<` or `>` relation was relaxed to its non-strict form.
    StrictRelation,
    /// Column alignment between a prediction and its gold fell back to position
    /// or dropped columns.
    VariableMismatch,
}

impl DiagnosticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticKind::UnknownVariable => "UnknownVariable",
            DiagnosticKind::DuplicateVariable => "DuplicateVariable",
            DiagnosticKind::RepeatedConstraint => "RepeatedConstraint",
            DiagnosticKind::ExtraBlock => "ExtraBlock",
            DiagnosticKind::TrailingNoise => "TrailingNoise",
            DiagnosticKind::TruncatedLine => "TruncatedLine",
            DiagnosticKind::MissingSection => "MissingSection",
            DiagnosticKind::EmptyConstraintSet => "EmptyConstraintSet",
            DiagnosticKind::MalformedLine => "MalformedLine",
            DiagnosticKind::StrictRelation => "StrictRelation",
            DiagnosticKind::VariableMismatch => "VariableMismatch",
        }
    }
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single finding. `span` is a byte range into the text that was parsed;
/// findings that do not come from text (e.g. validating a hand-built model)
/// carry `(0, 0)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub span: (usize, usize),
    /// The variable or section name the finding is about, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    pub message: String,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, span: (usize, usize), message: impl Into<String>) -> Self {
        Self {
            kind,
            span,
            subject: None,
            message: message.into(),
        }
    }

    pub fn with_subject(mut self, subject: impl Into<String>) -> Self {
        self.subject = Some(subject.into());
        self
    }

    pub fn is(&self, kind: DiagnosticKind) -> bool {
        self.kind == kind
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if let Some(subject) = &self.subject {
            write!(f, "({subject})")?;
        }
        write!(f, " at {}..{}: {}", self.span.0, self.span.1, self.message)
    }
}

/// Count of findings per kind, in kind order.
pub fn summarize(diagnostics: &[Diagnostic]) -> std::collections::BTreeMap<DiagnosticKind, usize> {
    let mut counts = std::collections::BTreeMap::new();
    for d in diagnostics {
        *counts.entry(d.kind).or_insert(0) += 1;
    }
    counts
}
