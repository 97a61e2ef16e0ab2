//! Parsing, canonicalization and scoring of linear-program formulations
//! produced by language models, plus the prompt templates and dataset format
//! used to evaluate them.

pub mod canonical;
pub mod dataset;
pub mod diagnostic;
pub mod ir;
pub mod parser;
pub mod prompt;
pub mod scorer;

pub use canonical::{to_canonical, CanonError, CanonicalForm, Row};
pub use diagnostic::{Diagnostic, DiagnosticKind};
pub use ir::{
    normalize_expr, render_ir, validate_ir, Constraint, Direction, IRModel, Identifier, IrError, LinearExpr, Objective,
    Relation,
};
pub use parser::{parse_expr, parse_ir, parse_ir_with_reference, parse_number, ParseError, ParseOutcome};
pub use scorer::{MatchConfig, ProblemScore, ScoreReport};
