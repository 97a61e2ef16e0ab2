//! Rule-based conversion of an [`IRModel`] to matrix form: every constraint
//! becomes one or two rows `coeffs · x <= rhs` and the objective becomes a
//! minimization vector.

use std::collections::HashMap;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::diagnostic::{Diagnostic, DiagnosticKind};
use crate::ir::{Constraint, Direction, IRModel, Identifier, Objective, Relation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CanonError {
    #[error("variable `{0}` is not declared")]
    UnknownVariable(String),
    #[error("model declares no variables")]
    EmptyModel,
    #[error("malformed canonical form: {0}")]
    Shape(String),
}

/// One `coeffs · x <= rhs` row.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, rhs }
    }

    /// Coefficients and rhs both negated (signed zeros folded to `0.0`).
    pub fn negated(&self) -> Row {
        Row {
            coeffs: self.coeffs.iter().map(|c| -c + 0.0).collect(),
            rhs: -self.rhs + 0.0,
        }
    }

    pub fn is_satisfied_by(&self, x: &[f64], tolerance: f64) -> bool {
        let lhs: f64 = self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
        lhs <= self.rhs + tolerance
    }
}

/// Matrix encoding of an LP over `variable_order`: rows mean `a · x <= b`,
/// `objective` means minimize `objective · x`.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalForm {
    pub variable_order: Vec<Identifier>,
    pub rows: Vec<Row>,
    pub objective: Vec<f64>,
}

impl CanonicalForm {
    pub fn num_vars(&self) -> usize {
        self.variable_order.len()
    }

    pub fn check(&self) -> Result<(), CanonError> {
        let n = self.num_vars();
        if self.objective.len() != n {
            return Err(CanonError::Shape(format!(
                "objective has {} entries for {n} variables",
                self.objective.len()
            )));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(CanonError::Shape(format!(
                    "row {} has {} coefficients for {n} variables",
                    i + 1,
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(CanonError::Shape(format!("row {} has a non-finite entry", i + 1)));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(CanonError::Shape("objective has a non-finite entry".into()));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CanonicalWire {
    variables: Vec<Identifier>,
    rows: Vec<Vec<f64>>,
    objective: Vec<f64>,
}

impl Serialize for CanonicalForm {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CanonicalWire {
            variables: self.variable_order.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| {
                    let mut v = r.coeffs.clone();
                    v.push(r.rhs);
                    v
                })
                .collect(),
            objective: self.objective.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CanonicalForm {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = CanonicalWire::deserialize(deserializer)?;
        let mut rows = Vec::with_capacity(wire.rows.len());
        for mut r in wire.rows {
            let rhs = r
                .pop()
                .ok_or_else(|| D::Error::custom("canonical row must end with its rhs"))?;
            rows.push(Row::new(r, rhs));
        }
        let form = CanonicalForm {
            variable_order: wire.variables,
            rows,
            objective: wire.objective,
        };
        form.check().map_err(D::Error::custom)?;
        Ok(form)
    }
}

struct Columns<'a> {
    index: HashMap<&'a str, usize>,
    n: usize,
}

impl<'a> Columns<'a> {
    fn new(order: &'a [Identifier]) -> Self {
        let mut index = HashMap::new();
        for v in order {
            let next = index.len();
            index.entry(v.key()).or_insert(next);
        }
        let n = index.len();
        Self { index, n }
    }

    fn get(&self, v: &Identifier) -> Result<usize, CanonError> {
        self.index
            .get(v.key())
            .copied()
            .ok_or_else(|| CanonError::UnknownVariable(v.to_string()))
    }
}

fn le_row(c: &Constraint, cols: &Columns<'_>) -> Result<Row, CanonError> {
    let mut coeffs = vec![0.0; cols.n];
    for (coef, v) in &c.lhs.terms {
        coeffs[cols.get(v)?] += coef;
    }
    for (coef, v) in &c.rhs.terms {
        coeffs[cols.get(v)?] -= coef;
    }
    let constant = c.lhs.constant - c.rhs.constant;
    for x in &mut coeffs {
        *x += 0.0;
    }
    Ok(Row::new(coeffs, -constant + 0.0))
}

/// Rows for one constraint over `order`. The constraint is rewritten as
/// `e = lhs - rhs` with constant `k`: `<=`/`<` give `(e, -k)`, `>=`/`>` give
/// `(-e, k)`, and `=` gives both.
pub fn constraint_to_row(c: &Constraint, order: &[Identifier]) -> Result<Vec<Row>, CanonError> {
    let cols = Columns::new(order);
    constraint_rows(c, &cols)
}

fn constraint_rows(c: &Constraint, cols: &Columns<'_>) -> Result<Vec<Row>, CanonError> {
    let le = le_row(c, cols)?;
    Ok(match c.relation {
        Relation::LE | Relation::LT => vec![le],
        Relation::GE | Relation::GT => vec![le.negated()],
        Relation::EQ => {
            let ge = le.negated();
            vec![le, ge]
        }
    })
}

/// Objective coefficients in `order`; negated for maximization.
pub fn objective_to_vector(obj: &Objective, order: &[Identifier]) -> Result<Vec<f64>, CanonError> {
    objective_vector(obj, &Columns::new(order))
}

fn objective_vector(obj: &Objective, cols: &Columns<'_>) -> Result<Vec<f64>, CanonError> {
    let mut v = vec![0.0; cols.n];
    for (coef, var) in &obj.expr.terms {
        v[cols.get(var)?] += coef;
    }
    if obj.direction == Direction::Maximize {
        for c in &mut v {
            *c = -*c;
        }
    }
    for c in &mut v {
        *c += 0.0;
    }
    Ok(v)
}

/// Divides a row by its largest absolute coefficient. All-zero rows are
/// returned unchanged.
pub fn scale_normalize_row(row: &Row) -> Row {
    let scale = row.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return row.clone();
    }
    Row::new(row.coeffs.iter().map(|c| c / scale).collect(), row.rhs / scale)
}

pub fn to_canonical(model: &IRModel) -> Result<CanonicalForm, CanonError> {
    to_canonical_with_notes(model).map(|(form, _)| form)
}

/// [`to_canonical`] plus a `StrictRelation` note for every `<` / `>`
/// constraint that was relaxed to its non-strict form.
pub fn to_canonical_with_notes(model: &IRModel) -> Result<(CanonicalForm, Vec<Diagnostic>), CanonError> {
    if model.variables.is_empty() {
        return Err(CanonError::EmptyModel);
    }
    let cols = Columns::new(&model.variables);
    let mut variable_order: Vec<Identifier> = Vec::with_capacity(cols.n);
    for v in &model.variables {
        if !variable_order.contains(v) {
            variable_order.push(v.clone());
        }
    }

    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for (i, c) in model.constraints.iter().enumerate() {
        if matches!(c.relation, Relation::LT | Relation::GT) {
            notes.push(Diagnostic::new(
                DiagnosticKind::StrictRelation,
                (0, 0),
                format!("constraint {} uses a strict relation; treated as non-strict", i + 1),
            ));
        }
        rows.extend(constraint_rows(c, &cols)?);
    }
    let objective = objective_vector(&model.objective, &cols)?;
    Ok((
        CanonicalForm {
            variable_order,
            rows,
            objective,
        },
        notes,
    ))
}
