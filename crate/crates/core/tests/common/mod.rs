#![allow(dead_code)]

use std::collections::HashSet;
use std::path::PathBuf;

use optformkit_core::{
    CanonicalForm, Constraint, Direction, IRModel, Identifier, LinearExpr, Objective, Relation, Row,
};
use proptest::prelude::*;
use proptest::sample::{select, subsequence};

pub fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const RESERVED: &[&str] = &[
    "and",
    "decision",
    "function",
    "max",
    "maximize",
    "min",
    "minimize",
    "objective",
    "subject",
    "to",
    "variables",
    "constraints",
    "z",
];

fn word() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9]{0,5}".prop_filter("reserved", |w| !RESERVED.contains(&w.as_str()))
}

pub fn identifier() -> impl Strategy<Value = Identifier> {
    prop_oneof![
        3 => word(),
        1 => (word(), word()).prop_map(|(a, b)| format!("{a}_{b}")),
        1 => (word(), word()).prop_map(|(a, b)| format!("{a} {b}")),
    ]
    .prop_map(|s| Identifier::new(&s).unwrap())
}

pub fn variables(max: usize) -> impl Strategy<Value = Vec<Identifier>> {
    prop::collection::vec(identifier(), 1..=max).prop_map(|vs| {
        let mut seen = HashSet::new();
        vs.into_iter().filter(|v| seen.insert(v.key().to_string())).collect()
    })
}

/// Finite coefficients without negative zero: small integers, two-decimal
/// values and arbitrary reals.
pub fn coefficient() -> impl Strategy<Value = f64> {
    prop_oneof![
        (-50i32..=50).prop_map(f64::from),
        (-100_000i32..=100_000).prop_map(|c| f64::from(c) / 100.0),
        -1.0e4f64..1.0e4,
    ]
    .prop_map(|c| c + 0.0)
}

pub fn relation() -> impl Strategy<Value = Relation> {
    select(vec![
        Relation::LE,
        Relation::GE,
        Relation::EQ,
        Relation::LT,
        Relation::GT,
    ])
}

fn constant() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), coefficient()]
}

/// Expression over a subset of `vars` (each at most once).
pub fn expr_over(vars: Vec<Identifier>, min_terms: usize) -> impl Strategy<Value = LinearExpr> {
    let n = vars.len();
    let lo = min_terms.min(n);
    (subsequence(vars, lo..=n), constant()).prop_flat_map(|(picked, k)| {
        let len = picked.len();
        prop::collection::vec(coefficient(), len)
            .prop_map(move |cs| LinearExpr::new(cs.into_iter().zip(picked.iter().cloned()).collect(), k))
    })
}

pub fn constraint_over(vars: Vec<Identifier>) -> impl Strategy<Value = Constraint> {
    let rhs_vars: Vec<Identifier> = vars.iter().take(2).cloned().collect();
    (
        expr_over(vars, 1),
        relation(),
        prop_oneof![
            2 => constant().prop_map(LinearExpr::constant),
            1 => expr_over(rhs_vars, 0),
        ],
    )
        .prop_map(|(lhs, rel, rhs)| Constraint::new(lhs, rel, rhs))
}

pub fn model() -> impl Strategy<Value = IRModel> {
    variables(5).prop_flat_map(|vars| {
        (
            Just(vars.clone()),
            prop::collection::vec(constraint_over(vars.clone()), 0..6),
            select(vec![Direction::Minimize, Direction::Maximize]),
            expr_over(vars, 1),
        )
            .prop_map(|(vars, cs, dir, obj)| IRModel::new(vars, cs, Objective::new(dir, obj)))
    })
}

pub fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, n)
}

pub fn form(vars: &[&str], rows: &[(&[f64], f64)], objective: &[f64]) -> CanonicalForm {
    CanonicalForm {
        variable_order: vars.iter().map(|v| Identifier::new(v).unwrap()).collect(),
        rows: rows.iter().map(|(c, b)| Row::new(c.to_vec(), *b)).collect(),
        objective: objective.to_vec(),
    }
}
