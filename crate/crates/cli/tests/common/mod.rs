#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use optformkit::{MockMode, RunConfig};
use optformkit_core::{parse_ir, Constraint, Direction, IRModel, Identifier, LinearExpr, Objective, Relation};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::json;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> String {
    let path = fixture_path(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn fixture_model(name: &str) -> IRModel {
    parse_ir(&fixture(name))
        .model
        .unwrap_or_else(|| panic!("{name} has no model"))
}

const NAMES: &[&str] = &[
    "cleaners",
    "receptionists",
    "trucks",
    "vans",
    "wheat",
    "corn",
    "thin jar",
    "stubby jar",
    "small_ships",
    "large_ships",
    "apple",
    "pear",
    "acres",
    "bikes",
    "nurses",
    "chairs",
];

/// A coefficient with no negative zero: a small integer, a two-decimal value
/// or an arbitrary real.
pub fn coefficient(rng: &mut StdRng) -> f64 {
    let c = match rng.gen_range(0..3) {
        0 => f64::from(rng.gen_range(-50i32..=50)),
        1 => f64::from(rng.gen_range(-100_000i32..=100_000)) / 100.0,
        _ => rng.gen_range(-1.0e4..1.0e4),
    };
    c + 0.0
}

fn expr(rng: &mut StdRng, vars: &[Identifier], min_terms: usize) -> LinearExpr {
    let k = rng.gen_range(min_terms.min(vars.len())..=vars.len());
    let mut picked: Vec<usize> = (0..vars.len()).collect();
    picked.shuffle(rng);
    picked.truncate(k);
    picked.sort_unstable();
    let terms = picked.iter().map(|&i| (coefficient(rng), vars[i].clone())).collect();
    let constant = if rng.gen_bool(0.3) { coefficient(rng) } else { 0.0 };
    LinearExpr::new(terms, constant)
}

/// A valid model with 1 to 4 variables and 1 to 5 constraints.
pub fn random_model(rng: &mut StdRng) -> IRModel {
    let n = rng.gen_range(1..=4);
    let vars: Vec<Identifier> = NAMES
        .choose_multiple(rng, n)
        .map(|v| Identifier::new(v).unwrap())
        .collect();
    let m = rng.gen_range(1..=5);
    let relations = [Relation::LE, Relation::GE, Relation::EQ, Relation::LT, Relation::GT];
    let constraints = (0..m)
        .map(|_| {
            let lhs = expr(rng, &vars, 1);
            let rel = *relations.choose(rng).unwrap();
            let rhs = if rng.gen_bool(0.3) {
                expr(rng, &vars[..vars.len().min(2)], 0)
            } else {
                LinearExpr::constant(coefficient(rng))
            };
            Constraint::new(lhs, rel, rhs)
        })
        .collect();
    let dir = if rng.gen_bool(0.5) {
        Direction::Minimize
    } else {
        Direction::Maximize
    };
    let objective = Objective::new(dir, expr(rng, &vars, 1));
    IRModel::new(vars, constraints, objective)
}

/// Writes `(id, description, gold_ir)` records as a dataset file.
pub fn write_dataset(path: &Path, problems: &[(String, String, IRModel)]) {
    let mut text = String::new();
    for (id, description, gold) in problems {
        text.push_str(&json!({"id": id, "description": description, "gold_ir": gold}).to_string());
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

pub fn synthetic_dataset(path: &Path, count: usize, rng: &mut StdRng) {
    let problems: Vec<_> = (0..count)
        .map(|i| {
            (
                format!("syn{i:03}"),
                format!("Synthetic problem number {i}. Find the best plan."),
                random_model(rng),
            )
        })
        .collect();
    write_dataset(path, &problems);
}

/// The four transcribed model responses, each paired with the gold model of
/// the problem it answers.
pub fn failure_corpus(dir: &Path) -> RunConfig {
    let hotel = fixture_model("hotel_ir.txt");
    let jars = fixture_model("finetuned_response.txt");
    let fruit = fixture_model("looping_response.txt");
    let cases = [
        ("pretrained", "pretrained_two_blocks.txt", hotel),
        ("finetuned", "finetuned_response.txt", jars),
        ("looping", "looping_response.txt", fruit.clone()),
        ("hallucination", "hallucination_response.txt", fruit),
    ];
    let mut problems = Vec::new();
    let mut responses = BTreeMap::new();
    for (id, file, gold) in cases {
        problems.push((id.to_string(), format!("Problem answered by the {id} response."), gold));
        responses.insert(id.to_string(), fixture(file));
    }
    let dataset = dir.join("failures.jsonl");
    write_dataset(&dataset, &problems);
    let canned = dir.join("responses.json");
    std::fs::write(&canned, serde_json::to_string(&responses).unwrap()).unwrap();
    RunConfig {
        dataset_path: dataset,
        output_dir: dir.join("out"),
        mock: MockMode::Responses(canned),
        check_vocabulary: true,
        ..RunConfig::default()
    }
}

pub fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
