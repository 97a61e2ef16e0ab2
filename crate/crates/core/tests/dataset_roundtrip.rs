mod common;

use common::fixture;
use optformkit_core::dataset::{
    load_dataset, load_predictions, write_dataset, write_predictions, Dataset, PredictionRecord, ProblemInstance,
};
use optformkit_core::{parse_ir, render_ir, to_canonical, DiagnosticKind};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, TestRunner};
use sha2::{Digest, Sha256};

fn record(id: &str, raw: &str) -> PredictionRecord {
    let outcome = parse_ir(raw);
    let canonical = outcome.model.as_ref().and_then(|m| to_canonical(m).ok());
    PredictionRecord {
        id: id.to_string(),
        raw: raw.to_string(),
        outcome,
        canonical,
        error: None,
    }
}

fn digest(r: &PredictionRecord) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(r).unwrap()))
}

#[test]
fn three_records_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("predictions.jsonl");
    let mut failed = record("p3", &fixture("hallucination_response.txt"));
    failed.error = Some("provider timeout".into());
    let records = vec![
        record("p1", &fixture("hotel_ir.txt")),
        record("p2", &fixture("pretrained_two_blocks.txt")),
        failed,
    ];
    assert!(records[2].outcome.model.is_none());
    write_predictions(&path, &records).unwrap();
    let loaded = load_predictions(&path).unwrap();
    assert_eq!(loaded, records);
    assert!(loaded[2].outcome.has(DiagnosticKind::TruncatedLine));
    assert_eq!(loaded[1].raw, fixture("pretrained_two_blocks.txt"));
}

#[test]
fn thousand_random_records_keep_their_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("random.jsonl");
    let mut runner = TestRunner::new(Config::default());
    let raw = prop_oneof![
        common::model().prop_map(|m| render_ir(&m).unwrap()),
        (common::model(), 0.0f64..1.0).prop_map(|(m, f)| {
            let t = render_ir(&m).unwrap();
            let mut cut = (t.len() as f64 * f) as usize;
            while !t.is_char_boundary(cut) {
                cut -= 1;
            }
            t[..cut].to_string()
        }),
        any::<String>(),
    ];
    let records: Vec<PredictionRecord> = (0..1000)
        .map(|i| {
            let text = raw.new_tree(&mut runner).unwrap().current();
            record(&format!("r{i:04}"), &text)
        })
        .collect();
    write_predictions(&path, &records).unwrap();
    let loaded = load_predictions(&path).unwrap();
    assert_eq!(loaded.len(), 1000);
    for (a, b) in records.iter().zip(&loaded) {
        assert_eq!(digest(a), digest(b), "{}", a.id);
        assert_eq!(a.raw.as_bytes(), b.raw.as_bytes());
    }
}

#[test]
fn hotel_dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = parse_ir(&fixture("hotel_ir.txt")).model.unwrap();
    let canonical = to_canonical(&model).unwrap();
    let ds = Dataset {
        split_name: "eval".into(),
        problems: vec![
            ProblemInstance {
                id: "hotel".into(),
                description: fixture("hotel_description.txt"),
                gold_ir: Some(model.clone()),
                gold_canonical: canonical.clone(),
            },
            ProblemInstance {
                id: "hotel-canonical".into(),
                description: "same, matrix gold".into(),
                gold_ir: None,
                gold_canonical: canonical.clone(),
            },
        ],
    };
    let path = dir.path().join("eval.jsonl");
    write_dataset(&path, &ds).unwrap();
    let loaded = load_dataset(&path).unwrap();
    assert_eq!(loaded, ds);
    for p in &loaded.problems {
        if let Some(ir) = &p.gold_ir {
            assert_eq!(to_canonical(ir).unwrap(), p.gold_canonical);
        }
    }
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .contains(r#""gold_canonical":{"variables":["cleaners","receptionists"],"rows":[[-1.0,-1.0,-100.0]"#));
}
