mod common;

use common::{fixture, model};
use optformkit_core::parser::{SECTION_OBJECTIVE, SECTION_VARIABLES};
use optformkit_core::{parse_ir, render_ir, DiagnosticKind, ParseOutcome, Relation};
use proptest::prelude::*;

fn check_outcome(text: &str, out: &ParseOutcome) -> Result<(), TestCaseError> {
    for d in &out.diagnostics {
        prop_assert!(d.span.0 <= d.span.1 && d.span.1 <= text.len(), "{:?}", d);
    }
    prop_assert!(out.consumed <= text.len());
    let missing_core = out.diagnostics.iter().any(|d| {
        d.is(DiagnosticKind::MissingSection)
            && matches!(d.subject.as_deref(), Some(SECTION_VARIABLES) | Some(SECTION_OBJECTIVE))
    });
    prop_assert_eq!(out.model.is_none(), missing_core, "{:?}", out.diagnostics);
    Ok(())
}

fn char_prefix(text: &str, cut: usize) -> &str {
    let mut cut = cut.min(text.len());
    while !text.is_char_boundary(cut) {
        cut -= 1;
    }
    &text[..cut]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn total_on_random_bytes(bytes in prop::collection::vec(any::<u8>(), 0..400)) {
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let out = parse_ir(&text);
        check_outcome(&text, &out)?;
    }

    #[test]
    fn total_on_ir_like_noise(text in r"(Variables:|Constraints:|Objective Function:|minimize|maximize|\(|\)|[-+*/]|<=|>=|=|≤|[0-9.]{1,4}|[a-z ]{1,6}|\n|`|\x22|#){0,60}") {
        let out = parse_ir(&text);
        check_outcome(&text, &out)?;
    }

    #[test]
    fn total_on_truncations(m in model(), frac in 0.0f64..1.0) {
        let text = render_ir(&m).unwrap();
        let cut = char_prefix(&text, (text.len() as f64 * frac) as usize);
        let out = parse_ir(cut);
        check_outcome(cut, &out)?;
        if let Some(parsed) = &out.model {
            prop_assert!(parsed.constraints.len() <= m.constraints.len());
        }
    }

    #[test]
    fn first_complete_block_wins(a in model(), b in model(), sep in "(\n|\n\n### Solution\n|\nExample Response: )") {
        let first = render_ir(&a).unwrap();
        let text = format!("{first}{sep}{}", render_ir(&b).unwrap());
        let out = parse_ir(&text);
        prop_assert_eq!(out.model.as_ref(), Some(&a));
        prop_assert_eq!(out.consumed, first.len());
        prop_assert_eq!(out.count(DiagnosticKind::ExtraBlock), 1);
        prop_assert_eq!(parse_ir(&text[..out.consumed]).model, out.model);
    }
}

#[test]
fn relation_spellings() {
    let cases = [
        ("<=", Relation::LE),
        ("≤", Relation::LE),
        ("=<", Relation::LE),
        (">=", Relation::GE),
        ("≥", Relation::GE),
        ("=>", Relation::GE),
        ("=", Relation::EQ),
        ("<", Relation::LT),
        (">", Relation::GT),
    ];
    for (op, rel) in cases {
        let text = format!(
            "Variables: x, y\nConstraints:\n(2.0) * x {op} (1.0) * y + (3.0)\nObjective Function:\nminimize (1.0) * x"
        );
        let model = parse_ir(&text).model.unwrap();
        assert_eq!(model.constraints.len(), 1, "{op}");
        assert_eq!(model.constraints[0].relation, rel, "{op}");
        assert_eq!(model.constraints[0].rhs.constant, 3.0);
    }
}

#[test]
fn fixture_prefixes_never_abort() {
    for name in [
        "pretrained_two_blocks.txt",
        "looping_response.txt",
        "finetuned_response.txt",
    ] {
        let text = fixture(name);
        for cut in 0..=text.len() {
            if text.is_char_boundary(cut) {
                let out = parse_ir(&text[..cut]);
                check_outcome(&text[..cut], &out).unwrap();
            }
        }
    }
}
