use std::sync::Arc;

use proptest::prelude::*;
use serde::Deserialize;

use super::*;
use crate::agent::{MockBackend, MockScript};

const PAIRS: &str = include_str!("../../fixtures/nile/pairs.jsonl");

#[derive(Deserialize)]
struct Expected {
    precision: f64,
    recall: f64,
    f1: f64,
    exact: bool,
    fuzzy: f64,
}

#[derive(Deserialize)]
struct Pair {
    name: String,
    gold_nile: String,
    predicted_nile: String,
    expected: Expected,
}

fn pairs() -> Vec<Pair> {
    PAIRS.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn fenced(text: &str) -> String {
    format!("```nile\n{text}\n```")
}

#[test]
fn frozen_exemplars_parse_and_round_trip() {
    let ex = exemplars();
    assert_eq!(ex.len(), 40);
    for text in ex {
        let ast = parse_nile(text).unwrap_or_else(|e| panic!("{text}\n{e}"));
        let rendered = ast.to_string();
        assert_eq!(rendered, text, "exemplars are stored in canonical form");
        assert_eq!(parse_nile(&rendered).unwrap(), ast);
    }
}

#[test]
fn frozen_exemplars_match_the_seeded_walk() {
    assert_eq!(generate_exemplars(40, 7), exemplars());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn walked_sentences_round_trip(seed in any::<u64>()) {
        for s in random_sentences(grammar(), 3, seed) {
            let ast = parse_nile(&s).unwrap();
            prop_assert_eq!(parse_nile(&ast.to_string()).unwrap(), ast.clone());
            prop_assert_eq!(fuzzy_match(&ast, &ast, &default_synonyms()), 1.0);
            prop_assert!(exact_match(&ast, &ast));
        }
    }

    #[test]
    fn fuzzy_is_symmetric_on_aligned_intents(seed in any::<u64>(), flip in 0usize..8) {
        let a = parse_nile(&random_sentences(grammar(), 1, seed)[0]).unwrap();
        // same structure, one argument altered
        let mut b = a.clone();
        let mut k = 0;
        for op in &mut b.operations {
            for t in &mut op.terms {
                for arg in &mut t.args {
                    if k == flip {
                        arg.value.push('x');
                    }
                    k += 1;
                }
            }
        }
        let syn = default_synonyms();
        let ab = fuzzy_match(&a, &b, &syn);
        let ba = fuzzy_match(&b, &a, &syn);
        prop_assert!((ab - ba).abs() < 1e-12);
        let floor = if exact_match(&a, &b) { 1.0 } else { 0.0 };
        prop_assert!(ab >= floor);
    }
}

/// Share of single-token deletions over the exemplars that fail to parse.
pub(crate) fn deletion_detection_rate() -> (usize, usize) {
    let (mut detected, mut total) = (0, 0);
    for text in exemplars() {
        let tokens = tokenize(text).unwrap();
        for skip in 0..tokens.len() {
            let mutated: Vec<&str> = tokens
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, t)| t.raw.as_str())
                .collect();
            total += 1;
            if parse_nile(&mutated.join(" ")).is_err() {
                detected += 1;
            }
        }
    }
    (detected, total)
}

#[test]
fn single_token_deletions_are_caught() {
    let (detected, total) = deletion_detection_rate();
    assert!(total > 500);
    assert!(detected as f64 / total as f64 >= 0.95, "{detected}/{total}");
}

#[test]
fn frozen_pairs_score_as_hand_computed() {
    let syn = default_synonyms();
    for p in pairs() {
        let gold = parse_nile(&p.gold_nile).unwrap();
        let record = NileRecord {
            id: Some(p.name.clone()),
            split: None,
            utterance: String::new(),
            gold_entities: intent_entities(&gold).into_iter().collect(),
            gold_nile: p.gold_nile.clone(),
        };
        let outcome = NileRepairOutcome {
            result: parse_nile(&p.predicted_nile).map_err(NileFailure::BudgetExhausted),
            text: p.predicted_nile.clone(),
            iterations_used: 0,
            backend_calls: 1,
        };
        let row = score_prediction(&record, &outcome, &syn);
        let e = &p.expected;
        assert!((row.precision - e.precision).abs() < 1e-12, "{} precision {}", p.name, row.precision);
        assert!((row.recall - e.recall).abs() < 1e-12, "{} recall", p.name);
        assert!((row.f1 - e.f1).abs() < 1e-12, "{} f1", p.name);
        assert_eq!(row.exact, e.exact, "{} exact", p.name);
        assert!((row.fuzzy - e.fuzzy).abs() < 1e-12, "{} fuzzy {}", p.name, row.fuzzy);
        assert!(row.fuzzy >= if row.exact { 1.0 } else { 0.0 });
    }
}

#[test]
fn repair_loop_counts_iterations() {
    let valid = fenced(exemplars()[0]);
    let m = MockBackend::new(MockScript::sequence([valid.clone()])).unwrap();
    let out = iterative_repair_nile("block udp", &m, DEFAULT_MAX_ITER);
    assert!(out.result.is_ok());
    assert_eq!((out.iterations_used, out.backend_calls), (0, 1));

    let bad = "define intent x for group('a')".to_string();
    let m = MockBackend::new(MockScript::sequence([bad.clone(), bad.clone(), bad.clone(), valid])).unwrap();
    let out = iterative_repair_nile("block udp", &m, DEFAULT_MAX_ITER);
    assert!(out.result.is_ok());
    assert_eq!((out.iterations_used, out.backend_calls), (3, 4));
    // each repair prompt carries the parser's message
    let reqs = m.requests();
    assert!(reqs[1].user.contains("syntax error at line 1, column 17: expected \":\", found 'for'"));
    assert!(reqs[0].system.contains("operations  ::= operation+"));

    let m = MockBackend::new(MockScript::repeating(bad)).unwrap();
    let out = iterative_repair_nile("block udp", &m, DEFAULT_MAX_ITER);
    assert!(matches!(out.result, Err(NileFailure::BudgetExhausted(_))));
    assert_eq!((out.iterations_used, out.backend_calls), (8, 9));
    assert_eq!(m.requests().iter().filter(|r| r.purpose == Purpose::Repair).count(), 8);
}

#[test]
fn backend_failure_is_reported() {
    let m = MockBackend::new(MockScript::default()).unwrap();
    let out = iterative_repair_nile("x", &m, 3);
    assert!(matches!(out.result, Err(NileFailure::Backend(_))));
}

#[test]
fn intent_text_extraction() {
    assert_eq!(extract_intent_text("Here:\n```nile\ndefine intent a:\n```\nbye"), "define intent a:");
    assert_eq!(extract_intent_text("  define intent a: add middlebox('x')\n"), "define intent a: add middlebox('x')");
}

#[test]
fn sample_dataset_is_consistent() {
    let records = load_dataset(SAMPLE_JSONL).unwrap();
    assert_eq!(records.len(), 24);
    assert_eq!(records, synthetic_dataset(24, 11));
    for r in &records {
        let gold = parse_nile(&r.gold_nile).unwrap();
        let tags = tagging(r.gold_entities.iter().map(|(a, b)| (a, b)));
        assert_eq!(tags, intent_entities(&gold));
    }
    assert!(load_dataset("{\"utterance\": \"x\", \"gold_entities\": [], \"gold_nile\": \"nope\"}").is_err());
    assert_eq!(load_dataset("not json").unwrap_err().line, 1);
}

#[test]
fn perfect_predictions_score_full_marks() {
    let records = load_dataset(SAMPLE_JSONL).unwrap();
    let backend_for = |r: &NileRecord| -> Arc<dyn LlmBackend> {
        Arc::new(MockBackend::new(MockScript::sequence([fenced(&r.gold_nile)])).unwrap())
    };
    let report = evaluate_nile(&records, &backend_for, DEFAULT_MAX_ITER, &default_synonyms());
    assert_eq!(report.count, 24);
    assert_eq!((report.precision, report.recall, report.f1), (1.0, 1.0, 1.0));
    assert_eq!((report.exact_match, report.fuzzy_match), (100.0, 100.0));
    assert_eq!(report.iteration_histogram[0], 24);
    assert_eq!(report.histogram_total(), 24);
}

#[test]
fn never_valid_predictions_fill_the_unparsed_bucket() {
    let records = load_dataset(SAMPLE_JSONL).unwrap();
    let backend_for = |_: &NileRecord| -> Arc<dyn LlmBackend> { Arc::new(MockBackend::new(MockScript::repeating("nope")).unwrap()) };
    let report = evaluate_nile(&records[..5], &backend_for, DEFAULT_MAX_ITER, &default_synonyms());
    assert_eq!(report.unparsed, 5);
    assert_eq!(report.histogram_total(), 5);
    assert!(report.rows.iter().all(|r| r.iterations_used == DEFAULT_MAX_ITER));
    assert_eq!(report.f1, 0.0);
}
