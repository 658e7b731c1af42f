//! Nile intents: grammar-driven parsing, entity and match metrics, and the
//! parse-error feedback loop.

mod ast;
mod generate;
mod grammar;
mod metrics;
mod parse;

use std::collections::BTreeMap;
use std::sync::{Arc, LazyLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::prompts::render;
use crate::agent::{LlmBackend, LlmRequest, Purpose};

pub use ast::{NileIntent, Operation, Spanned, Term, Verb};
pub use generate::{intent_entities, random_sentences, utterance};
pub use grammar::{Expr, Grammar, GrammarError, Production, TokenClass};
pub use metrics::{entity_prf, exact_match, fuzzy_match, tagging, EntityTagging, Prf, SynonymError, SynonymTable};
pub use parse::{parse_with, tokenize, Cst, Span, SyntaxError, Token, TokenKind};

pub const NILE_BNF: &str = include_str!("../../fixtures/nile/nile.bnf");
pub const SYNONYMS_JSON: &str = include_str!("../../fixtures/nile/synonyms.json");
/// Exemplar intents walked from the grammar (seed 7), separated by blank lines.
pub const EXEMPLARS: &str = include_str!("../../fixtures/nile/exemplars.nile");
/// Synthetic dataset in the JSON-lines record format.
pub const SAMPLE_JSONL: &str = include_str!("../../fixtures/nile/sample.jsonl");

pub const NILE_SYSTEM: &str = include_str!("../../prompts/nile_system.txt");
pub const NILE_USER: &str = include_str!("../../prompts/nile_user.txt");
pub const NILE_REPAIR_USER: &str = include_str!("../../prompts/nile_repair_user.txt");

pub const DEFAULT_MAX_ITER: u32 = 8;

static GRAMMAR: LazyLock<Grammar> = LazyLock::new(|| Grammar::parse(NILE_BNF).expect("bundled Nile grammar loads"));

pub fn grammar() -> &'static Grammar {
    &GRAMMAR
}

pub fn parse_nile(text: &str) -> Result<NileIntent, SyntaxError> {
    parse_with(grammar(), text).map(|cst| NileIntent::from_cst(&cst))
}

pub fn exemplars() -> Vec<&'static str> {
    EXEMPLARS.split("\n\n").map(str::trim).filter(|s| !s.is_empty()).collect()
}

pub fn default_synonyms() -> SynonymTable {
    SynonymTable::from_json(SYNONYMS_JSON).expect("bundled synonym table parses")
}

/// Canonically rendered intents walked from the bundled grammar.
pub fn generate_exemplars(count: usize, seed: u64) -> Vec<String> {
    random_sentences(grammar(), count, seed)
        .into_iter()
        .map(|s| parse_nile(&s).expect("walked sentences parse").to_string())
        .collect()
}

/// The intent text in a model reply: the first fenced block if there is
/// one, otherwise the whole reply.
pub fn extract_intent_text(output: &str) -> String {
    let mut lines = output.lines();
    while let Some(l) = lines.next() {
        if l.trim_start().starts_with("```") {
            let body: Vec<&str> = lines.by_ref().take_while(|l| !l.trim_start().starts_with("```")).collect();
            return body.join("\n").trim().to_string();
        }
    }
    output.trim().to_string()
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NileFailure {
    #[error("repair budget exhausted: {0}")]
    BudgetExhausted(SyntaxError),
    #[error("backend failure: {0}")]
    Backend(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NileRepairOutcome {
    pub result: Result<NileIntent, NileFailure>,
    /// Last intent text the model produced.
    pub text: String,
    pub iterations_used: u32,
    pub backend_calls: u32,
}

/// Generate, parse, and on a syntax error ask for a fix with the parser's
/// message, at most `max_iter` times.
pub fn iterative_repair_nile(utterance: &str, backend: &dyn LlmBackend, max_iter: u32) -> NileRepairOutcome {
    let system = render(NILE_SYSTEM, &BTreeMap::from([("grammar", NILE_BNF.trim_end())]));
    let mut calls = 0;
    let mut ask = |purpose, user: String| {
        calls += 1;
        backend.complete(&LlmRequest {
            purpose,
            system: system.clone(),
            user,
            history: Vec::new(),
        })
    };
    let first = ask(
        Purpose::Generate,
        render(NILE_USER, &BTreeMap::from([("utterance", utterance)])),
    );
    let mut text = match first {
        Ok(out) => extract_intent_text(&out),
        Err(e) => {
            return NileRepairOutcome {
                result: Err(NileFailure::Backend(e.to_string())),
                text: String::new(),
                iterations_used: 0,
                backend_calls: 1,
            }
        }
    };
    let mut iteration = 0;
    loop {
        let err = match parse_nile(&text) {
            Ok(intent) => {
                return NileRepairOutcome {
                    result: Ok(intent),
                    text,
                    iterations_used: iteration,
                    backend_calls: calls,
                }
            }
            Err(e) => e,
        };
        if iteration >= max_iter {
            return NileRepairOutcome {
                result: Err(NileFailure::BudgetExhausted(err)),
                text,
                iterations_used: iteration,
                backend_calls: calls,
            };
        }
        iteration += 1;
        let error = err.to_string();
        let user = render(
            NILE_REPAIR_USER,
            &BTreeMap::from([("utterance", utterance), ("faulty", text.as_str()), ("error", error.as_str())]),
        );
        match ask(Purpose::Repair, user) {
            Ok(out) => text = extract_intent_text(&out),
            Err(e) => {
                return NileRepairOutcome {
                    result: Err(NileFailure::Backend(e.to_string())),
                    text,
                    iterations_used: iteration,
                    backend_calls: calls,
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NileRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    /// `alpha` (synthetic) or `campi` (real-world) in the published splits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    pub utterance: String,
    pub gold_entities: Vec<(String, String)>,
    pub gold_nile: String,
}

#[derive(Debug, Error)]
#[error("dataset line {line}: {message}")]
pub struct DatasetError {
    pub line: usize,
    pub message: String,
}

/// One JSON record per line; blank lines are skipped. Gold intents must parse.
pub fn load_dataset(text: &str) -> Result<Vec<NileRecord>, DatasetError> {
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        let rec: NileRecord = serde_json::from_str(l).map_err(|e| DatasetError {
            line: i + 1,
            message: e.to_string(),
        })?;
        parse_nile(&rec.gold_nile).map_err(|e| DatasetError {
            line: i + 1,
            message: format!("gold intent: {e}"),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Records whose gold intent, utterance and entities all derive from a
/// grammar walk.
pub fn synthetic_dataset(count: usize, seed: u64) -> Vec<NileRecord> {
    generate_exemplars(count, seed)
        .into_iter()
        .enumerate()
        .map(|(i, text)| {
            let intent = parse_nile(&text).expect("exemplars parse");
            NileRecord {
                id: Some(format!("synthetic-{i:03}")),
                split: Some("alpha".into()),
                utterance: utterance(&intent),
                gold_entities: intent_entities(&intent).into_iter().collect(),
                gold_nile: text,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NileRow {
    pub id: String,
    pub utterance: String,
    pub predicted_nile: String,
    pub parsed: bool,
    pub iterations_used: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub exact: bool,
    pub fuzzy: f64,
    pub latency_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NileReport {
    pub count: usize,
    pub max_iter: u32,
    /// Means of the per-intent values, in [0, 1].
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Percentages.
    pub exact_match: f64,
    pub fuzzy_match: f64,
    /// Parsed intents by repair iterations used (index 0..=max_iter).
    pub iteration_histogram: Vec<usize>,
    /// Intents still unparseable when the budget ran out.
    pub unparsed: usize,
    pub rows: Vec<NileRow>,
}

impl NileReport {
    pub fn from_rows(rows: Vec<NileRow>, max_iter: u32) -> Self {
        let n = rows.len();
        let mean = |f: &dyn Fn(&NileRow) -> f64| {
            if n == 0 {
                0.0
            } else {
                rows.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let mut hist = vec![0; max_iter as usize + 1];
        let mut unparsed = 0;
        for r in &rows {
            if r.parsed {
                hist[(r.iterations_used as usize).min(max_iter as usize)] += 1;
            } else {
                unparsed += 1;
            }
        }
        Self {
            count: n,
            max_iter,
            precision: mean(&|r| r.precision),
            recall: mean(&|r| r.recall),
            f1: mean(&|r| r.f1),
            exact_match: mean(&|r| if r.exact { 1.0 } else { 0.0 }) * 100.0,
            fuzzy_match: mean(&|r| r.fuzzy) * 100.0,
            iteration_histogram: hist,
            unparsed,
            rows,
        }
    }

    /// Parsed plus unparsed intents; equals `count`.
    pub fn histogram_total(&self) -> usize {
        self.iteration_histogram.iter().sum::<usize>() + self.unparsed
    }
}

/// Scores one prediction against its record.
pub fn score_prediction(record: &NileRecord, outcome: &NileRepairOutcome, synonyms: &SynonymTable) -> NileRow {
    let gold_entities = tagging(record.gold_entities.iter().map(|(a, b)| (a, b)));
    let gold = parse_nile(&record.gold_nile).ok();
    let (parsed, prf, exact, fuzzy, failure) = match (&outcome.result, &gold) {
        (Ok(pred), Some(g)) => (
            true,
            entity_prf(&intent_entities(pred), &gold_entities),
            exact_match(pred, g),
            fuzzy_match(pred, g, synonyms),
            None,
        ),
        (Ok(_), None) => (true, entity_prf(&EntityTagging::new(), &gold_entities), false, 0.0, Some("gold intent does not parse".into())),
        (Err(e), _) => (false, entity_prf(&EntityTagging::new(), &gold_entities), false, 0.0, Some(e.to_string())),
    };
    NileRow {
        id: record.id.clone().unwrap_or_default(),
        utterance: record.utterance.clone(),
        predicted_nile: outcome.text.clone(),
        parsed,
        iterations_used: outcome.iterations_used,
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        exact,
        fuzzy,
        latency_ms: 0.0,
        failure,
    }
}

/// Runs the repair loop on every record; `backend_for` supplies the
/// backend per record.
pub fn evaluate_nile(
    records: &[NileRecord],
    backend_for: &dyn Fn(&NileRecord) -> Arc<dyn LlmBackend>,
    max_iter: u32,
    synonyms: &SynonymTable,
) -> NileReport {
    let rows = records
        .iter()
        .map(|r| {
            let t = Instant::now();
            let backend = backend_for(r);
            let outcome = iterative_repair_nile(&r.utterance, backend.as_ref(), max_iter);
            let mut row = score_prediction(r, &outcome, synonyms);
            row.latency_ms = t.elapsed().as_secs_f64() * 1000.0;
            row
        })
        .collect();
    NileReport::from_rows(rows, max_iter)
}

#[cfg(test)]
mod tests;
