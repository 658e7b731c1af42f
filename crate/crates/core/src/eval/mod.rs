//! Batch runs of the agent pipeline over a request set: per-trial outcomes,
//! per-variant aggregates, and the Nile repair analysis.

mod report;
mod spec;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    start_session, AgentConfig, AgentContext, AgentError, ConversationSession, LatencyBreakdown, LlmBackend, Phase,
    TurnRecord,
};
use crate::memory::Mode;
use crate::nile::NileReport;
use crate::state::{ChangeSet, NetworkState};
use crate::validator::{Rule, VerificationReport};

pub use report::{emit_report, latency_rows, markdown_table, Format, LatencyRow};
pub use spec::{BackendSource, BackendSpec, NileSpec, RunSpec};

/// The reconstructed Clos request set: 13 requests in the style of the
/// evaluation set, the first being the IP walkthrough request.
pub const CLOS_REQUESTS: &str = include_str!("../../fixtures/clos/requests.jsonl");

pub const DEFAULT_TRIALS: u32 = 3;
pub const DEFAULT_MAX_REPAIR: u32 = 5;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset line {line}: {message}")]
    Dataset { line: usize, message: String },
    #[error("judgment line {line}: {message}")]
    Judgment { line: usize, message: String },
    #[error("run spec: {0}")]
    Spec(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("backend: {0}")]
    Backend(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosRequest {
    pub request: String,
    pub devices: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judgment_hint: Option<String>,
}

pub fn load_requests(text: &str) -> Result<Vec<ClosRequest>, EvalError> {
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        let r: ClosRequest = serde_json::from_str(l).map_err(|e| EvalError::Dataset {
            line: i + 1,
            message: e.to_string(),
        })?;
        if r.request.trim().is_empty() {
            return Err(EvalError::Dataset {
                line: i + 1,
                message: "empty request".into(),
            });
        }
        out.push(r);
    }
    Ok(out)
}

pub fn clos_requests() -> Vec<ClosRequest> {
    load_requests(CLOS_REQUESTS).expect("bundled request set loads")
}

/// Pipeline setups compared in the accuracy table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "verifier-only")]
    VerifierOnly,
    #[serde(rename = "retrieval-nl-only")]
    RetrievalNlOnly,
    #[serde(rename = "retrieval-raw+verifier")]
    RetrievalRawVerifier,
    #[serde(rename = "retrieval-nl+verifier")]
    RetrievalNlVerifier,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::VerifierOnly,
        Variant::RetrievalNlOnly,
        Variant::RetrievalRawVerifier,
        Variant::RetrievalNlVerifier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::VerifierOnly => "verifier-only",
            Variant::RetrievalNlOnly => "retrieval-nl-only",
            Variant::RetrievalRawVerifier => "retrieval-raw+verifier",
            Variant::RetrievalNlVerifier => "retrieval-nl+verifier",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::VerifierOnly => "Verifier Only",
            Variant::RetrievalNlOnly => "State Retrieval (NL Output) Only",
            Variant::RetrievalRawVerifier => "State Retrieval (Raw Output) + Verifier",
            Variant::RetrievalNlVerifier => "State Retrieval (NL Output) + Verifier",
        }
    }

    /// Harness sessions never wait for the operator.
    pub fn agent_config(self, max_repair_iterations: u32) -> AgentConfig {
        let (state_retrieval, repair_enabled, retrieval_mode) = match self {
            Variant::VerifierOnly => (false, true, Mode::Nl),
            Variant::RetrievalNlOnly => (true, false, Mode::Nl),
            Variant::RetrievalRawVerifier => (true, true, Mode::Raw),
            Variant::RetrievalNlVerifier => (true, true, Mode::Nl),
        };
        AgentConfig {
            max_repair_iterations,
            auto_confirm: true,
            state_retrieval,
            repair_enabled,
            retrieval_mode,
            ..AgentConfig::default()
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| EvalError::Spec(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrialKey {
    pub variant: Variant,
    pub input: usize,
    pub trial: u32,
}

/// Supplies the backend for one trial. Mocks are built fresh per trial so
/// scripts start from their first call.
pub type BackendFactory<'a> = dyn Fn(&TrialKey) -> Arc<dyn LlmBackend> + Sync + 'a;

/// Findings a schema-only checker would report: the change set does not
/// parse, or names paths, keys or values the schema rejects.
pub fn syntax_clean(report: &VerificationReport) -> bool {
    !report
        .errors()
        .any(|f| matches!(f.rule, Rule::Syntax | Rule::UnknownPath | Rule::KeyMissing | Rule::TypeMismatch))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub variant: Variant,
    pub input: usize,
    pub trial: u32,
    pub request: String,
    pub session_id: String,
    /// The first generated output passed the schema checks.
    pub syntax_pass_initial: bool,
    /// The last verified output passed the schema checks.
    pub syntax_pass: bool,
    /// Applied cleanly and the resulting state validated.
    pub deployable: bool,
    pub iterations: u32,
    pub verifier_calls: u32,
    pub latency: LatencyBreakdown,
    pub final_change_set: Option<ChangeSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Operator label merged from a judgment file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judged_correct: Option<bool>,
    #[serde(skip)]
    pub transcript: Vec<TurnRecord>,
}

impl TrialRow {
    pub fn key(&self) -> TrialKey {
        TrialKey {
            variant: self.variant,
            input: self.input,
            trial: self.trial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub trials: usize,
    /// Percentages over all trials.
    pub syntax_pass_initial: f64,
    pub syntax_pass: f64,
    pub deployable: f64,
    /// Share of initially malformed outputs that ended syntax-clean.
    pub syntax_repaired: f64,
    /// Share of trials that needed at least one repair.
    pub needs_repair: f64,
    /// Over judged trials only; `None` when no trial is judged.
    pub judged_accuracy: Option<f64>,
    pub judged: usize,
    pub mean_latency: LatencyBreakdown,
    /// Deployable trials by repair iterations used (index 0..=max).
    pub iteration_histogram: Vec<usize>,
    pub undeployed: usize,
}

fn pct(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 * 100.0 / d as f64
    }
}

/// Component-wise mean; repair iterations a trial never reached count as 0.
pub fn mean_latency(rows: &[TrialRow]) -> LatencyBreakdown {
    let mut m = LatencyBreakdown::default();
    if rows.is_empty() {
        return m;
    }
    let n = rows.len() as f64;
    let width = rows.iter().map(|r| r.latency.repair_ms.len()).max().unwrap_or(0);
    m.repair_ms = vec![0.0; width];
    for r in rows {
        let l = &r.latency;
        m.retrieval_ms += l.retrieval_ms / n;
        m.generation_ms += l.generation_ms / n;
        m.verification_ms += l.verification_ms / n;
        m.user_wait_ms += l.user_wait_ms / n;
        m.deployment_ms += l.deployment_ms / n;
        for (i, v) in l.repair_ms.iter().enumerate() {
            m.repair_ms[i] += v / n;
        }
    }
    m.total_ms = m.component_sum();
    m
}

impl Aggregates {
    pub fn from_rows(rows: &[TrialRow], max_repair_iterations: u32) -> Self {
        let n = rows.len();
        let count = |f: &dyn Fn(&TrialRow) -> bool| rows.iter().filter(|r| f(r)).count();
        let malformed = count(&|r| !r.syntax_pass_initial);
        let judged = count(&|r| r.judged_correct.is_some());
        let mut hist = vec![0; max_repair_iterations as usize + 1];
        let mut undeployed = 0;
        for r in rows {
            match hist.get_mut(r.iterations as usize) {
                Some(bin) if r.deployable => *bin += 1,
                _ => undeployed += 1,
            }
        }
        Self {
            trials: n,
            syntax_pass_initial: pct(n - malformed, n),
            syntax_pass: pct(count(&|r| r.syntax_pass), n),
            deployable: pct(count(&|r| r.deployable), n),
            syntax_repaired: pct(count(&|r| !r.syntax_pass_initial && r.syntax_pass), malformed),
            needs_repair: pct(count(&|r| r.iterations >= 1), n),
            judged_accuracy: (judged > 0).then(|| pct(count(&|r| r.judged_correct == Some(true)), judged)),
            judged,
            mean_latency: mean_latency(rows),
            iteration_histogram: hist,
            undeployed,
        }
    }

    pub fn histogram_total(&self) -> usize {
        self.iteration_histogram.iter().sum::<usize>() + self.undeployed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: Variant,
    pub label: String,
    pub rows: Vec<TrialRow>,
    pub aggregates: Aggregates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub inputs: usize,
    pub trials: u32,
    pub max_repair_iterations: u32,
    pub variants: Vec<VariantReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nile: Option<NileReport>,
}

impl RunReport {
    pub fn rows(&self) -> impl Iterator<Item = &TrialRow> {
        self.variants.iter().flat_map(|v| v.rows.iter())
    }

    /// Recomputes every aggregate from the rows.
    pub fn refresh(&mut self) {
        for v in &mut self.variants {
            v.aggregates = Aggregates::from_rows(&v.rows, self.max_repair_iterations);
        }
    }

    /// A copy with wall-clock and random identifiers cleared, for comparing
    /// runs.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for v in &mut r.variants {
            for row in &mut v.rows {
                row.latency = LatencyBreakdown::default();
                row.session_id.clear();
                row.transcript.clear();
            }
        }
        if let Some(n) = &mut r.nile {
            for row in &mut n.rows {
                row.latency_ms = 0.0;
            }
        }
        r.refresh();
        r
    }
}

#[derive(Debug, Deserialize)]
struct Judgment {
    variant: Variant,
    input: usize,
    trial: u32,
    correct: bool,
}

/// Merges operator labels, one JSON object per line:
/// `{"variant": "...", "input": 0, "trial": 0, "correct": true}`.
pub fn merge_judgments(report: &mut RunReport, text: &str) -> Result<usize, EvalError> {
    let mut labels = BTreeMap::new();
    for (i, l) in text.lines().enumerate() {
        if l.trim().is_empty() {
            continue;
        }
        let j: Judgment = serde_json::from_str(l).map_err(|e| EvalError::Judgment {
            line: i + 1,
            message: e.to_string(),
        })?;
        let key = TrialKey {
            variant: j.variant,
            input: j.input,
            trial: j.trial,
        };
        if !report.rows().any(|r| r.key() == key) {
            return Err(EvalError::Judgment {
                line: i + 1,
                message: format!("no trial {} input {} trial {}", j.variant.name(), j.input, j.trial),
            });
        }
        labels.insert(key, j.correct);
    }
    for v in &mut report.variants {
        for row in &mut v.rows {
            if let Some(c) = labels.get(&row.key()) {
                row.judged_correct = Some(*c);
            }
        }
    }
    report.refresh();
    Ok(labels.len())
}

fn drive_trial(session: &mut ConversationSession, ctx: &AgentContext) -> (Option<bool>, Result<(), AgentError>) {
    let mut first = None;
    while !session.is_finished() {
        if session.awaiting_user() {
            return (first, Err(AgentError::AwaitingUser(session.phase)));
        }
        if let Err(e) = session.step(ctx) {
            return (first, Err(e));
        }
        if first.is_none() && session.turns.last().is_some_and(|t| t.action == crate::agent::TurnAction::Verify) {
            first = session.last_report.as_ref().map(syntax_clean);
        }
    }
    (first, Ok(()))
}

fn run_trial(key: TrialKey, req: &ClosRequest, spec: &RunSpec, state: &NetworkState, ctx: &AgentContext, backend_for: &BackendFactory<'_>) -> TrialRow {
    let mut row = TrialRow {
        variant: key.variant,
        input: key.input,
        trial: key.trial,
        request: req.request.clone(),
        session_id: String::new(),
        syntax_pass_initial: false,
        syntax_pass: false,
        deployable: false,
        iterations: 0,
        verifier_calls: 0,
        latency: LatencyBreakdown::default(),
        final_change_set: None,
        failure: None,
        judged_correct: None,
        transcript: Vec::new(),
    };
    if let Some(d) = req.devices.iter().find(|d| !state.devices.contains_key(d.as_str())) {
        row.failure = Some(format!("request names unknown device {d}"));
        return row;
    }
    let config = key.variant.agent_config(spec.max_repair_iterations);
    let mut session = match start_session(&req.request, state.clone(), config) {
        Ok(s) => s,
        Err(e) => {
            row.failure = Some(e.to_string());
            return row;
        }
    };
    let ctx = ctx.with_backend(backend_for(&key));
    let (first, result) = drive_trial(&mut session, &ctx);
    row.session_id = session.session_id.clone();
    row.syntax_pass_initial = first.unwrap_or(false);
    row.syntax_pass = session.last_report.as_ref().is_some_and(syntax_clean);
    row.deployable = session.phase == Phase::Done && session.deployed_state.is_some();
    row.iterations = session.iteration;
    row.verifier_calls = session.verifier_calls;
    row.latency = session.latency.clone();
    row.final_change_set = session.working_change_set.clone();
    row.failure = match result {
        Err(e) => Some(e.to_string()),
        Ok(()) => session.failure.clone(),
    };
    row.transcript = session.turns;
    row
}

/// Runs every variant × input × trial in harness mode. Per-trial failures
/// land in the rows; the run itself does not fail.
pub fn run(
    spec: &RunSpec,
    requests: &[ClosRequest],
    state: &NetworkState,
    ctx: &AgentContext,
    backend_for: &BackendFactory<'_>,
) -> RunReport {
    // ingest once up front so concurrent trials only read the store
    if ctx.memory.revision() != Some(state.revision) {
        let _ = ctx.memory.chunk_and_ingest(state, &ctx.schema, &ctx.schema_modules);
    }
    let workers = spec.parallelism.max(1);
    let variants = spec
        .variants
        .iter()
        .map(|&variant| {
            let keys: Vec<TrialKey> = (0..requests.len())
                .flat_map(|input| (0..spec.trials).map(move |trial| TrialKey { variant, input, trial }))
                .collect();
            let mut rows: Vec<TrialRow> = Vec::with_capacity(keys.len());
            for chunk in keys.chunks(workers) {
                thread::scope(|s| {
                    let handles: Vec<_> = chunk
                        .iter()
                        .map(|&k| s.spawn(move || run_trial(k, &requests[k.input], spec, state, ctx, backend_for)))
                        .collect();
                    rows.extend(handles.into_iter().map(|h| h.join().expect("trial thread")));
                });
            }
            let aggregates = Aggregates::from_rows(&rows, spec.max_repair_iterations);
            VariantReport {
                variant,
                label: variant.label().to_string(),
                rows,
                aggregates,
            }
        })
        .collect();
    RunReport {
        inputs: requests.len(),
        trials: spec.trials,
        max_repair_iterations: spec.max_repair_iterations,
        variants,
        nile: None,
    }
}
