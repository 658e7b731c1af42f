use std::collections::BTreeSet;
use std::sync::{Arc, LazyLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::backend::{ChatMessage, LlmBackend, LlmRequest, MockBackend, MockScript, Purpose, ScriptedReply};
use super::extract::{extract_change_set, python_block, ExtractError};
use super::prompts::{self, GenerationContext, Prompt, RepairContext};
use super::{Actor, AgentConfig, AgentError, Component, LatencyBreakdown, Phase, TurnAction, TurnRecord, UserReply};
use crate::memory::{MemoryStore, RetrievalHit, StoreKind};
use crate::schema::{ResolvedSchema, SchemaModule};
use crate::state::{apply_change_set, diff_states, Action, ChangeSet, NetworkState};
use crate::validator::{validate_after_apply, VerificationReport};

/// Shared services a session calls into.
#[derive(Clone)]
pub struct AgentContext {
    pub backend: Arc<dyn LlmBackend>,
    pub memory: Arc<MemoryStore>,
    pub schema: Arc<ResolvedSchema>,
    pub schema_modules: Arc<Vec<SchemaModule>>,
}

impl AgentContext {
    pub fn with_backend(&self, backend: Arc<dyn LlmBackend>) -> Self {
        Self {
            backend,
            ..self.clone()
        }
    }
}

/// Stand-in for the state placeholder when state retrieval is disabled.
pub const NO_STATE_TEXT: &str = "No information about the current network state is available.";

static ENTITY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b\d{1,3}(?:\.\d{1,3}){3}(?:/\d{1,2})?\b|\b[A-Za-z]+Ethernet\d+\b|\bEthernet\d+\b|\b[SL]\d+\b")
        .expect("entity regex")
});

fn entities(text: &str) -> BTreeSet<String> {
    ENTITY.find_iter(text).map(|m| m.as_str().to_string()).collect()
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn hits_payload(hits: &[RetrievalHit]) -> Value {
    json!({
        "doc_ids": hits.iter().map(|h| h.document.doc_id.as_str()).collect::<Vec<_>>(),
        "scores": hits.iter().map(|h| h.score).collect::<Vec<_>>(),
    })
}

/// One change-set operation as a diff line: `+ L0 INTERFACE_IPPREFIX_LIST name=Ethernet4 ...`.
pub fn diff_lines(cs: &ChangeSet) -> Vec<String> {
    let mut out = Vec::new();
    for dev in &cs.0 {
        for op in &dev.config {
            let sign = match op.action {
                Action::Append => '+',
                Action::Remove => '-',
            };
            let target = op.path.names().last().unwrap_or("").to_string();
            let fields: Vec<String> = op.value.iter().map(|(k, v)| format!("{k}={v}")).collect();
            out.push(format!("{sign} {} {target} {}", dev.device, fields.join(" ")).trim_end().to_string());
        }
    }
    out
}

pub struct ConversationSession {
    pub session_id: String,
    pub phase: Phase,
    pub turns: Vec<TurnRecord>,
    pub working_change_set: Option<ChangeSet>,
    pub iteration: u32,
    pub latency: LatencyBreakdown,
    pub config: AgentConfig,
    pub query: String,
    pub base_state: NetworkState,
    pub deployed_state: Option<NetworkState>,
    pub last_report: Option<VerificationReport>,
    pub failure: Option<String>,
    /// Operator replies that feed later prompts, oldest first.
    pub clarifications: Vec<String>,
    pub verifier_calls: u32,
    plan: Option<String>,
    agreed_plan: Option<String>,
    clarify_rounds: u32,
    rejections: u32,
    awaiting_user: bool,
    waiting_since: Option<Instant>,
    retrieved_state: Option<String>,
    retrieved_docs: Option<String>,
    repair_docs: Option<String>,
    needs_repair: bool,
    last_output: Option<String>,
    extract_error: Option<ExtractError>,
    history: Vec<ChatMessage>,
}

pub fn start_session(query: &str, state: NetworkState, config: AgentConfig) -> Result<ConversationSession, AgentError> {
    if query.trim().is_empty() {
        return Err(AgentError::EmptyQuery);
    }
    if config.max_repair_iterations < 1 {
        return Err(AgentError::BadConfig("max_repair_iterations must be at least 1".into()));
    }
    let mut s = ConversationSession {
        session_id: uuid::Uuid::new_v4().to_string(),
        phase: Phase::Retrieving,
        turns: Vec::new(),
        working_change_set: None,
        iteration: 0,
        latency: LatencyBreakdown::default(),
        config,
        query: query.to_string(),
        base_state: state,
        deployed_state: None,
        last_report: None,
        failure: None,
        clarifications: Vec::new(),
        verifier_calls: 0,
        plan: None,
        agreed_plan: None,
        clarify_rounds: 0,
        rejections: 0,
        awaiting_user: false,
        waiting_since: None,
        retrieved_state: None,
        retrieved_docs: None,
        repair_docs: None,
        needs_repair: false,
        last_output: None,
        extract_error: None,
        history: Vec::new(),
    };
    s.record(Actor::User, TurnAction::Query, Value::String(query.to_string()), None, Duration::ZERO);
    Ok(s)
}

impl ConversationSession {
    pub fn is_finished(&self) -> bool {
        matches!(self.phase, Phase::Done | Phase::Failed)
    }

    /// True while the session cannot advance without an operator reply.
    pub fn awaiting_user(&self) -> bool {
        self.awaiting_user && !self.is_finished()
    }

    fn devices(&self) -> Vec<String> {
        prompts::prompt_device_order(self.base_state.device_names())
    }

    fn record(&mut self, actor: Actor, action: TurnAction, payload: Value, prompt: Option<String>, wall: Duration) {
        let index = self.turns.len();
        self.turns.push(TurnRecord {
            index,
            actor,
            action,
            phase: self.phase,
            timestamp_ms: now_ms(),
            wall_time_ms: wall.as_secs_f64() * 1000.0,
            payload,
            prompt,
        });
    }

    /// Records the turn after the phase change so `phase` reads as the state
    /// the turn left the session in.
    fn finish_turn(
        &mut self,
        actor: Actor,
        action: TurnAction,
        payload: Value,
        prompt: Option<String>,
        started: Instant,
        component: Component,
    ) {
        let wall = started.elapsed();
        let repair_index = self.iteration.saturating_sub(1) as usize;
        self.latency.add(component, repair_index, wall);
        self.record(actor, action, payload, prompt, wall);
    }

    fn fail(&mut self, cause: impl Into<String>) {
        self.phase = Phase::Failed;
        self.failure = Some(cause.into());
        self.awaiting_user = false;
    }

    fn retrieval_query(&self) -> String {
        let mut q = self.query.clone();
        for c in &self.clarifications {
            q.push('\n');
            q.push_str(c);
        }
        q
    }

    /// The request placeholder: the query plus anything the operator added.
    pub fn request_text(&self) -> String {
        let mut s = self.query.clone();
        if !self.clarifications.is_empty() {
            s.push_str("\n\nOperator clarifications:");
            for c in &self.clarifications {
                s.push_str("\n- ");
                s.push_str(c);
            }
        }
        if let Some(plan) = &self.agreed_plan {
            s.push_str("\n\nAgreed plan:\n");
            s.push_str(plan.trim_end());
        }
        s
    }

    fn topology_text(&self) -> String {
        if self.base_state.topology.is_empty() {
            return String::new();
        }
        let mut s = String::from("\nLinks:");
        for l in &self.base_state.topology {
            s.push_str(&format!("\n  {} {} <-> {} {}", l.device_a, l.port_a, l.device_b, l.port_b));
        }
        s
    }

    /// Advances by exactly one agent action and returns the turn it recorded.
    pub fn step(&mut self, ctx: &AgentContext) -> Result<&TurnRecord, AgentError> {
        if self.is_finished() {
            return Err(AgentError::Finished(self.phase));
        }
        if self.awaiting_user {
            return Err(AgentError::AwaitingUser(self.phase));
        }
        match self.phase {
            Phase::AwaitingQuery => return Err(AgentError::WrongPhase { phase: self.phase, operation: "step" }),
            Phase::Retrieving if self.retrieved_state.is_none() => self.retrieve_state(ctx),
            Phase::Retrieving => self.retrieve_docs(ctx),
            Phase::Clarifying => self.propose_plan(ctx),
            Phase::Generating if self.needs_repair && self.repair_docs.is_none() => self.retrieve_repair_docs(ctx),
            Phase::Generating if self.needs_repair => self.repair_generate(ctx),
            Phase::Generating => self.generate(ctx),
            Phase::Verifying => self.verify(ctx),
            Phase::AwaitingConfirmation => self.request_confirmation(ctx),
            Phase::Deploying => self.deploy(ctx),
            Phase::Done | Phase::Failed => unreachable!("finished sessions return early"),
        }
        Ok(self.turns.last().expect("a step always records a turn"))
    }

    fn ensure_ingested(&self, ctx: &AgentContext) -> Result<(), String> {
        if ctx.memory.revision() != Some(self.base_state.revision) {
            ctx.memory
                .chunk_and_ingest(&self.base_state, &ctx.schema, &ctx.schema_modules)
                .map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    fn retrieve_state(&mut self, ctx: &AgentContext) {
        let t = Instant::now();
        if !self.config.state_retrieval {
            self.retrieved_state = Some(NO_STATE_TEXT.to_string());
            self.finish_turn(
                Actor::Memory,
                TurnAction::RetrieveState,
                json!({"skipped": true}),
                None,
                t,
                Component::Retrieval,
            );
            return;
        }
        let query = self.retrieval_query();
        let result = self.ensure_ingested(ctx).and_then(|()| {
            ctx.memory
                .query_top_k(&query, StoreKind::State, self.config.retrieval_k, self.config.retrieval_mode)
                .map_err(|e| e.to_string())
        });
        match result {
            Ok(hits) => {
                let mut text = hits.iter().map(|h| h.document.text.trim_end()).collect::<Vec<_>>().join("\n");
                text.push_str(&self.topology_text());
                self.retrieved_state = Some(text);
                let mut payload = hits_payload(&hits);
                payload["text"] = Value::String(self.retrieved_state.clone().unwrap_or_default());
                self.finish_turn(Actor::Memory, TurnAction::RetrieveState, payload, None, t, Component::Retrieval);
            }
            Err(e) => {
                self.fail(format!("state retrieval failed: {e}"));
                self.finish_turn(Actor::Memory, TurnAction::RetrieveState, json!({"error": e}), None, t, Component::Retrieval);
            }
        }
    }

    fn retrieve_ir(&self, ctx: &AgentContext, query: &str) -> Result<(String, Vec<RetrievalHit>), String> {
        self.ensure_ingested(ctx)?;
        let hits = ctx
            .memory
            .query_top_k(query, StoreKind::IrDoc, self.config.retrieval_k, self.config.retrieval_mode)
            .map_err(|e| e.to_string())?;
        let text = hits.iter().map(|h| h.document.text.trim_end()).collect::<Vec<_>>().join("\n\n");
        Ok((text, hits))
    }

    fn retrieve_docs(&mut self, ctx: &AgentContext) {
        let t = Instant::now();
        match self.retrieve_ir(ctx, &self.retrieval_query()) {
            Ok((text, hits)) => {
                self.retrieved_docs = Some(text.clone());
                self.phase = if self.config.auto_confirm || self.clarify_rounds >= self.config.max_clarify_rounds {
                    Phase::Generating
                } else {
                    Phase::Clarifying
                };
                let mut payload = hits_payload(&hits);
                payload["text"] = Value::String(text);
                self.finish_turn(Actor::Memory, TurnAction::RetrieveDocs, payload, None, t, Component::Retrieval);
            }
            Err(e) => {
                self.fail(format!("documentation retrieval failed: {e}"));
                self.finish_turn(Actor::Memory, TurnAction::RetrieveDocs, json!({"error": e}), None, t, Component::Retrieval);
            }
        }
    }

    fn call(&self, ctx: &AgentContext, purpose: Purpose, prompt: &Prompt, history: Vec<ChatMessage>) -> Result<String, String> {
        ctx.backend
            .complete(&LlmRequest {
                purpose,
                system: prompt.system.clone(),
                user: prompt.user.clone(),
                history,
            })
            .map_err(|e| e.to_string())
    }

    fn propose_plan(&mut self, ctx: &AgentContext) {
        let t = Instant::now();
        let state = self.retrieved_state.clone().unwrap_or_default();
        let prompt = match prompts::build_plan_prompt(&self.devices(), &state, &self.request_text()) {
            Ok(p) => p,
            Err(e) => {
                self.fail(e.to_string());
                self.finish_turn(Actor::Agent, TurnAction::ProposePlan, json!({"error": e.to_string()}), None, t, Component::Generation);
                return;
            }
        };
        match self.call(ctx, Purpose::Plan, &prompt, self.history.clone()) {
            Ok(output) => {
                let action = if output.trim_start().starts_with("QUESTION:") {
                    TurnAction::AskUser
                } else {
                    self.plan = Some(output.clone());
                    TurnAction::ProposePlan
                };
                self.history.push(ChatMessage::assistant(output.clone()));
                self.clarify_rounds += 1;
                self.awaiting_user = true;
                self.waiting_since = Some(Instant::now());
                self.finish_turn(Actor::Agent, action, Value::String(output), Some(prompt.user), t, Component::Generation);
            }
            Err(e) => {
                self.fail(e.clone());
                self.finish_turn(Actor::Agent, TurnAction::ProposePlan, json!({"error": e}), Some(prompt.user), t, Component::Generation);
            }
        }
    }

    fn take_output(&mut self, output: String) {
        match extract_change_set(&output) {
            Ok(cs) => {
                self.working_change_set = Some(cs);
                self.extract_error = None;
            }
            Err(e) => {
                self.working_change_set = None;
                self.extract_error = Some(e);
            }
        }
        self.last_output = Some(output);
        self.phase = Phase::Verifying;
    }

    fn generate(&mut self, ctx: &AgentContext) {
        let t = Instant::now();
        let devices = self.devices();
        let request = self.request_text();
        let built = prompts::build_generation_prompt(GenerationContext {
            devices: &devices,
            network_state: self.retrieved_state.as_deref().unwrap_or(""),
            yang_modules: self.retrieved_docs.as_deref().unwrap_or(""),
            user_request: &request,
        });
        let prompt = match built {
            Ok(p) => p,
            Err(e) => {
                self.fail(e.to_string());
                self.finish_turn(Actor::Generator, TurnAction::Generate, json!({"error": e.to_string()}), None, t, Component::Generation);
                return;
            }
        };
        match self.call(ctx, Purpose::Generate, &prompt, Vec::new()) {
            Ok(output) => {
                self.take_output(output.clone());
                self.finish_turn(Actor::Generator, TurnAction::Generate, Value::String(output), Some(prompt.user), t, Component::Generation);
            }
            Err(e) => {
                self.fail(e.clone());
                self.finish_turn(Actor::Generator, TurnAction::Generate, json!({"error": e}), Some(prompt.user), t, Component::Generation);
            }
        }
    }

    fn error_log(&self) -> String {
        self.last_report.as_ref().map(VerificationReport::error_log).unwrap_or_default()
    }

    fn retrieve_repair_docs(&mut self, ctx: &AgentContext) {
        let t = Instant::now();
        // charged to the repair iteration this retrieval serves
        let next = self.iteration as usize;
        let log = self.error_log();
        match self.retrieve_ir(ctx, &log) {
            Ok((text, hits)) => {
                self.repair_docs = Some(text.clone());
                let mut payload = hits_payload(&hits);
                payload["text"] = Value::String(text);
                payload["query"] = Value::String(log);
                let wall = t.elapsed();
                self.latency.add(Component::Repair, next, wall);
                self.record(Actor::Memory, TurnAction::RetrieveDocs, payload, None, wall);
            }
            Err(e) => {
                self.fail(format!("documentation retrieval failed: {e}"));
                let wall = t.elapsed();
                self.latency.add(Component::Repair, next, wall);
                self.record(Actor::Memory, TurnAction::RetrieveDocs, json!({"error": e}), None, wall);
            }
        }
    }

    fn repair_generate(&mut self, ctx: &AgentContext) {
        let t = Instant::now();
        let last = self.last_output.clone().unwrap_or_default();
        let faulty = python_block(&last).unwrap_or(last);
        let faulty = if faulty.trim().is_empty() { "(empty output)".to_string() } else { faulty };
        let log = self.error_log();
        let built = prompts::build_repair_prompt(RepairContext {
            faulty_config: &faulty,
            error_logs: &log,
            retrieved_modules: self.repair_docs.as_deref().unwrap_or(""),
        });
        self.iteration += 1;
        self.needs_repair = false;
        self.repair_docs = None;
        let prompt = match built {
            Ok(p) => p,
            Err(e) => {
                self.fail(e.to_string());
                self.finish_turn(Actor::Generator, TurnAction::RepairGenerate, json!({"error": e.to_string()}), None, t, Component::Repair);
                return;
            }
        };
        match self.call(ctx, Purpose::Repair, &prompt, Vec::new()) {
            Ok(output) => {
                self.take_output(output.clone());
                self.finish_turn(Actor::Generator, TurnAction::RepairGenerate, Value::String(output), Some(prompt.user), t, Component::Repair);
            }
            Err(e) => {
                self.fail(e.clone());
                self.finish_turn(Actor::Generator, TurnAction::RepairGenerate, json!({"error": e}), Some(prompt.user), t, Component::Repair);
            }
        }
    }

    fn verify(&mut self, ctx: &AgentContext) {
        let t = Instant::now();
        let report = match (&self.extract_error, &self.working_change_set) {
            (Some(e), _) => VerificationReport::syntax_error(e.to_string()),
            (None, Some(cs)) => validate_after_apply(&self.base_state, cs, &ctx.schema),
            (None, None) => VerificationReport::syntax_error("no change set was produced"),
        }
        .with_iteration(self.iteration);
        self.verifier_calls += 1;
        if report.passed() {
            self.phase = if self.config.auto_confirm {
                Phase::Deploying
            } else {
                Phase::AwaitingConfirmation
            };
        } else if !self.config.repair_enabled || self.iteration >= self.config.max_repair_iterations {
            self.fail(format!("verification still failing after {} repair iterations", self.iteration));
        } else {
            self.needs_repair = true;
            self.repair_docs = None;
            self.phase = Phase::Generating;
        }
        let payload = serde_json::to_value(&report).expect("report serializes");
        self.last_report = Some(report);
        self.finish_turn(Actor::Verifier, TurnAction::Verify, payload, None, t, Component::Verification);
    }

    fn request_confirmation(&mut self, ctx: &AgentContext) {
        let t = Instant::now();
        let cs = self.working_change_set.clone().unwrap_or_default();
        let diff = apply_change_set(&self.base_state, &cs, &ctx.schema)
            .ok()
            .and_then(|next| diff_states(&self.base_state, &next, &ctx.schema).ok())
            .unwrap_or_else(|| cs.clone());
        let payload = json!({
            "change_set": serde_json::to_value(&cs).expect("change set serializes"),
            "diff": diff_lines(&diff),
        });
        self.awaiting_user = true;
        self.waiting_since = Some(Instant::now());
        self.finish_turn(Actor::Agent, TurnAction::ConfirmRequest, payload, None, t, Component::Generation);
    }

    fn deploy(&mut self, ctx: &AgentContext) {
        let t = Instant::now();
        let cs = self.working_change_set.clone().unwrap_or_default();
        match apply_change_set(&self.base_state, &cs, &ctx.schema) {
            Ok(next) => {
                let payload = json!({"revision": next.revision, "operations": cs.op_count()});
                self.deployed_state = Some(next);
                self.phase = Phase::Done;
                self.finish_turn(Actor::Agent, TurnAction::Deploy, payload, None, t, Component::Deployment);
            }
            Err(e) => {
                self.fail(format!("deployment failed: {e}"));
                self.finish_turn(Actor::Agent, TurnAction::Deploy, json!({"error": e.to_string()}), None, t, Component::Deployment);
            }
        }
    }

    fn has_new_entities(&self, reply: &str) -> bool {
        let mut known = entities(&self.query);
        for c in &self.clarifications {
            known.extend(entities(c));
        }
        entities(reply).difference(&known).next().is_some()
    }

    fn after_rejection(&mut self, reason: Option<String>) {
        self.rejections += 1;
        if self.rejections >= self.config.max_clarify_rounds {
            self.fail(format!("operator rejected the proposal {} times", self.rejections));
            return;
        }
        if let Some(r) = reason.filter(|r| !r.trim().is_empty()) {
            self.clarifications.push(r);
        }
    }

    /// Records the operator's reply and moves the session on.
    pub fn submit_user_reply(&mut self, reply: UserReply) -> Result<&TurnRecord, AgentError> {
        if !matches!(self.phase, Phase::Clarifying | Phase::AwaitingConfirmation) {
            return Err(AgentError::WrongPhase {
                phase: self.phase,
                operation: "submit_user_reply",
            });
        }
        let waited = self.waiting_since.take().map_or(Duration::ZERO, |w| w.elapsed());
        self.latency.add(Component::UserWait, 0, waited);
        self.awaiting_user = false;
        let (action, payload) = match &reply {
            UserReply::Text(t) => (TurnAction::UserReply, Value::String(t.clone())),
            UserReply::Confirm => (TurnAction::Confirm, Value::Null),
            UserReply::Reject(r) => (TurnAction::Reject, r.clone().map_or(Value::Null, Value::String)),
        };
        let confirming = self.phase == Phase::AwaitingConfirmation;
        match (confirming, reply) {
            (false, UserReply::Text(t)) => {
                let fresh = self.config.rerun_retrieval_on_new_entities && self.has_new_entities(&t);
                self.history.push(ChatMessage::user(t.clone()));
                self.clarifications.push(t);
                if fresh {
                    self.retrieved_state = None;
                    self.retrieved_docs = None;
                    self.phase = Phase::Retrieving;
                } else if self.clarify_rounds >= self.config.max_clarify_rounds {
                    self.phase = Phase::Generating;
                }
            }
            (false, UserReply::Confirm) => {
                self.agreed_plan = self.plan.clone();
                self.phase = Phase::Generating;
            }
            (false, UserReply::Reject(r)) => {
                if let Some(r) = &r {
                    self.history.push(ChatMessage::user(r.clone()));
                }
                self.after_rejection(r);
                if !self.is_finished() && self.clarify_rounds >= self.config.max_clarify_rounds {
                    self.phase = Phase::Generating;
                }
            }
            (true, UserReply::Confirm) => self.phase = Phase::Deploying,
            (true, UserReply::Text(r)) => self.reject_proposal(Some(r)),
            (true, UserReply::Reject(r)) => self.reject_proposal(r),
        }
        self.record(Actor::User, action, payload, None, waited);
        Ok(self.turns.last().expect("reply recorded"))
    }

    fn reject_proposal(&mut self, reason: Option<String>) {
        self.after_rejection(reason);
        if self.is_finished() {
            return;
        }
        self.working_change_set = None;
        self.last_output = None;
        self.extract_error = None;
        self.needs_repair = false;
        self.phase = Phase::Generating;
    }

    /// Steps until the session finishes or needs the operator.
    pub fn run_until_blocked(&mut self, ctx: &AgentContext) -> Result<(), AgentError> {
        while !self.is_finished() && !self.awaiting_user {
            self.step(ctx)?;
        }
        Ok(())
    }

    /// One `TurnRecord` JSON object per line.
    pub fn transcript_jsonl(&self) -> String {
        transcript_to_jsonl(&self.turns)
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            session_id: self.session_id.clone(),
            phase: self.phase,
            query: self.query.clone(),
            iteration: self.iteration,
            verifier_calls: self.verifier_calls,
            awaiting_user: self.awaiting_user(),
            working_change_set: self.working_change_set.clone(),
            last_report: self.last_report.clone(),
            failure: self.failure.clone(),
            latency: self.latency.clone(),
            config: self.config.clone(),
            turn_count: self.turns.len(),
        }
    }
}

/// Serializable summary of a session, without the turn list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub phase: Phase,
    pub query: String,
    pub iteration: u32,
    pub verifier_calls: u32,
    pub awaiting_user: bool,
    pub working_change_set: Option<ChangeSet>,
    pub last_report: Option<VerificationReport>,
    pub failure: Option<String>,
    pub latency: LatencyBreakdown,
    pub config: AgentConfig,
    pub turn_count: usize,
}

pub fn transcript_to_jsonl(turns: &[TurnRecord]) -> String {
    let mut out = String::new();
    for t in turns {
        out.push_str(&serde_json::to_string(t).expect("turn serializes"));
        out.push('\n');
    }
    out
}

pub fn read_transcript(text: &str) -> Result<Vec<TurnRecord>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

/// A mock that serves the model outputs of a recorded session in order.
pub fn replay_backend(turns: &[TurnRecord]) -> MockBackend {
    let calls = turns
        .iter()
        .filter(|t| {
            matches!(
                t.action,
                TurnAction::ProposePlan | TurnAction::AskUser | TurnAction::Generate | TurnAction::RepairGenerate
            )
        })
        .filter_map(|t| t.payload.as_str())
        .map(|o| ScriptedReply {
            purpose: None,
            guard: None,
            output: o.to_string(),
        })
        .collect();
    MockBackend::new(MockScript {
        calls,
        ..MockScript::default()
    })
    .expect("unguarded script compiles")
}

/// Operator replies of a recorded session in order.
pub fn recorded_replies(turns: &[TurnRecord]) -> Vec<UserReply> {
    turns
        .iter()
        .filter_map(|t| match t.action {
            TurnAction::UserReply => Some(UserReply::Text(t.payload.as_str().unwrap_or_default().to_string())),
            TurnAction::Confirm => Some(UserReply::Confirm),
            TurnAction::Reject => Some(UserReply::Reject(t.payload.as_str().map(str::to_string))),
            _ => None,
        })
        .collect()
}

/// Drives a session with a scripted operator: each time the session waits,
/// the next reply is submitted. Stops when finished or out of replies.
pub fn drive(
    session: &mut ConversationSession,
    ctx: &AgentContext,
    replies: impl IntoIterator<Item = UserReply>,
) -> Result<(), AgentError> {
    let mut replies = replies.into_iter();
    loop {
        session.run_until_blocked(ctx)?;
        if session.is_finished() {
            return Ok(());
        }
        match replies.next() {
            Some(r) => {
                session.submit_user_reply(r)?;
            }
            None => return Ok(()),
        }
    }
}

/// Re-runs a recorded session against its own model outputs and replies.
pub fn replay_session(
    turns: &[TurnRecord],
    state: NetworkState,
    config: AgentConfig,
    ctx: &AgentContext,
) -> Result<ConversationSession, AgentError> {
    let query = turns
        .iter()
        .find(|t| t.action == TurnAction::Query)
        .and_then(|t| t.payload.as_str())
        .ok_or(AgentError::EmptyQuery)?;
    let ctx = ctx.with_backend(Arc::new(replay_backend(turns)));
    let mut session = start_session(query, state, config)?;
    drive(&mut session, &ctx, recorded_replies(turns))?;
    Ok(session)
}
