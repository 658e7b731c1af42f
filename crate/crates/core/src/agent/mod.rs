//! The conversational configuration loop.

mod backend;
mod extract;
pub mod prompts;
mod session;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memory::{Mode, DEFAULT_K};

pub use backend::{
    ChatCompletionsBackend, ChatMessage, LlmBackend, LlmError, LlmRequest, MockBackend, MockScript, OnExhausted,
    PatternRule, Purpose, ScriptedReply,
};
pub use extract::{extract_change_set, parse_python_literal, python_block, ExtractError};
pub use prompts::{build_generation_prompt, build_repair_prompt, GenerationContext, Prompt, PromptError, RepairContext};
pub use session::{
    diff_lines, drive, read_transcript, recorded_replies, replay_backend, replay_session, start_session,
    transcript_to_jsonl, AgentContext, ConversationSession, SessionView, NO_STATE_TEXT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    AwaitingQuery,
    Retrieving,
    Clarifying,
    Generating,
    Verifying,
    AwaitingConfirmation,
    Deploying,
    Done,
    Failed,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v = serde_json::to_value(self).expect("phase serializes");
        f.write_str(v.as_str().unwrap_or_default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Actor {
    User,
    Agent,
    Memory,
    Verifier,
    Generator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TurnAction {
    Query,
    RetrieveState,
    RetrieveDocs,
    AskUser,
    UserReply,
    ProposePlan,
    Generate,
    Verify,
    RepairGenerate,
    ConfirmRequest,
    Confirm,
    Reject,
    Deploy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub index: usize,
    pub actor: Actor,
    pub action: TurnAction,
    /// Phase the session was in once this turn completed.
    pub phase: Phase,
    pub timestamp_ms: u64,
    pub wall_time_ms: f64,
    /// Model turns carry the raw output string, verbatim.
    pub payload: serde_json::Value,
    /// User prompt sent to the model, for model turns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "text", rename_all = "lowercase")]
pub enum UserReply {
    Text(String),
    Confirm,
    Reject(Option<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub max_repair_iterations: u32,
    pub max_clarify_rounds: u32,
    pub retrieval_k: usize,
    pub retrieval_mode: Mode,
    /// Harness mode: no clarification and no confirmation prompt.
    pub auto_confirm: bool,
    /// When false a failed verification ends the session.
    pub repair_enabled: bool,
    /// When false the state placeholder gets a fixed "no state" note.
    pub state_retrieval: bool,
    /// Re-run retrieval when a reply names new addresses, ports or devices.
    pub rerun_retrieval_on_new_entities: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            max_repair_iterations: 8,
            max_clarify_rounds: 3,
            retrieval_k: DEFAULT_K,
            retrieval_mode: Mode::Nl,
            auto_confirm: false,
            repair_enabled: true,
            state_retrieval: true,
            rerun_retrieval_on_new_entities: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Retrieval,
    Generation,
    Verification,
    Repair,
    UserWait,
    Deployment,
}

/// Per-component wall time in milliseconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub retrieval_ms: f64,
    pub generation_ms: f64,
    pub verification_ms: f64,
    /// Indexed by repair iteration (0 is the first repair).
    pub repair_ms: Vec<f64>,
    pub user_wait_ms: f64,
    pub deployment_ms: f64,
    pub total_ms: f64,
}

impl LatencyBreakdown {
    pub fn add(&mut self, component: Component, repair_index: usize, d: Duration) {
        let ms = d.as_secs_f64() * 1000.0;
        match component {
            Component::Retrieval => self.retrieval_ms += ms,
            Component::Generation => self.generation_ms += ms,
            Component::Verification => self.verification_ms += ms,
            Component::Repair => {
                if self.repair_ms.len() <= repair_index {
                    self.repair_ms.resize(repair_index + 1, 0.0);
                }
                self.repair_ms[repair_index] += ms;
            }
            Component::UserWait => self.user_wait_ms += ms,
            Component::Deployment => self.deployment_ms += ms,
        }
        self.total_ms = self.component_sum();
    }

    pub fn repair_total_ms(&self) -> f64 {
        self.repair_ms.iter().sum()
    }

    pub fn component_sum(&self) -> f64 {
        self.retrieval_ms
            + self.generation_ms
            + self.verification_ms
            + self.repair_total_ms()
            + self.user_wait_ms
            + self.deployment_ms
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("the query is empty")]
    EmptyQuery,
    #[error("invalid agent config: {0}")]
    BadConfig(String),
    #[error("{operation} is not allowed in phase {phase}")]
    WrongPhase { phase: Phase, operation: &'static str },
    #[error("waiting for the operator in phase {0}")]
    AwaitingUser(Phase),
    #[error("session already finished ({0})")]
    Finished(Phase),
}
