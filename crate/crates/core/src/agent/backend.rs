use std::sync::Mutex;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// What a backend call is for. Mock scripts may guard on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Purpose {
    Plan,
    Generate,
    Repair,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmRequest {
    pub purpose: Purpose,
    pub system: String,
    pub user: String,
    /// Earlier exchanges, oldest first.
    pub history: Vec<ChatMessage>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("backend transport failure: {0}")]
    Transport(String),
    #[error("script exhausted after {0} calls")]
    Exhausted(usize),
    #[error("call {index}: guard {guard:?} did not match the {purpose:?} prompt")]
    GuardMismatch {
        index: usize,
        purpose: Purpose,
        guard: String,
    },
    #[error("bad script: {0}")]
    Script(String),
}

pub trait LlmBackend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, request: &LlmRequest) -> Result<String, LlmError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OnExhausted {
    #[default]
    Error,
    RepeatLast,
}

/// One scripted response. `guard` is a regex that must match the user prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedReply {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purpose: Option<Purpose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<String>,
    pub output: String,
}

/// Fallback used when the indexed script has nothing for a call: first rule
/// whose purpose and pattern match wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purpose: Option<Purpose>,
    pub pattern: String,
    pub output: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default)]
    pub calls: Vec<ScriptedReply>,
    #[serde(default)]
    pub rules: Vec<PatternRule>,
    #[serde(default)]
    pub on_exhausted: OnExhausted,
}

impl MockScript {
    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        serde_json::from_str(text).map_err(|e| LlmError::Script(e.to_string()))
    }

    pub fn sequence<I, S>(outputs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            calls: outputs
                .into_iter()
                .map(|o| ScriptedReply {
                    purpose: None,
                    guard: None,
                    output: o.into(),
                })
                .collect(),
            ..Self::default()
        }
    }

    pub fn repeating(output: impl Into<String>) -> Self {
        Self {
            on_exhausted: OnExhausted::RepeatLast,
            ..Self::sequence([output])
        }
    }
}

/// Scripted backend, keyed by call index.
pub struct MockBackend {
    calls: Vec<(ScriptedReply, Option<Regex>)>,
    rules: Vec<(PatternRule, Regex)>,
    on_exhausted: OnExhausted,
    counter: Mutex<usize>,
    log: Mutex<Vec<LlmRequest>>,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Result<Self, LlmError> {
        let compile = |p: &str| Regex::new(p).map_err(|e| LlmError::Script(format!("{p:?}: {e}")));
        let calls = script
            .calls
            .into_iter()
            .map(|c| {
                let re = c.guard.as_deref().map(compile).transpose()?;
                Ok((c, re))
            })
            .collect::<Result<_, LlmError>>()?;
        let rules = script
            .rules
            .into_iter()
            .map(|r| {
                let re = compile(&r.pattern)?;
                Ok((r, re))
            })
            .collect::<Result<_, LlmError>>()?;
        Ok(Self {
            calls,
            rules,
            on_exhausted: script.on_exhausted,
            counter: Mutex::new(0),
            log: Mutex::new(Vec::new()),
        })
    }

    pub fn call_count(&self) -> usize {
        *self.counter.lock().expect("mock lock")
    }

    /// Every request received so far.
    pub fn requests(&self) -> Vec<LlmRequest> {
        self.log.lock().expect("mock lock").clone()
    }
}

impl LlmBackend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &LlmRequest) -> Result<String, LlmError> {
        let index = {
            let mut c = self.counter.lock().expect("mock lock");
            *c += 1;
            *c - 1
        };
        self.log.lock().expect("mock lock").push(request.clone());
        if let Some((reply, guard)) = self.calls.get(index) {
            let purpose_ok = reply.purpose.is_none_or(|p| p == request.purpose);
            let guard_ok = guard.as_ref().is_none_or(|g| g.is_match(&request.user));
            if !purpose_ok || !guard_ok {
                return Err(LlmError::GuardMismatch {
                    index,
                    purpose: request.purpose,
                    guard: reply.guard.clone().unwrap_or_else(|| format!("purpose {:?}", reply.purpose)),
                });
            }
            return Ok(reply.output.clone());
        }
        for (rule, re) in &self.rules {
            if rule.purpose.is_none_or(|p| p == request.purpose) && re.is_match(&request.user) {
                return Ok(rule.output.clone());
            }
        }
        match (self.on_exhausted, self.calls.last()) {
            (OnExhausted::RepeatLast, Some((last, _))) => Ok(last.output.clone()),
            _ => Err(LlmError::Exhausted(index)),
        }
    }
}

/// OpenAI-style chat-completions client. The key comes from `LLM_API_KEY`.
pub struct ChatCompletionsBackend {
    endpoint: String,
    model: String,
    api_key: String,
    temperature: f64,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

impl ChatCompletionsBackend {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: impl Into<String>) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: api_key.into(),
            temperature: 0.0,
            client,
        })
    }

    pub fn from_env(endpoint: impl Into<String>, model: impl Into<String>) -> Result<Self, LlmError> {
        let key = std::env::var("LLM_API_KEY").map_err(|_| LlmError::Transport("LLM_API_KEY is not set".into()))?;
        Self::new(endpoint, model, key)
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }
}

impl LlmBackend for ChatCompletionsBackend {
    fn name(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &LlmRequest) -> Result<String, LlmError> {
        let mut messages = vec![serde_json::json!({"role": "system", "content": request.system})];
        messages.extend(request.history.iter().map(|m| serde_json::json!({"role": m.role, "content": m.content})));
        messages.push(serde_json::json!({"role": "user", "content": request.user}));
        let body = serde_json::json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": messages,
        });
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(LlmError::Transport(format!("chat API returned {}", resp.status())));
        }
        let parsed: ChatResponse = resp
            .json()
            .map_err(|e| LlmError::Transport(format!("bad chat response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Transport("chat response had no content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(purpose: Purpose, user: &str) -> LlmRequest {
        LlmRequest {
            purpose,
            system: String::new(),
            user: user.into(),
            history: Vec::new(),
        }
    }

    #[test]
    fn mock_serves_by_index_then_rules_then_policy() {
        let script = MockScript::from_json(
            r#"{
                "calls": [
                    {"purpose": "plan", "output": "p"},
                    {"guard": "Error logs", "output": "r"}
                ],
                "rules": [{"purpose": "generate", "pattern": "Ethernet", "output": "g"}]
            }"#,
        )
        .unwrap();
        let m = MockBackend::new(script).unwrap();
        assert_eq!(m.complete(&req(Purpose::Plan, "x")).unwrap(), "p");
        assert!(matches!(
            m.complete(&req(Purpose::Generate, "no logs")),
            Err(LlmError::GuardMismatch { index: 1, .. })
        ));
        assert_eq!(m.complete(&req(Purpose::Generate, "Ethernet4")).unwrap(), "g");
        assert_eq!(m.complete(&req(Purpose::Generate, "nothing")), Err(LlmError::Exhausted(3)));
        assert_eq!(m.call_count(), 4);
        assert_eq!(m.requests().len(), 4);
    }

    #[test]
    fn repeating_mock_never_runs_out() {
        let m = MockBackend::new(MockScript::repeating("same")).unwrap();
        for _ in 0..5 {
            assert_eq!(m.complete(&req(Purpose::Repair, "")).unwrap(), "same");
        }
    }

    #[test]
    fn bad_guard_regex_is_a_script_error() {
        let script = MockScript {
            calls: vec![ScriptedReply {
                purpose: None,
                guard: Some("(".into()),
                output: String::new(),
            }],
            ..MockScript::default()
        };
        assert!(matches!(MockBackend::new(script), Err(LlmError::Script(_))));
    }
}
