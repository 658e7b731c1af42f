//! Session views computed from the transcript alone, so live and restored
//! sessions render the same way.

use std::collections::BTreeMap;

use netlingua_core::agent::{Phase, TurnAction, TurnRecord};
use netlingua_core::state::ChangeSet;
use netlingua_core::validator::VerificationReport;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rating {
    Up,
    Down,
}

/// An operator's rating of one agent turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub index: usize,
    pub rating: Rating,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiTurn {
    #[serde(flatten)]
    pub record: TurnRecord,
    /// Plain-language rendering for the chat view.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub change_set: ChangeSet,
    pub summary: String,
    /// State diff preview, one line per added or removed entry.
    pub diff: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiSessionView {
    pub session_id: String,
    pub phase: Phase,
    /// Restored from disk after a restart; replies are refused.
    pub read_only: bool,
    pub awaiting_input: bool,
    pub transcript: Vec<ApiTurn>,
    pub pending_question: Option<String>,
    pub proposed_change_set: Option<Proposal>,
    pub report: Option<VerificationReport>,
    pub failure: Option<String>,
    pub feedback: BTreeMap<usize, Feedback>,
}

fn error_of(t: &TurnRecord) -> Option<&str> {
    t.payload.get("error").and_then(Value::as_str)
}

fn count(t: &TurnRecord, key: &str) -> usize {
    t.payload.get(key).and_then(Value::as_array).map_or(0, Vec::len)
}

fn ids(t: &TurnRecord) -> String {
    t.payload
        .get("doc_ids")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).collect::<Vec<_>>().join(", "))
        .unwrap_or_default()
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("1 {word}")
    } else {
        format!("{n} {word}s")
    }
}

/// One-paragraph plain-language rendering of a turn.
pub fn render_turn(t: &TurnRecord) -> String {
    if let Some(e) = error_of(t) {
        return format!("{:?} failed: {e}", t.action);
    }
    let text = t.payload.as_str().unwrap_or_default();
    match t.action {
        TurnAction::Query | TurnAction::UserReply | TurnAction::ProposePlan => text.to_string(),
        TurnAction::AskUser => text.trim_start().trim_start_matches("QUESTION:").trim_start().to_string(),
        TurnAction::RetrieveState if t.payload.get("skipped").is_some() => "State retrieval is turned off for this session.".into(),
        TurnAction::RetrieveState => format!("Looked up {}: {}", plural(count(t, "doc_ids"), "state document"), ids(t)),
        TurnAction::RetrieveDocs if t.payload.get("query").is_some() => {
            format!("Looked up {} for the error log: {}", plural(count(t, "doc_ids"), "schema document"), ids(t))
        }
        TurnAction::RetrieveDocs => format!("Looked up {}: {}", plural(count(t, "doc_ids"), "schema document"), ids(t)),
        TurnAction::Generate => format!("Drafted a configuration.\n\n{text}"),
        TurnAction::RepairGenerate => format!("Revised the configuration.\n\n{text}"),
        TurnAction::Verify => match serde_json::from_value::<VerificationReport>(t.payload.clone()) {
            Ok(r) if r.passed() => "The configuration passed verification.".into(),
            Ok(r) => format!("Verification found {}:\n{}", plural(r.errors().count(), "error"), r.error_log().trim_end()),
            Err(_) => "Verification ran.".into(),
        },
        TurnAction::ConfirmRequest => {
            let lines: Vec<&str> = t
                .payload
                .get("diff")
                .and_then(Value::as_array)
                .map(|a| a.iter().filter_map(Value::as_str).collect())
                .unwrap_or_default();
            format!("Please review {} and confirm:\n{}", plural(lines.len(), "change"), lines.join("\n"))
        }
        TurnAction::Confirm => "Confirmed.".into(),
        TurnAction::Reject if text.is_empty() => "Rejected.".into(),
        TurnAction::Reject => format!("Rejected: {text}"),
        TurnAction::Deploy => format!(
            "Deployed {}; the network is now at revision {}.",
            plural(t.payload.get("operations").and_then(Value::as_u64).unwrap_or(0) as usize, "operation"),
            t.payload.get("revision").and_then(Value::as_u64).unwrap_or(0)
        ),
    }
}

fn summary(cs: &ChangeSet) -> String {
    let parts: Vec<String> = cs.0.iter().map(|d| format!("{} ({})", d.device, d.config.len())).collect();
    format!("{} across {}: {}", plural(cs.op_count(), "operation"), plural(cs.0.len(), "device"), parts.join(", "))
}

fn proposal(t: &TurnRecord) -> Option<Proposal> {
    let change_set: ChangeSet = serde_json::from_value(t.payload.get("change_set")?.clone()).ok()?;
    let diff = t
        .payload
        .get("diff")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
        .unwrap_or_default();
    Some(Proposal {
        summary: summary(&change_set),
        change_set,
        diff,
    })
}

fn failure(turns: &[TurnRecord], report: Option<&VerificationReport>) -> String {
    let last = turns.last().expect("failed sessions have turns");
    if let Some(e) = error_of(last) {
        return e.to_string();
    }
    match last.action {
        TurnAction::Reject | TurnAction::UserReply => "the operator rejected the proposal too many times".into(),
        _ => format!(
            "verification still failing after {} repair iterations",
            report.map_or(0, |r| r.iteration)
        ),
    }
}

impl ApiSessionView {
    pub fn from_turns(session_id: &str, turns: &[TurnRecord], feedback: &BTreeMap<usize, Feedback>, read_only: bool) -> Self {
        let phase = turns.last().map_or(Phase::AwaitingQuery, |t| t.phase);
        let last_action = turns.last().map(|t| t.action);
        let awaiting_input = !read_only
            && matches!(
                (phase, last_action),
                (Phase::Clarifying, Some(TurnAction::ProposePlan | TurnAction::AskUser))
                    | (Phase::AwaitingConfirmation, Some(TurnAction::ConfirmRequest))
            );
        let report = turns
            .iter()
            .rev()
            .find(|t| t.action == TurnAction::Verify)
            .and_then(|t| serde_json::from_value::<VerificationReport>(t.payload.clone()).ok());
        let pending_question = (awaiting_input && phase == Phase::Clarifying)
            .then(|| turns.last().map(render_turn))
            .flatten();
        // the latest proposal, unless a newer draft replaced it
        let proposed_change_set = turns
            .iter()
            .rev()
            .take_while(|t| !matches!(t.action, TurnAction::Generate | TurnAction::RepairGenerate))
            .find(|t| t.action == TurnAction::ConfirmRequest)
            .and_then(proposal);
        Self {
            session_id: session_id.to_string(),
            phase,
            read_only,
            awaiting_input,
            transcript: turns
                .iter()
                .map(|t| ApiTurn {
                    record: t.clone(),
                    text: render_turn(t),
                })
                .collect(),
            pending_question,
            proposed_change_set,
            failure: (phase == Phase::Failed).then(|| failure(turns, report.as_ref())),
            report,
            feedback: feedback.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use netlingua_core::agent::read_transcript;
    use netlingua_core::fixtures;

    fn view_at(n: usize) -> ApiSessionView {
        let turns = read_transcript(fixtures::WALKTHROUGH_TRANSCRIPT).unwrap();
        ApiSessionView::from_turns("s", &turns[..n], &BTreeMap::new(), false)
    }

    #[test]
    fn waiting_points_follow_the_transcript() {
        let waits: Vec<usize> = (1..=17).filter(|&n| view_at(n).awaiting_input).collect();
        assert_eq!(waits, vec![4, 8, 15]);
        assert!(view_at(4).pending_question.is_some());
        assert!(view_at(15).pending_question.is_none());
    }

    #[test]
    fn proposal_appears_at_confirmation_and_survives_deploy() {
        assert!(view_at(13).proposed_change_set.is_none());
        let p = view_at(15).proposed_change_set.unwrap();
        assert_eq!(p.change_set.op_count(), 8);
        assert!(p.summary.starts_with("8 operations across 4 devices"));
        let done = view_at(17);
        assert_eq!(done.phase, Phase::Done);
        assert_eq!(done.proposed_change_set, Some(p));
        assert!(done.failure.is_none());
    }

    #[test]
    fn verify_turns_render_the_error_log() {
        let v = view_at(11);
        let text = &v.transcript[10].text;
        assert!(text.starts_with("Verification found 4 errors:"), "{text}");
        assert!(text.contains("Must condition"));
        assert_eq!(v.report.unwrap().status, netlingua_core::validator::Status::Fail);
    }

    #[test]
    fn read_only_never_awaits() {
        let turns = read_transcript(fixtures::WALKTHROUGH_TRANSCRIPT).unwrap();
        assert!(!ApiSessionView::from_turns("s", &turns[..4], &BTreeMap::new(), true).awaiting_input);
    }
}
