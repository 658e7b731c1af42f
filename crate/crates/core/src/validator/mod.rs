//! Schema verification of change sets and instance trees.
//!
//! Every check produces [`Finding`]s rather than errors so the full list can
//! be fed back to the generator as an error log.

mod changeset;
mod instance;
pub mod kit;
mod xpath;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::schema::{ResolvedSchema, SchemaPath};
use crate::state::{apply_change_set, ApplyErrorKind, ChangeSet, NetworkState};

pub use changeset::validate_change_set;
pub use instance::validate_instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Syntax,
    UnknownPath,
    KeyMissing,
    TypeMismatch,
    LeafrefUnsatisfied,
    MustViolation,
    DuplicateKey,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Syntax => "syntax",
            Rule::UnknownPath => "unknown-path",
            Rule::KeyMissing => "key-missing",
            Rule::TypeMismatch => "type-mismatch",
            Rule::LeafrefUnsatisfied => "leafref-unsatisfied",
            Rule::MustViolation => "must-violation",
            Rule::DuplicateKey => "duplicate-key",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub device: String,
    pub path: SchemaPath,
    /// `|`-joined key of the offending list entry, when there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry: Option<String>,
    pub rule: Rule,
    pub message: String,
}

impl Finding {
    pub fn error(device: &str, path: SchemaPath, rule: Rule, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            device: device.to_string(),
            path,
            entry: None,
            rule,
            message: message.into(),
        }
    }

    pub fn warning(device: &str, path: SchemaPath, rule: Rule, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            ..Self::error(device, path, rule, message)
        }
    }

    pub fn at_entry(mut self, entry: impl Into<String>) -> Self {
        self.entry = Some(entry.into());
        self
    }

    fn sort_key(&self) -> (&str, String, Rule, &Option<String>, &str, Severity) {
        (&self.device, self.path.to_string(), self.rule, &self.entry, &self.message, self.severity)
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{level}[{}] {} {}", self.rule, self.device, self.path)?;
        if let Some(e) = &self.entry {
            write!(f, " [{e}]")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub status: Status,
    pub findings: Vec<Finding>,
    pub iteration: u32,
}

impl VerificationReport {
    /// Sorts and de-duplicates findings and derives the status.
    pub fn from_findings(mut findings: Vec<Finding>) -> Self {
        findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        findings.dedup();
        let status = if findings.iter().any(|f| f.severity == Severity::Error) {
            Status::Fail
        } else {
            Status::Pass
        };
        Self {
            status,
            findings,
            iteration: 0,
        }
    }

    pub fn pass() -> Self {
        Self::from_findings(Vec::new())
    }

    /// A report for output that could not be parsed into a change set at all.
    pub fn syntax_error(message: impl Into<String>) -> Self {
        Self::from_findings(vec![Finding::error(
            "",
            SchemaPath::default(),
            Rule::Syntax,
            message,
        )])
    }

    pub fn with_iteration(mut self, iteration: u32) -> Self {
        self.iteration = iteration;
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn has_rule(&self, rule: Rule) -> bool {
        self.errors().any(|f| f.rule == rule)
    }

    /// Plain-text rendering handed to the repair prompt: one error per line,
    /// the message first so it reads like the verifier's own output.
    pub fn error_log(&self) -> String {
        let mut out = String::new();
        for f in self.errors() {
            out.push_str(&f.message);
            let mut loc = Vec::new();
            if !f.device.is_empty() {
                loc.push(format!("device {}", f.device));
            }
            if !f.path.is_empty() {
                loc.push(format!("path {}", f.path));
            }
            if let Some(e) = &f.entry {
                loc.push(format!("entry {e}"));
            }
            if !loc.is_empty() {
                out.push_str(&format!(" ({}; rule {})", loc.join(", "), f.rule));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Change-set checks first; when those pass, the instance checks on the
/// state the change set would produce.
pub fn validate_after_apply(state: &NetworkState, cs: &ChangeSet, schema: &ResolvedSchema) -> VerificationReport {
    let first = validate_change_set(cs, schema);
    if !first.passed() {
        return first;
    }
    let mut findings = first.findings;
    match apply_change_set(state, cs, schema) {
        Ok(next) => findings.extend(validate_instance(&next, schema).findings),
        Err(e) => {
            let path = cs
                .0
                .iter()
                .find(|d| d.device == e.device)
                .and_then(|d| d.config.get(e.op_index))
                .map(|op| match schema.find_data_node(&op.path) {
                    Ok((_, canon)) => canon,
                    Err(_) => op.path.clone(),
                })
                .unwrap_or_default();
            let rule = match e.kind {
                ApplyErrorKind::AppendDuplicateKey { .. } => Rule::DuplicateKey,
                ApplyErrorKind::KeyLeafMissing(_) => Rule::KeyMissing,
                ApplyErrorKind::FieldShape(_) => Rule::TypeMismatch,
                _ => Rule::UnknownPath,
            };
            findings.push(Finding::error(&e.device, path, rule, e.kind.to_string()));
        }
    }
    VerificationReport::from_findings(findings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_follows_error_findings() {
        let w = Finding::warning("S0", SchemaPath::from_names(["X"]), Rule::UnknownPath, "unknown table");
        assert!(VerificationReport::from_findings(vec![w.clone()]).passed());
        let e = Finding::error("S0", SchemaPath::from_names(["X"]), Rule::Syntax, "bad");
        let r = VerificationReport::from_findings(vec![e.clone(), w, e]);
        assert_eq!(r.status, Status::Fail);
        assert_eq!(r.findings.len(), 2);
        assert_eq!(r.error_log(), "bad (device S0, path /X; rule syntax)\n");
    }

    #[test]
    fn report_json_uses_kebab_rules() {
        let r = VerificationReport::syntax_error("no fenced block");
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["status"], "fail");
        assert_eq!(v["findings"][0]["rule"], "syntax");
        let back: VerificationReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
