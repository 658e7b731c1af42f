use std::collections::BTreeSet;

use super::{Finding, Rule, VerificationReport};
use crate::schema::{NodeKind, ResolvedSchema, SchemaNode, SchemaPath};
use crate::state::{Action, ChangeOp, ChangeSet, FieldValue, Scalar};

/// Checks scalar values against a leaf's type, returning one message per bad item.
pub(super) fn check_field(leaf: &SchemaNode, value: &FieldValue) -> Vec<String> {
    let mut out = Vec::new();
    let items: Vec<&Scalar> = match (leaf.kind, value) {
        (NodeKind::Leaf, FieldValue::List(_)) => {
            return vec![format!("leaf `{}` takes a single value, got a list", leaf.name)];
        }
        _ => value.items(),
    };
    let Some(ty) = leaf.type_spec() else {
        return out;
    };
    for item in items {
        let text = match item {
            Scalar::Bool(b) => {
                out.push(format!("leaf `{}` does not take boolean {b}", leaf.name));
                continue;
            }
            other => other.to_string(),
        };
        if let Err(msg) = ty.check(&text) {
            out.push(format!("leaf `{}`: {msg}", leaf.name));
        }
    }
    out
}

struct OpCheck<'a> {
    device: &'a str,
    path: SchemaPath,
    findings: &'a mut Vec<Finding>,
}

impl OpCheck<'_> {
    fn push(&mut self, rule: Rule, entry: Option<&str>, message: String) {
        let mut f = Finding::error(self.device, self.path.clone(), rule, message);
        if let Some(e) = entry {
            f = f.at_entry(e);
        }
        self.findings.push(f);
    }
}

fn entry_key(node: &SchemaNode, op: &ChangeOp) -> Option<String> {
    let parts: Option<Vec<String>> = node
        .key_leaves
        .iter()
        .map(|k| op.value.get(k).and_then(FieldValue::scalar).map(ToString::to_string))
        .collect();
    parts.map(|p| p.join("|"))
}

/// Structural and type checks on each op, without reference to device state.
pub fn validate_change_set(cs: &ChangeSet, schema: &ResolvedSchema) -> VerificationReport {
    let mut findings = Vec::new();
    let mut appended: BTreeSet<(String, SchemaPath, String)> = BTreeSet::new();
    for dc in &cs.0 {
        for op in &dc.config {
            let (node, canon) = match schema.find_data_node(&op.path) {
                Ok((n, canon)) => (n.node, canon),
                Err(e) => {
                    findings.push(Finding::error(&dc.device, op.path.clone(), Rule::UnknownPath, e.to_string()));
                    continue;
                }
            };
            let mut check = OpCheck {
                device: &dc.device,
                path: canon.clone(),
                findings: &mut findings,
            };
            if node.kind.is_data_leaf() {
                check.push(
                    Rule::Syntax,
                    None,
                    format!(
                        "cannot {} at {} `{}`; the path must address a list or container",
                        op.action,
                        node.kind.keyword(),
                        node.name
                    ),
                );
                continue;
            }
            let entry = if node.kind == NodeKind::List {
                entry_key(node, op)
            } else {
                None
            };
            let entry = entry.as_deref();
            for (name, value) in &op.value {
                match node.child(name).filter(|c| c.kind.is_data_leaf()) {
                    None => {
                        let msg = format!("`{name}` is not a leaf of {} `{}`", node.kind.keyword(), node.name);
                        check.findings.push({
                            let f = Finding::error(&dc.device, canon.child(name.as_str()), Rule::UnknownPath, msg);
                            match entry {
                                Some(e) => f.at_entry(e),
                                None => f,
                            }
                        });
                    }
                    Some(leaf) => {
                        for msg in check_field(leaf, value) {
                            check.push(Rule::TypeMismatch, entry, msg);
                        }
                    }
                }
            }
            if node.kind != NodeKind::List {
                continue;
            }
            for k in &node.key_leaves {
                match op.value.get(k) {
                    Some(FieldValue::Scalar(_)) => {}
                    _ => check.push(Rule::KeyMissing, entry, format!("key leaf `{k}` missing from {}", node.name)),
                }
            }
            if op.action == Action::Append {
                for leaf in node.children.iter().filter(|c| c.mandatory && !node.is_key(&c.name)) {
                    if !op.value.contains_key(&leaf.name) {
                        check.push(
                            Rule::KeyMissing,
                            entry,
                            format!("mandatory leaf `{}` missing from {}", leaf.name, node.name),
                        );
                    }
                }
                if let Some(e) = entry {
                    if !appended.insert((dc.device.clone(), canon.clone(), e.to_string())) {
                        check.push(Rule::DuplicateKey, Some(e), format!("entry [{e}] appended twice"));
                    }
                }
            } else if let Some(e) = entry {
                appended.remove(&(dc.device.clone(), canon.clone(), e.to_string()));
            }
        }
    }
    VerificationReport::from_findings(findings)
}
