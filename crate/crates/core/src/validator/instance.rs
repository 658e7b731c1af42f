use std::collections::BTreeSet;

use super::changeset::check_field;
use super::xpath::{Evaluator, XNode};
use super::{Finding, Rule, VerificationReport};
use crate::schema::{canonical, NodeKind, ResolvedSchema, SchemaNode, SchemaPath, TypeSpec};
use crate::state::{tree_get, DeviceState, InstanceNode, InstanceTree, NetworkState};

/// Values stored at a leaf path, looking through lists on the way.
fn values_at(tree: &InstanceTree, names: &[&str]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for split in 1..names.len() {
        if let Some(InstanceNode::List(entries)) = tree_get(tree, &names[..split]) {
            if split + 1 == names.len() {
                for e in entries.values() {
                    if let Some(v) = e.get(names[split]) {
                        out.extend(v.items().iter().map(|s| s.to_string()));
                    }
                }
            }
            return out;
        }
    }
    match tree_get(tree, names) {
        Some(InstanceNode::Leaf(s)) => {
            out.insert(s.to_string());
        }
        Some(InstanceNode::LeafList(v)) => out.extend(v.iter().map(ToString::to_string)),
        _ => {}
    }
    out
}

fn must_message(expr: &impl std::fmt::Display) -> String {
    format!("Must condition ({expr}) not satisfied")
}

struct Walk<'a> {
    device: &'a DeviceState,
    module: &'a str,
    eval: Evaluator<'a>,
    findings: Vec<Finding>,
}

impl<'a> Walk<'a> {
    fn path(&self, names: &[&str]) -> SchemaPath {
        canonical(self.module, names.iter().copied())
    }

    fn error(&mut self, names: &[&str], rule: Rule, entry: Option<&str>, message: String) {
        let mut f = Finding::error(&self.device.device_name, self.path(names), rule, message);
        if let Some(e) = entry {
            f = f.at_entry(e);
        }
        self.findings.push(f);
    }

    fn check_leafref(&mut self, names: &[&str], entry: Option<&str>, leaf: &SchemaNode, values: Vec<String>) {
        let Some(TypeSpec::Leafref { path, .. }) = leaf.type_spec() else {
            return;
        };
        let target: Vec<&str> = path.names().collect();
        let present = values_at(&self.device.tree, &target);
        for v in values {
            if !present.contains(&v) {
                self.error(
                    names,
                    Rule::LeafrefUnsatisfied,
                    entry,
                    format!("leaf `{}` value \"{v}\" has no match at {path}", leaf.name),
                );
            }
        }
    }

    fn node(&mut self, names: Vec<&'a str>, schema: &'a SchemaNode, inst: &'a InstanceNode) {
        match (schema.kind, inst) {
            (NodeKind::Container, InstanceNode::Container(map)) => {
                let ctx = XNode::Container(names.clone());
                for m in &schema.must_exprs {
                    if !self.eval.holds(m, &ctx) {
                        self.error(&names, Rule::MustViolation, None, must_message(m));
                    }
                }
                for (child_name, child) in map {
                    let mut child_names = names.clone();
                    child_names.push(child_name.as_str());
                    let Some(child_schema) = schema.child(child_name) else {
                        self.error(&child_names, Rule::UnknownPath, None, format!("`{child_name}` is not in the schema"));
                        continue;
                    };
                    match child {
                        InstanceNode::Leaf(_) | InstanceNode::LeafList(_) => self.leaf_in_container(&names, child_schema, child),
                        _ => self.node(child_names, child_schema, child),
                    }
                }
                for leaf in schema.children.iter().filter(|c| c.mandatory && c.kind.is_data_leaf()) {
                    if !map.contains_key(&leaf.name) {
                        self.error(&names, Rule::KeyMissing, None, format!("mandatory leaf `{}` missing", leaf.name));
                    }
                }
            }
            (NodeKind::List, InstanceNode::List(entries)) => {
                for (key, entry) in entries {
                    let label = key.join("|");
                    let label = label.as_str();
                    for k in &schema.key_leaves {
                        if !entry.contains_key(k) {
                            self.error(&names, Rule::KeyMissing, Some(label), format!("key leaf `{k}` missing"));
                        }
                    }
                    for leaf in schema.children.iter().filter(|c| c.mandatory) {
                        if !entry.contains_key(&leaf.name) {
                            self.error(&names, Rule::KeyMissing, Some(label), format!("mandatory leaf `{}` missing from {}", leaf.name, schema.name));
                        }
                    }
                    let entry_ctx = XNode::Entry {
                        list: names.clone(),
                        key,
                        entry,
                    };
                    for m in &schema.must_exprs {
                        if !self.eval.holds(m, &entry_ctx) {
                            self.error(&names, Rule::MustViolation, Some(label), must_message(m));
                        }
                    }
                    for (field, value) in entry {
                        let Some(leaf) = schema.child(field).filter(|c| c.kind.is_data_leaf()) else {
                            self.error(&names, Rule::UnknownPath, Some(label), format!("`{field}` is not a leaf of {}", schema.name));
                            continue;
                        };
                        for msg in check_field(leaf, value) {
                            self.error(&names, Rule::TypeMismatch, Some(label), msg);
                        }
                        self.check_leafref(&names, Some(label), leaf, value.items().iter().map(|s| s.to_string()).collect());
                        let ctx = XNode::Field {
                            list: names.clone(),
                            key,
                            entry,
                            field: field.as_str(),
                        };
                        for m in &leaf.must_exprs {
                            if !self.eval.holds(m, &ctx) {
                                self.error(&names, Rule::MustViolation, Some(label), must_message(m));
                            }
                        }
                    }
                }
            }
            _ => self.error(&names, Rule::UnknownPath, None, format!("instance shape does not match {} `{}`", schema.kind.keyword(), schema.name)),
        }
    }

    fn leaf_in_container(&mut self, parent: &[&'a str], leaf: &'a SchemaNode, inst: &'a InstanceNode) {
        let value = match inst {
            InstanceNode::Leaf(s) => crate::state::FieldValue::Scalar(s.clone()),
            InstanceNode::LeafList(v) => crate::state::FieldValue::List(v.clone()),
            _ => return,
        };
        for msg in check_field(leaf, &value) {
            self.error(parent, Rule::TypeMismatch, None, msg);
        }
        self.check_leafref(parent, None, leaf, value.items().iter().map(|s| s.to_string()).collect());
        let mut names = parent.to_vec();
        names.push(leaf.name.as_str());
        let ctx = XNode::Leaf(names);
        for m in &leaf.must_exprs {
            if !self.eval.holds(m, &ctx) {
                self.error(parent, Rule::MustViolation, None, must_message(m));
            }
        }
    }
}

fn validate_device(device: &DeviceState, schema: &ResolvedSchema) -> Vec<Finding> {
    let mut findings = Vec::new();
    for table in device.unknown_tables.keys() {
        findings.push(Finding::warning(
            &device.device_name,
            SchemaPath::from_names([table.as_str()]),
            Rule::UnknownPath,
            format!("table `{table}` is not in the schema and was not validated"),
        ));
    }
    for (root, inst) in &device.tree {
        let found = schema
            .modules()
            .iter()
            .find_map(|m| m.root_nodes.iter().find(|n| &n.name == root).map(|n| (m, n)));
        let Some((module, node)) = found else {
            findings.push(Finding::error(
                &device.device_name,
                SchemaPath::from_names([root.as_str()]),
                Rule::UnknownPath,
                format!("`{root}` is not in the schema"),
            ));
            continue;
        };
        let mut walk = Walk {
            device,
            module: &module.name,
            eval: Evaluator { tree: &device.tree },
            findings: Vec::new(),
        };
        walk.node(vec![root.as_str()], node, inst);
        findings.extend(walk.findings);
    }
    findings
}

/// Type, mandatory, leafref and `must` checks over every device.
pub fn validate_instance(state: &NetworkState, schema: &ResolvedSchema) -> VerificationReport {
    let findings = state
        .devices
        .values()
        .flat_map(|d| validate_device(d, schema))
        .collect();
    VerificationReport::from_findings(findings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::state::{apply_change_set, ChangeSet};

    const MSG: &str = "Must condition (current() = ../../INTERFACE_LIST[name=current()]/name) not satisfied";

    fn faulty() -> ChangeSet {
        ChangeSet::from_json(
            r#"[{"device":"L0","config":[{"action":"append","path":"sonic-interface/sonic-interface/INTERFACE/INTERFACE_IPPREFIX_LIST","value":{"name":"Ethernet4","ip-prefix":"10.1.1.1/30"}}]}]"#,
        )
        .unwrap()
    }

    #[test]
    fn fixture_state_is_clean() {
        let r = validate_instance(&fixtures::clos_state(), &fixtures::schema());
        assert!(r.passed() && r.findings.is_empty(), "{:#?}", r.findings);
        assert!(validate_instance(&NetworkState::empty(), &fixtures::schema()).passed());
    }

    #[test]
    fn prefix_without_interface_entry_violates_must() {
        let schema = fixtures::schema();
        let state = apply_change_set(&fixtures::clos_state(), &faulty(), &schema).unwrap();
        let r = validate_instance(&state, &schema);
        assert!(!r.passed());
        let f: Vec<&Finding> = r.errors().collect();
        assert_eq!(f.len(), 1, "{f:#?}");
        assert_eq!(f[0].rule, Rule::MustViolation);
        assert_eq!(f[0].message, MSG);
        assert_eq!(f[0].device, "L0");
        assert_eq!(f[0].entry.as_deref(), Some("Ethernet4|10.1.1.1/30"));
    }

    #[test]
    fn orphan_leafref_is_reported() {
        let schema = fixtures::schema();
        let cs = ChangeSet::from_json(
            r#"[{"device":"S1","config":[
                {"action":"append","path":"sonic-interface/sonic-interface/INTERFACE/INTERFACE_LIST","value":{"name":"Ethernet96"}}]}]"#,
        )
        .unwrap();
        let state = apply_change_set(&fixtures::clos_state(), &cs, &schema).unwrap();
        let r = validate_instance(&state, &schema);
        assert!(r.has_rule(Rule::LeafrefUnsatisfied), "{:#?}", r.findings);
    }

    #[test]
    fn unknown_tables_only_warn() {
        let schema = fixtures::schema();
        let mut state = fixtures::clos_state();
        state
            .devices
            .get_mut("S0")
            .unwrap()
            .unknown_tables
            .insert("FLEX_COUNTER_TABLE".into(), serde_json::json!({}));
        let r = validate_instance(&state, &schema);
        assert!(r.passed());
        assert_eq!(r.findings.len(), 1);
    }

    #[test]
    fn brute_force_cross_check() {
        // oracle: the must holds exactly when each prefix entry's interface has an INTERFACE_LIST entry
        let schema = fixtures::schema();
        let base = fixtures::clos_state();
        let ports = ["Ethernet0", "Ethernet4", "Ethernet8"];
        for mask in 0u32..64 {
            let mut ops = Vec::new();
            for (i, p) in ports.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    ops.push(format!(r#"{{"action":"append","path":"sonic-interface/sonic-interface/INTERFACE/INTERFACE_LIST","value":{{"name":"{p}"}}}}"#));
                }
                if mask & (1 << (i + 3)) != 0 {
                    ops.push(format!(r#"{{"action":"append","path":"sonic-interface/sonic-interface/INTERFACE/INTERFACE_IPPREFIX_LIST","value":{{"name":"{p}","ip-prefix":"10.9.{i}.1/24"}}}}"#));
                }
            }
            let mut state = base.clone();
            state.devices.get_mut("L1").unwrap().tree.clear();
            let ports_only = ChangeSet::from_json(r#"[{"device":"L1","config":[
                {"action":"append","path":"sonic-port:sonic-port/sonic-port:PORT/PORT_LIST","value":{"name":"Ethernet0"}},
                {"action":"append","path":"sonic-port:sonic-port/sonic-port:PORT/PORT_LIST","value":{"name":"Ethernet4"}},
                {"action":"append","path":"sonic-port:sonic-port/sonic-port:PORT/PORT_LIST","value":{"name":"Ethernet8"}}]}]"#).unwrap();
            state = apply_change_set(&state, &ports_only, &schema).unwrap();
            let cs = ChangeSet::from_json(&format!(r#"[{{"device":"L1","config":[{}]}}]"#, ops.join(","))).unwrap();
            let state = apply_change_set(&state, &cs, &schema).unwrap();
            let expected_ok = (0..3).all(|i| mask & (1 << (i + 3)) == 0 || mask & (1 << i) != 0);
            assert_eq!(validate_instance(&state, &schema).passed(), expected_ok, "mask {mask:06b}");
        }
    }
}
