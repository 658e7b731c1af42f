use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;
use thiserror::Error;

use super::{Action, ChangeOp, ChangeSet, FieldValue, InstanceNode, InstanceTree, ListEntry, NetworkState};
use crate::schema::{canonical, ResolvedSchema, SchemaNode, SchemaPath};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("device sets differ: only in first {only_a:?}, only in second {only_b:?}")]
    DeviceSetMismatch {
        only_a: Vec<String>,
        only_b: Vec<String>,
    },
    #[error("{device}: `{node}` is not in the schema")]
    NotInSchema { device: String, node: String },
}

/// Computes a change set that turns `a` into `b`.
///
/// Per device, all removes come before all appends; a modified entry is
/// removed and appended again.
pub fn diff_states(a: &NetworkState, b: &NetworkState, schema: &ResolvedSchema) -> Result<ChangeSet, DiffError> {
    let names_a: BTreeSet<&String> = a.devices.keys().collect();
    let names_b: BTreeSet<&String> = b.devices.keys().collect();
    if names_a != names_b {
        return Err(DiffError::DeviceSetMismatch {
            only_a: names_a.difference(&names_b).map(|s| s.to_string()).collect(),
            only_b: names_b.difference(&names_a).map(|s| s.to_string()).collect(),
        });
    }
    let mut cs = ChangeSet::new();
    for name in names_a {
        let mut ops = Ops::default();
        diff_tree(name, &a.devices[name].tree, &b.devices[name].tree, schema, &mut ops)?;
        if !ops.removes.is_empty() || !ops.appends.is_empty() {
            for op in ops.removes.into_iter().chain(ops.appends) {
                cs.push(name, op);
            }
        }
    }
    Ok(cs)
}

#[derive(Default)]
struct Ops {
    removes: Vec<ChangeOp>,
    appends: Vec<ChangeOp>,
}

fn diff_tree(device: &str, a: &InstanceTree, b: &InstanceTree, schema: &ResolvedSchema, ops: &mut Ops) -> Result<(), DiffError> {
    let roots: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    for root in roots {
        let (module, node) = schema
            .modules()
            .iter()
            .find_map(|m| m.root_nodes.iter().find(|n| &n.name == root).map(|n| (m, n)))
            .ok_or_else(|| DiffError::NotInSchema {
                device: device.to_string(),
                node: root.clone(),
            })?;
        let ctx = Ctx {
            device,
            module: &module.name,
        };
        ctx.node(&[root.as_str()], node, a.get(root), b.get(root), ops)?;
    }
    Ok(())
}

struct Ctx<'a> {
    device: &'a str,
    module: &'a str,
}

fn ordered(entry: &ListEntry, schema: &SchemaNode) -> IndexMap<String, FieldValue> {
    let mut out = IndexMap::new();
    for k in &schema.key_leaves {
        if let Some(v) = entry.get(k) {
            out.insert(k.clone(), v.clone());
        }
    }
    for (k, v) in entry {
        if !out.contains_key(k) {
            out.insert(k.clone(), v.clone());
        }
    }
    out
}

impl Ctx<'_> {
    fn path(&self, names: &[&str]) -> SchemaPath {
        canonical(self.module, names.iter().copied())
    }

    fn node(
        &self,
        names: &[&str],
        schema: &SchemaNode,
        a: Option<&InstanceNode>,
        b: Option<&InstanceNode>,
        ops: &mut Ops,
    ) -> Result<(), DiffError> {
        let empty_c = BTreeMap::new();
        let empty_l = BTreeMap::new();
        match (a, b) {
            (None, None) => Ok(()),
            (Some(InstanceNode::List(_)), _) | (_, Some(InstanceNode::List(_))) => {
                let la = match a {
                    Some(InstanceNode::List(m)) => m,
                    _ => &empty_l,
                };
                let lb = match b {
                    Some(InstanceNode::List(m)) => m,
                    _ => &empty_l,
                };
                let path = self.path(names);
                for (k, ea) in la {
                    if lb.get(k) != Some(ea) {
                        ops.removes.push(ChangeOp {
                            action: Action::Remove,
                            path: path.clone(),
                            value: ordered(ea, schema),
                        });
                    }
                }
                for (k, eb) in lb {
                    if la.get(k) != Some(eb) {
                        ops.appends.push(ChangeOp {
                            action: Action::Append,
                            path: path.clone(),
                            value: ordered(eb, schema),
                        });
                    }
                }
                Ok(())
            }
            _ => {
                let ca = match a {
                    Some(InstanceNode::Container(m)) => m,
                    _ => &empty_c,
                };
                let cb = match b {
                    Some(InstanceNode::Container(m)) => m,
                    _ => &empty_c,
                };
                let mut removed = IndexMap::new();
                let mut added = IndexMap::new();
                let keys: BTreeSet<&String> = ca.keys().chain(cb.keys()).collect();
                for k in keys {
                    let child_schema = schema.child(k).ok_or_else(|| DiffError::NotInSchema {
                        device: self.device.to_string(),
                        node: format!("{}/{k}", names.join("/")),
                    })?;
                    let (va, vb) = (ca.get(k), cb.get(k));
                    if child_schema.kind.is_data_leaf() {
                        if va != vb {
                            if let Some(v) = va.and_then(leaf_value) {
                                removed.insert(k.clone(), v);
                            }
                            if let Some(v) = vb.and_then(leaf_value) {
                                added.insert(k.clone(), v);
                            }
                        }
                    } else {
                        let mut child_names = names.to_vec();
                        child_names.push(k);
                        self.node(&child_names, child_schema, va, vb, ops)?;
                    }
                }
                let path = self.path(names);
                if !removed.is_empty() {
                    ops.removes.push(ChangeOp {
                        action: Action::Remove,
                        path: path.clone(),
                        value: removed,
                    });
                }
                if !added.is_empty() {
                    ops.appends.push(ChangeOp {
                        action: Action::Append,
                        path,
                        value: added,
                    });
                }
                Ok(())
            }
        }
    }
}

fn leaf_value(n: &InstanceNode) -> Option<FieldValue> {
    match n {
        InstanceNode::Leaf(s) => Some(FieldValue::Scalar(s.clone())),
        InstanceNode::LeafList(v) => Some(FieldValue::List(v.clone())),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::state::apply_change_set;

    #[test]
    fn diff_of_ip_replacement_is_remove_then_append() {
        let schema = fixtures::schema();
        let pre = fixtures::clos_state();
        let cs = ChangeSet::from_json(
            r#"[{"device":"S0","config":[
                {"action":"remove","path":["sonic-interface:sonic-interface","sonic-interface:INTERFACE","INTERFACE_IPPREFIX_LIST"],"value":{"name":"Ethernet8","ip-prefix":"10.0.2.1/24"}},
                {"action":"append","path":["sonic-interface:sonic-interface","sonic-interface:INTERFACE","INTERFACE_IPPREFIX_LIST"],"value":{"name":"Ethernet8","ip-prefix":"10.0.5.1/24"}}]}]"#,
        )
        .unwrap();
        let post = apply_change_set(&pre, &cs, &schema).unwrap();
        assert_eq!(diff_states(&pre, &post, &schema).unwrap(), cs);
        assert!(diff_states(&pre, &pre, &schema).unwrap().is_empty());
    }

    #[test]
    fn device_mismatch_is_an_error() {
        let schema = fixtures::schema();
        let pre = fixtures::clos_state();
        let mut other = pre.clone();
        other.devices.remove("L1");
        assert!(matches!(
            diff_states(&pre, &other, &schema),
            Err(DiffError::DeviceSetMismatch { only_a, .. }) if only_a == vec!["L1".to_string()]
        ));
    }

    #[test]
    fn modified_entry_becomes_remove_and_append() {
        let schema = fixtures::schema();
        let pre = fixtures::clos_state();
        let cs = ChangeSet::from_json(
            r#"[{"device":"L0","config":[
                {"action":"remove","path":"sonic-port:sonic-port/sonic-port:PORT/PORT_LIST","value":{"name":"Ethernet4"}},
                {"action":"append","path":"sonic-port:sonic-port/sonic-port:PORT/PORT_LIST","value":{"name":"Ethernet4","mtu":"1500"}}]}]"#,
        )
        .unwrap();
        let post = apply_change_set(&pre, &cs, &schema).unwrap();
        let d = diff_states(&pre, &post, &schema).unwrap();
        let ops = &d.0[0].config;
        assert_eq!(ops.len(), 2);
        assert_eq!(ops[0].action, Action::Remove);
        assert_eq!(ops[0].value.len(), 5);
        assert_eq!(ops[1].value.len(), 2);
        assert_eq!(apply_change_set(&pre, &d, &schema).unwrap().devices, post.devices);
    }
}
