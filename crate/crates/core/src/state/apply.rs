use std::collections::BTreeMap;

use indexmap::IndexMap;
use thiserror::Error;

use super::{
    Action, ChangeOp, ChangeSet, DeviceState, FieldValue, InstanceNode, KeyTuple, ListEntry, NetworkState,
};
use crate::schema::{NodeKind, ResolvedSchema, SchemaError, SchemaNode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApplyErrorKind {
    #[error("unknown device")]
    UnknownDevice,
    #[error("path not found: {0}")]
    PathNotFound(SchemaError),
    #[error("cannot {action} at {kind} node `{name}`")]
    NotEditable {
        action: Action,
        kind: &'static str,
        name: String,
    },
    #[error("entry [{key}] already exists")]
    AppendDuplicateKey { key: String },
    #[error("no entry [{key}] to remove")]
    RemoveNotFound { key: String },
    #[error("entry [{key}] has {field}={actual}, remove asked for {expected}")]
    RemoveMismatch {
        key: String,
        field: String,
        expected: String,
        actual: String,
    },
    #[error("key leaf `{0}` missing from value")]
    KeyLeafMissing(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("field `{0}` has the wrong shape")]
    FieldShape(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{device} op {op_index}: {kind}")]
pub struct ApplyError {
    pub device: String,
    pub op_index: usize,
    pub kind: ApplyErrorKind,
}

/// Applies a change set transactionally and returns the next snapshot, with
/// its revision incremented. The input snapshot is never modified.
pub fn apply_change_set(state: &NetworkState, cs: &ChangeSet, schema: &ResolvedSchema) -> Result<NetworkState, ApplyError> {
    let mut next = state.clone();
    for dc in &cs.0 {
        let device = next.devices.get_mut(&dc.device).ok_or_else(|| ApplyError {
            device: dc.device.clone(),
            op_index: 0,
            kind: ApplyErrorKind::UnknownDevice,
        })?;
        for (i, op) in dc.config.iter().enumerate() {
            apply_op(device, op, schema).map_err(|kind| ApplyError {
                device: dc.device.clone(),
                op_index: i,
                kind,
            })?;
        }
    }
    next.revision = state.revision + 1;
    Ok(next)
}

fn coerce_fields(node: &SchemaNode, value: &IndexMap<String, FieldValue>) -> Result<ListEntry, ApplyErrorKind> {
    let mut out = ListEntry::new();
    for (name, v) in value {
        let child = node
            .child(name)
            .filter(|c| c.kind.is_data_leaf())
            .ok_or_else(|| ApplyErrorKind::UnknownField(name.clone()))?;
        let v = match (child.kind, v.clone()) {
            (NodeKind::Leaf, FieldValue::List(_)) => return Err(ApplyErrorKind::FieldShape(name.clone())),
            (NodeKind::LeafList, FieldValue::Scalar(s)) => FieldValue::List(vec![s]),
            (_, v) => v,
        };
        out.insert(name.clone(), v.coerce(child.type_spec()));
    }
    Ok(out)
}

fn key_label(key: &KeyTuple) -> String {
    key.join("|")
}

/// Finds or creates the container chain for `names`, returning the map that
/// should hold the last segment.
fn container_chain<'a>(
    tree: &'a mut BTreeMap<String, InstanceNode>,
    names: &[&str],
) -> &'a mut BTreeMap<String, InstanceNode> {
    let mut map = tree;
    for n in names {
        let slot = map
            .entry(n.to_string())
            .or_insert_with(InstanceNode::empty_container);
        if !matches!(slot, InstanceNode::Container(_)) {
            *slot = InstanceNode::empty_container();
        }
        let InstanceNode::Container(inner) = slot else {
            unreachable!()
        };
        map = inner;
    }
    map
}

fn apply_op(device: &mut DeviceState, op: &ChangeOp, schema: &ResolvedSchema) -> Result<(), ApplyErrorKind> {
    let (node_ref, canon) = schema.find_data_node(&op.path).map_err(ApplyErrorKind::PathNotFound)?;
    let node = node_ref.node;
    let names: Vec<&str> = canon.names().collect();
    let (last, parents) = names.split_last().expect("paths are non-empty");
    if node.kind.is_data_leaf() {
        return Err(ApplyErrorKind::NotEditable {
            action: op.action,
            kind: node.kind.keyword(),
            name: node.name.clone(),
        });
    }
    let fields = coerce_fields(node, &op.value)?;
    match node.kind {
        NodeKind::Leaf | NodeKind::LeafList => unreachable!("handled above"),
        NodeKind::List => {
            let mut key = KeyTuple::new();
            for k in &node.key_leaves {
                match fields.get(k) {
                    Some(FieldValue::Scalar(s)) => key.push(s.to_string()),
                    _ => return Err(ApplyErrorKind::KeyLeafMissing(k.clone())),
                }
            }
            let parent = container_chain(&mut device.tree, parents);
            let slot = parent
                .entry(last.to_string())
                .or_insert_with(|| InstanceNode::List(BTreeMap::new()));
            let InstanceNode::List(entries) = slot else {
                return Err(ApplyErrorKind::FieldShape(last.to_string()));
            };
            let result = match op.action {
                Action::Append => {
                    use std::collections::btree_map::Entry;
                    match entries.entry(key) {
                        Entry::Occupied(e) => Err(ApplyErrorKind::AppendDuplicateKey { key: key_label(e.key()) }),
                        Entry::Vacant(e) => {
                            e.insert(fields);
                            Ok(())
                        }
                    }
                }
                Action::Remove => match entries.get(&key) {
                    None => Err(ApplyErrorKind::RemoveNotFound { key: key_label(&key) }),
                    Some(existing) => {
                        let mismatch = fields.iter().find(|(f, v)| existing.get(*f) != Some(v));
                        match mismatch {
                            Some((f, v)) => Err(ApplyErrorKind::RemoveMismatch {
                                key: key_label(&key),
                                field: f.clone(),
                                expected: v.to_string(),
                                actual: existing.get(f).map_or_else(|| "<unset>".into(), ToString::to_string),
                            }),
                            None => {
                                entries.remove(&key);
                                Ok(())
                            }
                        }
                    }
                },
            };
            super::prune_tree(&mut device.tree);
            result
        }
        NodeKind::Container => {
            let container = container_chain(&mut device.tree, &names);
            let result = match op.action {
                Action::Append => {
                    if let Some(f) = fields.keys().find(|f| container.contains_key(*f)) {
                        Err(ApplyErrorKind::AppendDuplicateKey { key: f.clone() })
                    } else {
                        for (f, v) in fields {
                            container.insert(f, leaf_node(v));
                        }
                        Ok(())
                    }
                }
                Action::Remove if fields.is_empty() => {
                    if container.is_empty() {
                        Err(ApplyErrorKind::RemoveNotFound { key: last.to_string() })
                    } else {
                        container.clear();
                        Ok(())
                    }
                }
                Action::Remove => {
                    let mut err = None;
                    for (f, v) in &fields {
                        match container.get(f) {
                            None => {
                                err = Some(ApplyErrorKind::RemoveNotFound { key: f.clone() });
                                break;
                            }
                            Some(existing) if existing != &leaf_node(v.clone()) => {
                                err = Some(ApplyErrorKind::RemoveMismatch {
                                    key: last.to_string(),
                                    field: f.clone(),
                                    expected: v.to_string(),
                                    actual: leaf_text(existing),
                                });
                                break;
                            }
                            Some(_) => {}
                        }
                    }
                    match err {
                        Some(e) => Err(e),
                        None => {
                            for f in fields.keys() {
                                container.remove(f);
                            }
                            Ok(())
                        }
                    }
                }
            };
            super::prune_tree(&mut device.tree);
            result
        }
    }
}

fn leaf_node(v: FieldValue) -> InstanceNode {
    match v {
        FieldValue::Scalar(s) => InstanceNode::Leaf(s),
        FieldValue::List(v) => InstanceNode::LeafList(v),
    }
}

fn leaf_text(n: &InstanceNode) -> String {
    match n {
        InstanceNode::Leaf(s) => s.to_string(),
        InstanceNode::LeafList(v) => FieldValue::List(v.clone()).to_string(),
        _ => "<container>".into(),
    }
}
