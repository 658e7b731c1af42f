//! Device configuration databases and the append/remove change-set IR.

mod apply;
mod changeset;
mod configdb;
mod diff;
mod render;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{ResolvedSchema, SchemaError, TypeSpec};

pub use apply::{apply_change_set, ApplyError, ApplyErrorKind};
pub use changeset::{Action, ChangeOp, ChangeSet, ChangeSetError, DeviceChanges};
pub use configdb::{load_device_state, ConfigDbError};
pub use diff::{diff_states, DiffError};
pub use render::{device_display_name, render_state_nl, render_table_nl, render_table_raw};

/// A typed leaf value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
    Str(String),
}

impl Scalar {
    /// Coerces a value into the representation its leaf type expects.
    pub fn coerce(self, ty: Option<&TypeSpec>) -> Scalar {
        let integer = ty.is_some_and(TypeSpec::is_integer);
        match self {
            Scalar::Str(s) if integer => match s.trim().parse::<i64>() {
                Ok(v) => Scalar::Int(v),
                Err(_) => Scalar::Str(s),
            },
            Scalar::Int(v) if !integer => Scalar::Str(v.to_string()),
            Scalar::Bool(b) => Scalar::Str(b.to_string()),
            other => other,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Scalar::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Int(i) => write!(f, "{i}"),
            Scalar::Str(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::Str(s.to_string())
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::Int(v)
    }
}

/// Value of a list-entry field: a leaf scalar or leaf-list items.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldValue {
    Scalar(Scalar),
    List(Vec<Scalar>),
}

impl FieldValue {
    pub fn scalar(&self) -> Option<&Scalar> {
        match self {
            FieldValue::Scalar(s) => Some(s),
            FieldValue::List(_) => None,
        }
    }

    pub fn items(&self) -> Vec<&Scalar> {
        match self {
            FieldValue::Scalar(s) => vec![s],
            FieldValue::List(v) => v.iter().collect(),
        }
    }

    pub fn coerce(self, ty: Option<&TypeSpec>) -> FieldValue {
        match self {
            FieldValue::Scalar(s) => FieldValue::Scalar(s.coerce(ty)),
            FieldValue::List(v) => FieldValue::List(v.into_iter().map(|s| s.coerce(ty)).collect()),
        }
    }
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldValue::Scalar(s) => write!(f, "{s}"),
            FieldValue::List(v) => {
                let items: Vec<String> = v.iter().map(ToString::to_string).collect();
                write!(f, "[{}]", items.join(", "))
            }
        }
    }
}

impl From<&str> for FieldValue {
    fn from(s: &str) -> Self {
        FieldValue::Scalar(s.into())
    }
}

/// A list entry: every field including the key leaves.
pub type ListEntry = BTreeMap<String, FieldValue>;

/// Key tuple of a list entry, as canonical strings in key order.
pub type KeyTuple = Vec<String>;

/// Instance data tree mirroring the resolved schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstanceNode {
    Container(BTreeMap<String, InstanceNode>),
    List(BTreeMap<KeyTuple, ListEntry>),
    Leaf(Scalar),
    LeafList(Vec<Scalar>),
}

impl InstanceNode {
    pub fn empty_container() -> Self {
        InstanceNode::Container(BTreeMap::new())
    }

    pub fn is_empty(&self) -> bool {
        match self {
            InstanceNode::Container(m) => m.is_empty(),
            InstanceNode::List(m) => m.is_empty(),
            InstanceNode::LeafList(v) => v.is_empty(),
            InstanceNode::Leaf(_) => false,
        }
    }

    /// Drops empty containers and lists below (and including) this node's children.
    pub fn prune(&mut self) {
        if let InstanceNode::Container(map) = self {
            for child in map.values_mut() {
                child.prune();
            }
            map.retain(|_, c| !c.is_empty());
        }
    }

    pub fn get(&self, names: &[&str]) -> Option<&InstanceNode> {
        let mut node = self;
        for n in names {
            match node {
                InstanceNode::Container(m) => node = m.get(*n)?,
                _ => return None,
            }
        }
        Some(node)
    }
}

/// Per-device instance tree keyed by module root container name.
pub type InstanceTree = BTreeMap<String, InstanceNode>;

pub fn tree_get<'a>(tree: &'a InstanceTree, names: &[&str]) -> Option<&'a InstanceNode> {
    let (first, rest) = names.split_first()?;
    tree.get(*first)?.get(rest)
}

pub fn prune_tree(tree: &mut InstanceTree) {
    for n in tree.values_mut() {
        n.prune();
    }
    tree.retain(|_, n| !n.is_empty());
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState {
    pub device_name: String,
    pub tree: InstanceTree,
    /// Where the state was loaded from, such as `/S0/config_db.json`.
    pub source_path: String,
    /// Top-level tables outside the schema, kept verbatim and never validated.
    pub unknown_tables: BTreeMap<String, serde_json::Value>,
}

impl DeviceState {
    pub fn empty(device_name: impl Into<String>) -> Self {
        let device_name = device_name.into();
        Self {
            source_path: format!("/{device_name}/config_db.json"),
            device_name,
            tree: InstanceTree::new(),
            unknown_tables: BTreeMap::new(),
        }
    }

    /// Renders the device back into config-DB JSON.
    pub fn to_config_db(&self, schema: &ResolvedSchema) -> serde_json::Value {
        configdb::to_config_db(self, schema)
    }

    /// Names of top-level tables present in the tree, with their schema path names.
    pub fn tables(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (root, node) in &self.tree {
            if let InstanceNode::Container(m) = node {
                for (table, t) in m {
                    if matches!(t, InstanceNode::Container(_)) {
                        out.push((root.clone(), table.clone()));
                    }
                }
            }
        }
        out.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    #[serde(rename = "a")]
    pub device_a: String,
    #[serde(rename = "a_port")]
    pub port_a: String,
    #[serde(rename = "b")]
    pub device_b: String,
    #[serde(rename = "b_port")]
    pub port_b: String,
}

#[derive(Debug, Error)]
pub enum StateError {
    #[error("link {0} names unknown device `{1}`")]
    UnknownLinkDevice(usize, String),
    #[error("device `{0}` defined twice")]
    DuplicateDevice(String),
    #[error(transparent)]
    ConfigDb(#[from] ConfigDbError),
    #[error("malformed state snapshot: {0}")]
    Snapshot(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// Snapshot of every device plus topology. Values are immutable; mutation
/// produces a new snapshot with a higher revision.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub devices: BTreeMap<String, DeviceState>,
    pub topology: Vec<Link>,
    pub revision: u64,
}

#[derive(Serialize, Deserialize)]
struct SnapshotDevice {
    source_path: String,
    config_db: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    revision: u64,
    #[serde(default)]
    topology: Vec<Link>,
    devices: BTreeMap<String, SnapshotDevice>,
}

impl NetworkState {
    pub fn new(devices: Vec<DeviceState>, topology: Vec<Link>, revision: u64) -> Result<Self, StateError> {
        let mut map = BTreeMap::new();
        for d in devices {
            if map.contains_key(&d.device_name) {
                return Err(StateError::DuplicateDevice(d.device_name));
            }
            map.insert(d.device_name.clone(), d);
        }
        for (i, l) in topology.iter().enumerate() {
            for dev in [&l.device_a, &l.device_b] {
                if !map.contains_key(dev) {
                    return Err(StateError::UnknownLinkDevice(i, dev.clone()));
                }
            }
        }
        Ok(Self {
            devices: map,
            topology,
            revision,
        })
    }

    pub fn empty() -> Self {
        Self {
            devices: BTreeMap::new(),
            topology: Vec::new(),
            revision: 0,
        }
    }

    pub fn device(&self, name: &str) -> Option<&DeviceState> {
        self.devices.get(name)
    }

    pub fn device_names(&self) -> Vec<&str> {
        self.devices.keys().map(String::as_str).collect()
    }

    /// Single-file JSON snapshot (revision, topology and every config DB).
    pub fn to_snapshot_json(&self, schema: &ResolvedSchema) -> String {
        let snap = Snapshot {
            revision: self.revision,
            topology: self.topology.clone(),
            devices: self
                .devices
                .iter()
                .map(|(n, d)| {
                    (
                        n.clone(),
                        SnapshotDevice {
                            source_path: d.source_path.clone(),
                            config_db: d.to_config_db(schema),
                        },
                    )
                })
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&snap).expect("snapshot serializes");
        out.push('\n');
        out
    }

    pub fn from_snapshot_json(schema: &ResolvedSchema, text: &str) -> Result<Self, StateError> {
        let snap: Snapshot = serde_json::from_str(text).map_err(|e| StateError::Snapshot(e.to_string()))?;
        let mut devices = Vec::new();
        for (name, d) in snap.devices {
            let body = serde_json::to_string(&d.config_db).expect("value serializes");
            let mut dev = load_device_state(schema, &body, &name)?;
            dev.source_path = d.source_path;
            devices.push(dev);
        }
        Self::new(devices, snap.topology, snap.revision)
    }

    /// Loads `<dir>/<DEVICE>/config_db.json` for each subdirectory and an
    /// optional `<dir>/topology.json`.
    pub fn load_dir(schema: &ResolvedSchema, dir: &Path) -> Result<Self, StateError> {
        let io = |path: &Path, source| StateError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut devices = Vec::new();
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| io(dir, e))?
            .filter_map(Result::ok)
            .filter(|e| e.path().is_dir())
            .collect();
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let db = e.path().join("config_db.json");
            if !db.exists() {
                continue;
            }
            let name = e.file_name().to_string_lossy().to_string();
            let text = std::fs::read_to_string(&db).map_err(|err| io(&db, err))?;
            devices.push(load_device_state(schema, &text, &name)?);
        }
        let topo_path = dir.join("topology.json");
        let topology = if topo_path.exists() {
            let text = std::fs::read_to_string(&topo_path).map_err(|e| io(&topo_path, e))?;
            parse_topology(&text)?
        } else {
            Vec::new()
        };
        Self::new(devices, topology, 0)
    }

    /// Loads either a snapshot file or a fixture directory.
    pub fn load_path(schema: &ResolvedSchema, path: &Path) -> Result<Self, StateError> {
        if path.is_dir() {
            Self::load_dir(schema, path)
        } else {
            let text = std::fs::read_to_string(path).map_err(|source| StateError::Io {
                path: path.display().to_string(),
                source,
            })?;
            Self::from_snapshot_json(schema, &text)
        }
    }
}

pub fn parse_topology(text: &str) -> Result<Vec<Link>, StateError> {
    serde_json::from_str(text).map_err(|e| StateError::Snapshot(format!("topology: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coercion_follows_leaf_type() {
        let int = TypeSpec::IntegerRange {
            kind: crate::schema::IntegerKind::Uint16,
            min: 0,
            max: 65535,
        };
        assert_eq!(Scalar::from("9100").coerce(Some(&int)), Scalar::Int(9100));
        assert_eq!(Scalar::from("x").coerce(Some(&int)), Scalar::from("x"));
        assert_eq!(Scalar::Int(4).coerce(Some(&TypeSpec::String)), Scalar::from("4"));
        assert_eq!(Scalar::Bool(true).coerce(None), Scalar::from("true"));
    }

    #[test]
    fn prune_removes_empty_branches() {
        let mut tree = InstanceTree::new();
        let mut inner = BTreeMap::new();
        inner.insert("L".to_string(), InstanceNode::List(BTreeMap::new()));
        let mut table = BTreeMap::new();
        table.insert("T".to_string(), InstanceNode::Container(inner));
        tree.insert("root".into(), InstanceNode::Container(table));
        prune_tree(&mut tree);
        assert!(tree.is_empty());
    }

    #[test]
    fn links_must_name_known_devices() {
        let link = Link {
            device_a: "L0".into(),
            port_a: "Ethernet4".into(),
            device_b: "S9".into(),
            port_b: "Ethernet4".into(),
        };
        let err = NetworkState::new(vec![DeviceState::empty("L0")], vec![link], 0).unwrap_err();
        assert!(matches!(err, StateError::UnknownLinkDevice(0, d) if d == "S9"));
    }
}
