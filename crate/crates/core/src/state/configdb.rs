//! Reading and writing config-DB JSON documents.
//!
//! A document maps table names to objects keyed by the `|`-joined key tuple
//! of a list entry. Values are strings (or arrays for leaf-lists) and are
//! converted to typed scalars using the schema.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserialize, Deserializer, MapAccess, SeqAccess, Visitor};
use serde_json::{Map, Value};
use thiserror::Error;

use super::{DeviceState, FieldValue, InstanceNode, KeyTuple, ListEntry, Scalar};
use crate::schema::{NodeKind, ResolvedSchema, SchemaNode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigDbError {
    #[error("{device}: invalid JSON: {message}")]
    Json { device: String, message: String },
    #[error("{device}: duplicate key `{key}` in {location}")]
    DuplicateKey {
        device: String,
        location: String,
        key: String,
    },
    #[error("{device}: {location}: {message}")]
    Malformed {
        device: String,
        location: String,
        message: String,
    },
}

/// JSON value that keeps duplicate object keys so they can be reported.
#[derive(Debug, Clone)]
enum Raw {
    Null,
    Bool(bool),
    Number(serde_json::Number),
    Str(String),
    Array(Vec<Raw>),
    Object(Vec<(String, Raw)>),
}

impl<'de> Deserialize<'de> for Raw {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Raw;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a JSON value")
            }
            fn visit_unit<E>(self) -> Result<Raw, E> {
                Ok(Raw::Null)
            }
            fn visit_bool<E>(self, v: bool) -> Result<Raw, E> {
                Ok(Raw::Bool(v))
            }
            fn visit_i64<E>(self, v: i64) -> Result<Raw, E> {
                Ok(Raw::Number(v.into()))
            }
            fn visit_u64<E>(self, v: u64) -> Result<Raw, E> {
                Ok(Raw::Number(v.into()))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Raw, E> {
                serde_json::Number::from_f64(v)
                    .map(Raw::Number)
                    .ok_or_else(|| E::custom("non-finite number"))
            }
            fn visit_str<E>(self, v: &str) -> Result<Raw, E> {
                Ok(Raw::Str(v.to_string()))
            }
            fn visit_string<E>(self, v: String) -> Result<Raw, E> {
                Ok(Raw::Str(v))
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Raw, A::Error> {
                let mut out = Vec::new();
                while let Some(v) = seq.next_element()? {
                    out.push(v);
                }
                Ok(Raw::Array(out))
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Raw, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Raw>()? {
                    out.push((k, v));
                }
                Ok(Raw::Object(out))
            }
        }
        d.deserialize_any(V)
    }
}

impl Raw {
    fn into_value(self) -> Value {
        match self {
            Raw::Null => Value::Null,
            Raw::Bool(b) => Value::Bool(b),
            Raw::Number(n) => Value::Number(n),
            Raw::Str(s) => Value::String(s),
            Raw::Array(v) => Value::Array(v.into_iter().map(Raw::into_value).collect()),
            Raw::Object(pairs) => Value::Object(pairs.into_iter().map(|(k, v)| (k, v.into_value())).collect()),
        }
    }
}

fn raw_scalar(raw: &Raw) -> Option<Scalar> {
    match raw {
        Raw::Str(s) => Some(Scalar::Str(s.clone())),
        Raw::Number(n) => n.as_i64().map(Scalar::Int),
        Raw::Bool(b) => Some(Scalar::Bool(*b)),
        _ => None,
    }
}

fn check_unique(device: &str, location: &str, pairs: &[(String, Raw)]) -> Result<(), ConfigDbError> {
    let mut seen = std::collections::BTreeSet::new();
    for (k, _) in pairs {
        if !seen.insert(k.as_str()) {
            return Err(ConfigDbError::DuplicateKey {
                device: device.to_string(),
                location: location.to_string(),
                key: k.clone(),
            });
        }
    }
    Ok(())
}

struct Loader<'a> {
    device: &'a str,
}

impl Loader<'_> {
    fn malformed(&self, location: &str, message: impl Into<String>) -> ConfigDbError {
        ConfigDbError::Malformed {
            device: self.device.to_string(),
            location: location.to_string(),
            message: message.into(),
        }
    }

    fn field(&self, schema_node: &SchemaNode, location: &str, name: &str, raw: &Raw) -> Result<FieldValue, ConfigDbError> {
        let child = schema_node
            .child(name)
            .filter(|c| c.kind.is_data_leaf())
            .ok_or_else(|| self.malformed(location, format!("unknown field `{name}`")))?;
        let ty = child.type_spec();
        match (child.kind, raw) {
            (NodeKind::LeafList, Raw::Array(items)) => {
                let mut out = Vec::new();
                for item in items {
                    let s = raw_scalar(item)
                        .ok_or_else(|| self.malformed(location, format!("field `{name}` holds a non-scalar item")))?;
                    out.push(s.coerce(ty));
                }
                Ok(FieldValue::List(out))
            }
            // single-valued leaf-lists are sometimes written as a comma-separated string
            (NodeKind::LeafList, Raw::Str(s)) => Ok(FieldValue::List(
                s.split(',')
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(|p| Scalar::from(p).coerce(ty))
                    .collect(),
            )),
            (NodeKind::Leaf, raw) => raw_scalar(raw)
                .map(|s| FieldValue::Scalar(s.coerce(ty)))
                .ok_or_else(|| self.malformed(location, format!("field `{name}` must be a scalar"))),
            _ => Err(self.malformed(location, format!("field `{name}` has the wrong shape"))),
        }
    }

    fn list_entry(&self, list: &SchemaNode, location: &str, key_text: &str, body: &Raw) -> Result<(KeyTuple, ListEntry), ConfigDbError> {
        let parts: Vec<&str> = key_text.split('|').collect();
        let mut entry = ListEntry::new();
        for (leaf, part) in list.key_leaves.iter().zip(&parts) {
            let ty = list.child(leaf).and_then(SchemaNode::type_spec);
            entry.insert(leaf.clone(), FieldValue::Scalar(Scalar::from(*part).coerce(ty)));
        }
        let pairs = match body {
            Raw::Object(p) => p,
            Raw::Null => &Vec::new(),
            _ => return Err(self.malformed(location, format!("entry `{key_text}` must be an object"))),
        };
        let entry_loc = format!("{location}[{key_text}]");
        check_unique(self.device, &entry_loc, pairs)?;
        for (name, raw) in pairs {
            let value = self.field(list, &entry_loc, name, raw)?;
            if let Some(existing) = entry.get(name) {
                if existing != &value {
                    return Err(self.malformed(&entry_loc, format!("key field `{name}` disagrees with the entry key")));
                }
                continue;
            }
            entry.insert(name.clone(), value);
        }
        if parts.len() != list.key_leaves.len() {
            return Err(self.malformed(location, format!("entry `{key_text}` has the wrong key arity")));
        }
        let key = list.key_leaves.iter().map(|l| entry[l].to_string()).collect();
        Ok((key, entry))
    }
}

/// Parses one device's config-DB JSON. Tables outside the schema are kept
/// verbatim in [`DeviceState::unknown_tables`].
pub fn load_device_state(schema: &ResolvedSchema, text: &str, device: &str) -> Result<DeviceState, ConfigDbError> {
    let loader = Loader { device };
    let raw: Raw = serde_json::from_str(text).map_err(|e| ConfigDbError::Json {
        device: device.to_string(),
        message: e.to_string(),
    })?;
    let Raw::Object(tables) = raw else {
        return Err(loader.malformed("document", "top level must be an object"));
    };
    check_unique(device, "document", &tables)?;
    let mut state = DeviceState::empty(device);
    for (table_name, body) in tables {
        let Some(table) = schema.table(&table_name) else {
            state.unknown_tables.insert(table_name, body.into_value());
            continue;
        };
        let Raw::Object(entries) = &body else {
            return Err(loader.malformed(&table_name, "table must be an object"));
        };
        check_unique(device, &table_name, entries)?;
        let mut table_map: BTreeMap<String, InstanceNode> = BTreeMap::new();
        for (key_text, entry_body) in entries {
            if let Some(container) = table.table.child(key_text).filter(|c| c.kind == NodeKind::Container) {
                let loc = format!("{table_name}[{key_text}]");
                let Raw::Object(pairs) = entry_body else {
                    return Err(loader.malformed(&loc, "entry must be an object"));
                };
                check_unique(device, &loc, pairs)?;
                let mut leaves = BTreeMap::new();
                for (name, raw) in pairs {
                    let node = match loader.field(container, &loc, name, raw)? {
                        FieldValue::Scalar(s) => InstanceNode::Leaf(s),
                        FieldValue::List(v) => InstanceNode::LeafList(v),
                    };
                    leaves.insert(name.clone(), node);
                }
                table_map.insert(key_text.clone(), InstanceNode::Container(leaves));
                continue;
            }
            let arity = key_text.split('|').count();
            let list = table.list_for_arity(arity).ok_or_else(|| {
                loader.malformed(&table_name, format!("no list takes a {arity}-part key (`{key_text}`)"))
            })?;
            let (key, entry) = loader.list_entry(list, &table_name, key_text, entry_body)?;
            let slot = table_map
                .entry(list.name.clone())
                .or_insert_with(|| InstanceNode::List(BTreeMap::new()));
            if let InstanceNode::List(m) = slot {
                if m.insert(key, entry).is_some() {
                    return Err(ConfigDbError::DuplicateKey {
                        device: device.to_string(),
                        location: table_name.clone(),
                        key: key_text.clone(),
                    });
                }
            }
        }
        let root = state
            .tree
            .entry(table.root.name.clone())
            .or_insert_with(InstanceNode::empty_container);
        if let InstanceNode::Container(m) = root {
            m.insert(table_name, InstanceNode::Container(table_map));
        }
    }
    super::prune_tree(&mut state.tree);
    Ok(state)
}

fn scalar_json(s: &Scalar) -> Value {
    Value::String(s.to_string())
}

fn field_json(v: &FieldValue) -> Value {
    match v {
        FieldValue::Scalar(s) => scalar_json(s),
        FieldValue::List(items) => Value::Array(items.iter().map(scalar_json).collect()),
    }
}

fn list_rows(schema_list: Option<&SchemaNode>, entries: &BTreeMap<KeyTuple, ListEntry>, out: &mut BTreeMap<String, Value>) {
    for (key, entry) in entries {
        let mut fields = Map::new();
        for (name, value) in entry {
            if schema_list.is_some_and(|l| l.is_key(name)) {
                continue;
            }
            fields.insert(name.clone(), field_json(value));
        }
        out.insert(key.join("|"), Value::Object(fields));
    }
}

pub(super) fn to_config_db(state: &DeviceState, schema: &ResolvedSchema) -> Value {
    let mut tables: BTreeMap<String, Value> = BTreeMap::new();
    for (root_name, root) in &state.tree {
        let InstanceNode::Container(root_map) = root else {
            continue;
        };
        for (table_name, table) in root_map {
            let InstanceNode::Container(children) = table else {
                continue;
            };
            let table_schema = schema.table(table_name).filter(|t| &t.root.name == root_name);
            let mut rows = BTreeMap::new();
            for (child_name, child) in children {
                match child {
                    InstanceNode::List(entries) => {
                        let list_schema = table_schema.as_ref().and_then(|t| t.table.child(child_name));
                        list_rows(list_schema, entries, &mut rows);
                    }
                    InstanceNode::Container(leaves) => {
                        let mut fields = Map::new();
                        for (n, l) in leaves {
                            match l {
                                InstanceNode::Leaf(s) => {
                                    fields.insert(n.clone(), scalar_json(s));
                                }
                                InstanceNode::LeafList(v) => {
                                    fields.insert(n.clone(), Value::Array(v.iter().map(scalar_json).collect()));
                                }
                                _ => {}
                            }
                        }
                        rows.insert(child_name.clone(), Value::Object(fields));
                    }
                    _ => {}
                }
            }
            tables.insert(table_name.clone(), Value::Object(rows.into_iter().collect()));
        }
    }
    for (name, value) in &state.unknown_tables {
        tables.insert(name.clone(), value.clone());
    }
    Value::Object(tables.into_iter().collect())
}
