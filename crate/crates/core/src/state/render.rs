//! Natural-language and raw renderings of device state for retrieval.

use std::fmt::Write;

use super::{DeviceState, FieldValue, InstanceNode, ListEntry, NetworkState};
use crate::schema::{ResolvedSchema, SchemaPath};

/// `S0` becomes `Spine0 (S0)`, `L1` becomes `Leaf1 (L1)`; other names pass through.
pub fn device_display_name(name: &str) -> String {
    let role = match name.chars().next() {
        Some('S') => "Spine",
        Some('L') => "Leaf",
        _ => return name.to_string(),
    };
    let rest = &name[1..];
    if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
        format!("{role}{rest} ({name})")
    } else {
        name.to_string()
    }
}

struct Fact {
    path: Vec<String>,
    label: String,
    sentence: String,
}

struct Sentence<'a> {
    entry: &'a ListEntry,
    used: Vec<&'a str>,
    text: String,
}

impl<'a> Sentence<'a> {
    fn new(entry: &'a ListEntry, text: &str, used: &[&'a str]) -> Self {
        Self {
            entry,
            used: used.to_vec(),
            text: text.to_string(),
        }
    }

    fn take(&mut self, field: &'a str) -> Option<String> {
        let v = self.entry.get(field)?;
        self.used.push(field);
        Some(v.to_string())
    }

    fn opt(&mut self, field: &'a str, before: &str, after: &str) -> bool {
        match self.take(field) {
            Some(v) => {
                let _ = write!(self.text, "{before}{v}{after}");
                true
            }
            None => false,
        }
    }

    fn finish(mut self) -> String {
        for (k, v) in self.entry {
            if !self.used.contains(&k.as_str()) {
                let _ = write!(self.text, ", {k} {v}");
            }
        }
        self.text
    }
}

fn key_text(key: &[String]) -> String {
    key.join("|")
}

fn list_sentence(list: &str, key_leaves: &[&str], key: &[String], entry: &ListEntry) -> (String, String) {
    match list {
        "PORT_LIST" => {
            let mut s = Sentence::new(entry, "Interface", key_leaves);
            s.opt("admin_status", " ", "");
            let speed = s.opt("speed", " with speed ", " Mbps");
            s.opt("mtu", if speed { " and MTU " } else { " with MTU " }, "");
            (key_text(key), s.finish())
        }
        "INTERFACE_LIST" => {
            let s = Sentence::new(entry, "Layer-3 interface enabled", key_leaves);
            (key_text(key), s.finish())
        }
        "INTERFACE_IPPREFIX_LIST" if key.len() == 2 => {
            let mut s = Sentence::new(entry, "IP address ", key_leaves);
            s.text.push_str(&key[1]);
            s.text.push_str(" assigned");
            (key[0].clone(), s.finish())
        }
        "BGP_NEIGHBOR_LIST" => {
            let mut s = Sentence::new(entry, "BGP neighbor", key_leaves);
            s.opt("asn", " in AS ", "");
            (key_text(key), s.finish())
        }
        "ACL_TABLE_LIST" => {
            let mut s = Sentence::new(entry, "ACL table", key_leaves);
            s.opt("type", " of type ", "");
            s.opt("stage", " at ", " stage");
            s.opt("ports", " bound to ", "");
            (key_text(key), s.finish())
        }
        "ACL_RULE_LIST" => {
            let mut s = Sentence::new(entry, "ACL rule", key_leaves);
            s.opt("PACKET_ACTION", " with action ", "");
            s.opt("PRIORITY", " at priority ", "");
            (key_text(key), s.finish())
        }
        _ => {
            let s = Sentence::new(entry, &format!("{list} entry"), key_leaves);
            (key_text(key), s.finish())
        }
    }
}

fn key_leaf_names(entry: &ListEntry, key: &[String]) -> Vec<String> {
    // key leaves are the fields whose values spell out the key tuple, in order
    let mut out = Vec::new();
    for part in key {
        if let Some((name, _)) = entry
            .iter()
            .find(|(n, v)| !out.contains(*n) && matches!(v, FieldValue::Scalar(s) if &s.to_string() == part))
        {
            out.push(name.clone());
        }
    }
    out
}

fn collect(prefix: &mut Vec<String>, node: &InstanceNode, out: &mut Vec<Fact>) {
    match node {
        InstanceNode::Container(map) => {
            let mut leaves = ListEntry::new();
            for (name, child) in map {
                match child {
                    InstanceNode::Leaf(s) => {
                        leaves.insert(name.clone(), FieldValue::Scalar(s.clone()));
                    }
                    InstanceNode::LeafList(v) => {
                        leaves.insert(name.clone(), FieldValue::List(v.clone()));
                    }
                    _ => {
                        prefix.push(name.clone());
                        collect(prefix, child, out);
                        prefix.pop();
                    }
                }
            }
            if !leaves.is_empty() {
                let label = prefix.last().cloned().unwrap_or_default();
                let s = Sentence::new(&leaves, "Settings", &[]);
                out.push(Fact {
                    path: prefix.clone(),
                    label,
                    sentence: s.finish().replacen("Settings, ", "Settings: ", 1),
                });
            }
        }
        InstanceNode::List(entries) => {
            let list = prefix.last().cloned().unwrap_or_default();
            for (key, entry) in entries {
                let names = key_leaf_names(entry, key);
                let refs: Vec<&str> = names.iter().map(String::as_str).collect();
                let (label, sentence) = list_sentence(&list, &refs, key, entry);
                let mut path = prefix.clone();
                path.push(key_text(key));
                out.push(Fact { path, label, sentence });
            }
        }
        InstanceNode::Leaf(_) | InstanceNode::LeafList(_) => {}
    }
}

fn in_scope(path: &[String], scope: Option<&[SchemaPath]>) -> bool {
    match scope {
        None => true,
        Some(paths) => paths.iter().any(|p| {
            p.len() <= path.len() && p.names().zip(path).all(|(a, b)| a == b)
        }),
    }
}

fn device_facts(device: &DeviceState, scope: Option<&[SchemaPath]>) -> Vec<Fact> {
    let mut facts = Vec::new();
    for (root, node) in &device.tree {
        let mut prefix = vec![root.clone()];
        collect(&mut prefix, node, &mut facts);
    }
    facts.retain(|f| in_scope(&f.path, scope));
    facts.sort_by(|a, b| a.path.cmp(&b.path));
    facts
}

fn write_device(out: &mut String, device: &DeviceState, scope: Option<&[SchemaPath]>) {
    let _ = writeln!(out, "{}", device_display_name(&device.device_name));
    for f in device_facts(device, scope) {
        let _ = writeln!(
            out,
            "  {} \u{2014} {}: {} [{}]",
            device.device_name, f.label, f.sentence, device.source_path
        );
    }
}

/// Renders every device as a header line followed by one line per fact.
/// `scope` keeps only facts under one of the given paths (names compared
/// without prefixes); an empty scope leaves just the headers.
pub fn render_state_nl(state: &NetworkState, scope: Option<&[SchemaPath]>) -> String {
    let mut out = String::new();
    for device in state.devices.values() {
        write_device(&mut out, device, scope);
    }
    out
}

/// NL rendering of one table (`root/table`) on one device.
pub fn render_table_nl(device: &DeviceState, root: &str, table: &str) -> String {
    let scope = [SchemaPath::from_names([root, table])];
    let mut out = String::new();
    write_device(&mut out, device, Some(&scope));
    out
}

/// Config-DB JSON of one table, tagged with its source file.
pub fn render_table_raw(device: &DeviceState, table: &str, schema: &ResolvedSchema) -> String {
    let db = device.to_config_db(schema);
    let body = db.get(table).cloned().unwrap_or(serde_json::Value::Object(Default::default()));
    let mut wrapped = serde_json::Map::new();
    wrapped.insert(table.to_string(), body);
    format!(
        "{} [{}]\n{}\n",
        device_display_name(&device.device_name),
        device.source_path,
        serde_json::to_string_pretty(&serde_json::Value::Object(wrapped)).expect("json serializes")
    )
}
