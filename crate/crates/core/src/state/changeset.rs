use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::FieldValue;
use crate::schema::SchemaPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Append,
    Remove,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Append => "append",
            Action::Remove => "remove",
        })
    }
}

/// One edit against a list or container addressed by a schema path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeOp {
    pub action: Action,
    pub path: SchemaPath,
    #[serde(default)]
    pub value: IndexMap<String, FieldValue>,
}

impl ChangeOp {
    pub fn new(action: Action, path: SchemaPath) -> Self {
        Self {
            action,
            path,
            value: IndexMap::new(),
        }
    }

    pub fn with(mut self, field: &str, value: impl Into<FieldValue>) -> Self {
        self.value.insert(field.to_string(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceChanges {
    pub device: String,
    pub config: Vec<ChangeOp>,
}

/// Ordered per-device edits, serialized as
/// `[{"device": ..., "config": [{"action", "path", "value"}, ...]}, ...]`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChangeSet(pub Vec<DeviceChanges>);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChangeSetError {
    #[error("change set is not valid JSON: {0}")]
    Json(String),
    #[error("entry {0} has an empty device name")]
    EmptyDevice(usize),
    #[error("entry {entry} op {op} has an empty path")]
    EmptyPath { entry: usize, op: usize },
}

impl ChangeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, ChangeSetError> {
        let cs: ChangeSet = serde_json::from_value(value).map_err(|e| ChangeSetError::Json(e.to_string()))?;
        cs.check()?;
        Ok(cs)
    }

    pub fn from_json(text: &str) -> Result<Self, ChangeSetError> {
        let cs: ChangeSet = serde_json::from_str(text).map_err(|e| ChangeSetError::Json(e.to_string()))?;
        cs.check()?;
        Ok(cs)
    }

    fn check(&self) -> Result<(), ChangeSetError> {
        for (i, d) in self.0.iter().enumerate() {
            if d.device.trim().is_empty() {
                return Err(ChangeSetError::EmptyDevice(i));
            }
            for (j, op) in d.config.iter().enumerate() {
                if op.path.is_empty() {
                    return Err(ChangeSetError::EmptyPath { entry: i, op: j });
                }
            }
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("change set serializes")
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|d| d.config.is_empty())
    }

    pub fn op_count(&self) -> usize {
        self.0.iter().map(|d| d.config.len()).sum()
    }

    /// Appends ops for a device, reusing its existing entry when present.
    pub fn push(&mut self, device: &str, op: ChangeOp) {
        match self.0.iter_mut().find(|d| d.device == device) {
            Some(d) => d.config.push(op),
            None => self.0.push(DeviceChanges {
                device: device.to_string(),
                config: vec![op],
            }),
        }
    }

    pub fn devices(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|d| d.device.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WIRE: &str = r#"[{"device":"S0","config":[{"action":"remove","path":["sonic-interface:sonic-interface","sonic-interface:INTERFACE","INTERFACE_IPPREFIX_LIST"],"value":{"name":"Ethernet8","ip-prefix":"10.0.2.1/24"}},{"action":"append","path":["sonic-interface:sonic-interface","sonic-interface:INTERFACE","INTERFACE_IPPREFIX_LIST"],"value":{"name":"Ethernet8","ip-prefix":"10.0.5.1/24"}}]}]"#;

    #[test]
    fn wire_format_round_trips_byte_for_byte() {
        let cs = ChangeSet::from_json(WIRE).unwrap();
        assert_eq!(cs.op_count(), 2);
        assert_eq!(cs.0[0].config[0].action, Action::Remove);
        assert_eq!(serde_json::to_string(&cs).unwrap(), WIRE);
    }

    #[test]
    fn rejects_empty_device_and_bad_action() {
        assert_eq!(
            ChangeSet::from_json(r#"[{"device":"","config":[]}]"#),
            Err(ChangeSetError::EmptyDevice(0))
        );
        assert!(matches!(
            ChangeSet::from_json(r#"[{"device":"S0","config":[{"action":"replace","path":["a"],"value":{}}]}]"#),
            Err(ChangeSetError::Json(_))
        ));
    }

    #[test]
    fn string_paths_are_accepted() {
        let cs = ChangeSet::from_json(
            r#"[{"device":"L0","config":[{"action":"append","path":"sonic-port:sonic-port/sonic-port:PORT/PORT_LIST","value":{"name":"Ethernet12","mtu":"9100","speed":100000}}]}]"#,
        )
        .unwrap();
        let op = &cs.0[0].config[0];
        assert_eq!(op.path.len(), 3);
        assert_eq!(op.value["speed"], FieldValue::Scalar(super::super::Scalar::Int(100000)));
    }
}
