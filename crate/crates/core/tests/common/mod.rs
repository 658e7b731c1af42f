//! Random small network states and change sets over the bundled schema.
#![allow(dead_code)]

use netlingua_core::fixtures;
use netlingua_core::schema::{ResolvedSchema, SchemaPath};
use netlingua_core::state::{load_device_state, Action, ChangeOp, ChangeSet, NetworkState};
use proptest::prelude::*;
use serde_json::{json, Map, Value};
use std::sync::OnceLock;

pub fn schema() -> &'static ResolvedSchema {
    static S: OnceLock<ResolvedSchema> = OnceLock::new();
    S.get_or_init(fixtures::schema)
}

pub const PORTS: [&str; 4] = ["Ethernet0", "Ethernet4", "Ethernet8", "Ethernet12"];
pub const PREFIXES: [&str; 4] = ["10.0.0.1/31", "10.0.0.3/31", "10.1.0.1/24", "192.168.1.1/24"];

#[derive(Debug, Clone)]
struct PortSpec {
    present: bool,
    up: bool,
    mtu: Option<u16>,
    speed: Option<u32>,
}

#[derive(Debug, Clone)]
struct DeviceSpec {
    ports: Vec<PortSpec>,
    l3: Vec<bool>,
    prefixes: Vec<(usize, usize)>,
}

fn port_spec() -> impl Strategy<Value = PortSpec> {
    (
        any::<bool>(),
        any::<bool>(),
        proptest::option::of(prop_oneof![Just(1500u16), Just(9100u16), 68u16..9216]),
        proptest::option::of(prop_oneof![Just(10000u32), Just(100000u32)]),
    )
        .prop_map(|(present, up, mtu, speed)| PortSpec { present, up, mtu, speed })
}

fn device_spec() -> impl Strategy<Value = DeviceSpec> {
    (
        proptest::collection::vec(port_spec(), 4),
        proptest::collection::vec(any::<bool>(), 4),
        proptest::collection::vec((0usize..4, 0usize..4), 0..4),
    )
        .prop_map(|(ports, l3, prefixes)| DeviceSpec { ports, l3, prefixes })
}

fn config_db(spec: &DeviceSpec) -> Value {
    let mut port = Map::new();
    for (i, p) in spec.ports.iter().enumerate().filter(|(_, p)| p.present) {
        let mut fields = Map::new();
        fields.insert("admin_status".into(), json!(if p.up { "up" } else { "down" }));
        if let Some(m) = p.mtu {
            fields.insert("mtu".into(), json!(m.to_string()));
        }
        if let Some(s) = p.speed {
            fields.insert("speed".into(), json!(s.to_string()));
        }
        port.insert(PORTS[i].into(), Value::Object(fields));
    }
    let mut intf = Map::new();
    for (i, on) in spec.l3.iter().enumerate() {
        if *on {
            intf.insert(PORTS[i].into(), json!({}));
        }
    }
    for (p, ip) in &spec.prefixes {
        intf.insert(format!("{}|{}", PORTS[*p], PREFIXES[*ip]), json!({}));
    }
    json!({"PORT": port, "INTERFACE": intf})
}

fn build_state(specs: &[DeviceSpec; 2]) -> NetworkState {
    let devices = ["L0", "S0"]
        .iter()
        .zip(specs)
        .map(|(name, spec)| {
            load_device_state(schema(), &config_db(spec).to_string(), name).expect("generated config DB loads")
        })
        .collect();
    NetworkState::new(devices, Vec::new(), 0).unwrap()
}

pub fn states() -> impl Strategy<Value = NetworkState> {
    (device_spec(), device_spec()).prop_map(|(a, b)| build_state(&[a, b]))
}

pub fn ipprefix_path() -> SchemaPath {
    SchemaPath::from_segments([
        "sonic-interface:sonic-interface",
        "sonic-interface:INTERFACE",
        "INTERFACE_IPPREFIX_LIST",
    ])
    .unwrap()
}

pub fn port_path() -> SchemaPath {
    SchemaPath::from_segments(["sonic-port:sonic-port", "sonic-port:PORT", "PORT_LIST"]).unwrap()
}

/// Candidate ops; some will fail to apply, which the properties tolerate.
fn op() -> impl Strategy<Value = (bool, ChangeOp)> {
    (any::<bool>(), any::<bool>(), any::<bool>(), 0usize..4, 0usize..4, 68u16..9216).prop_map(
        |(device, append, on_port, p, ip, mtu)| {
            let action = if append { Action::Append } else { Action::Remove };
            let op = if on_port {
                let op = ChangeOp::new(action, port_path()).with("name", PORTS[p]);
                if append {
                    op.with("mtu", mtu.to_string().as_str())
                } else {
                    op
                }
            } else {
                ChangeOp::new(action, ipprefix_path())
                    .with("name", PORTS[p])
                    .with("ip-prefix", PREFIXES[ip])
            };
            (device, op)
        },
    )
}

pub fn change_sets() -> impl Strategy<Value = ChangeSet> {
    proptest::collection::vec(op(), 0..6).prop_map(|ops| {
        let mut cs = ChangeSet::new();
        for (dev, op) in ops {
            cs.push(if dev { "L0" } else { "S0" }, op);
        }
        cs
    })
}

