//! Bundled fixtures: SONiC-style YANG modules and the 4-device Clos network
//! (spines `S0`, `S1`; leaves `L0`, `L1`).

use crate::schema::{self, ResolvedSchema, SchemaError, SchemaModule};
use std::sync::Arc;

use crate::agent::{AgentContext, LlmBackend, MockScript, UserReply};
use crate::memory::MemoryStore;
use crate::state::{self, NetworkState};

pub const YANG_MODULES: &[(&str, &str)] = &[
    ("sonic-types.yang", include_str!("../fixtures/yang/sonic-types.yang")),
    ("sonic-port.yang", include_str!("../fixtures/yang/sonic-port.yang")),
    ("sonic-interface.yang", include_str!("../fixtures/yang/sonic-interface.yang")),
    ("sonic-acl.yang", include_str!("../fixtures/yang/sonic-acl.yang")),
    ("sonic-bgp-neighbor.yang", include_str!("../fixtures/yang/sonic-bgp-neighbor.yang")),
];

pub const CLOS_DEVICES: &[&str] = &["S0", "S1", "L0", "L1"];

pub const CLOS_CONFIG_DB: &[(&str, &str)] = &[
    ("S0", include_str!("../fixtures/clos/S0/config_db.json")),
    ("S1", include_str!("../fixtures/clos/S1/config_db.json")),
    ("L0", include_str!("../fixtures/clos/L0/config_db.json")),
    ("L1", include_str!("../fixtures/clos/L1/config_db.json")),
];

pub const CLOS_TOPOLOGY: &str = include_str!("../fixtures/clos/topology.json");

/// The request from the IP configuration walkthrough, verbatim.
pub const CONNECT_ETHERNET4_QUERY: &str = "Connect Ethernet4 of each Leaf to Ethernet4 of each Spine and assign IP addresses to them to bring up connectivity";

pub fn schema_modules() -> Result<Vec<SchemaModule>, SchemaError> {
    YANG_MODULES.iter().map(|(_, src)| schema::parse_module(src)).collect()
}

pub fn schema() -> ResolvedSchema {
    schema::resolve(schema_modules().expect("bundled modules parse")).expect("bundled modules resolve")
}

/// The Clos network loaded from the bundled config DBs, at revision 0.
pub fn clos_state() -> NetworkState {
    let schema = schema();
    let devices = CLOS_CONFIG_DB
        .iter()
        .map(|(name, text)| state::load_device_state(&schema, text, name).expect("bundled config DB loads"))
        .collect();
    let topology = state::parse_topology(CLOS_TOPOLOGY).expect("bundled topology parses");
    NetworkState::new(devices, topology, 0).expect("bundled network is consistent")
}

/// Scripted run of the subnet-override walkthrough: the mock outputs and
/// the operator replies, in order.
pub const WALKTHROUGH: &str = include_str!("../fixtures/transcripts/connect-ethernet4.json");

#[derive(Debug, Clone, serde::Deserialize)]
pub struct Walkthrough {
    pub query: String,
    pub replies: Vec<UserReply>,
    pub script: MockScript,
}

pub fn walkthrough() -> Walkthrough {
    serde_json::from_str(WALKTHROUGH).expect("bundled walkthrough parses")
}

/// An agent context over the bundled schema with a fresh offline store.
pub fn agent_context(backend: Arc<dyn LlmBackend>) -> AgentContext {
    AgentContext {
        backend,
        memory: Arc::new(MemoryStore::offline()),
        schema: Arc::new(schema()),
        schema_modules: Arc::new(schema_modules().expect("bundled modules parse")),
    }
}

/// A recorded run of [`WALKTHROUGH`], one turn per line.
pub const WALKTHROUGH_TRANSCRIPT: &str = include_str!("../fixtures/transcripts/connect-ethernet4.jsonl");
