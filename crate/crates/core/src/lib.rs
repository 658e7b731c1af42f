//! Core of the netlingua natural-language network control framework.
//!
//! The crate is organized around the pipeline a request travels through:
//!
//! - [`schema`]: YANG-subset IR definition (parse, resolve, path lookup)
//! - [`state`]: per-device config databases and the append/remove change-set IR
//! - [`validator`]: schema verification of change-sets and instance trees
//! - [`memory`]: network-state and IR-documentation stores with dense retrieval
//! - [`agent`]: the retrieve / clarify / generate / verify / repair / confirm loop
//! - [`nile`]: Nile intent grammar, metrics and the grammar-feedback repair loop
//! - [`eval`]: batch harness producing accuracy, iteration and latency reports

pub mod schema;
pub mod state;
pub mod validator;
pub mod memory;
pub mod agent;
pub mod nile;
pub mod eval;

pub mod fixtures;
