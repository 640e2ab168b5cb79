//! Explicit-state model checker and simulator for the core Raft protocol
//! (leader election and log replication) over lossy or reliable networks
//! with crash-stop failures.

pub mod checker;
pub mod cli;
pub mod cluster;
pub mod network;
pub mod server;
pub mod types;

pub use checker::{CheckReport, InvariantId, Limits, Trace};
pub use cluster::{
    enabled_transitions, initial_state, ActionLabel, GlobalState, TimeoutKind, Transition,
};
pub use network::{NetMessage, NetState, Payload, Rpc};
pub use server::{ModelError, Role, ServerRecord};
pub use types::{
    majority, Config, ConfigError, Entry, InjectedBug, Log, NetworkModel, ServerId, Term,
};
