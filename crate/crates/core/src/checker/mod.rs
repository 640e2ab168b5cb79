//! Explicit-state checking: exhaustive BFS, random walks, LTS export.

mod codec;
pub mod explore;
pub mod invariants;
pub mod lts;
pub mod store;
pub mod trace;
pub mod walk;

use serde::{Deserialize, Serialize};

pub use codec::{decode, encode_to_vec};
pub use explore::{explore, explore_with, Edge, Exploration, ExploreOptions};
pub use invariants::{check_state, check_transition, GhostHistory, InvariantId};
pub use lts::export_lts;
pub use store::StateStore;
pub use trace::{replay, replay_check, Finding, ReplayError, Trace};
pub use walk::{random_walk, WalkEnd, WalkReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_states: usize,
    pub max_depth: usize,
}

impl Default for Limits {
    fn default() -> Limits {
        Limits {
            max_states: 50_000_000,
            max_depth: usize::MAX,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub invariant: InvariantId,
    pub detail: String,
    pub trace: Trace,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckReport {
    pub states_explored: u64,
    pub transitions: u64,
    pub terminal_states: u64,
    /// Largest BFS depth reached.
    pub depth: u64,
    pub violations: Vec<Violation>,
    /// A state or depth limit cut the exploration short.
    pub truncated: bool,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}
