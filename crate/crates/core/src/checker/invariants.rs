//! Raft safety properties, checked per state or per transition.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cluster::{ActionLabel, GlobalState};
use crate::network::Rpc;
use crate::server::Role;
use crate::types::{Config, Entry, ServerSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InvariantId {
    ElectionSafety,
    LogMatching,
    StateMachineSafety,
    CommitDurability,
    AtMostOneVote,
    TermMonotone,
    VoteOnce,
    LeaderAppendOnly,
    CommitMonotone,
    CandidateStepDown,
}

impl InvariantId {
    pub const ALL: [InvariantId; 10] = [
        InvariantId::ElectionSafety,
        InvariantId::LogMatching,
        InvariantId::StateMachineSafety,
        InvariantId::CommitDurability,
        InvariantId::AtMostOneVote,
        InvariantId::TermMonotone,
        InvariantId::VoteOnce,
        InvariantId::LeaderAppendOnly,
        InvariantId::CommitMonotone,
        InvariantId::CandidateStepDown,
    ];

    /// State invariants are checked on states, the rest on transitions.
    pub fn is_state(self) -> bool {
        matches!(
            self,
            InvariantId::ElectionSafety
                | InvariantId::LogMatching
                | InvariantId::StateMachineSafety
                | InvariantId::CommitDurability
                | InvariantId::AtMostOneVote
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            InvariantId::ElectionSafety => "ElectionSafety",
            InvariantId::LogMatching => "LogMatching",
            InvariantId::StateMachineSafety => "StateMachineSafety",
            InvariantId::CommitDurability => "CommitDurability",
            InvariantId::AtMostOneVote => "AtMostOneVote",
            InvariantId::TermMonotone => "TermMonotone",
            InvariantId::VoteOnce => "VoteOnce",
            InvariantId::LeaderAppendOnly => "LeaderAppendOnly",
            InvariantId::CommitMonotone => "CommitMonotone",
            InvariantId::CandidateStepDown => "CandidateStepDown",
        }
    }
}

impl fmt::Display for InvariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InvariantId {
    type Err = String;

    /// Accepts the canonical name or its kebab-case form, case-insensitively.
    fn from_str(s: &str) -> Result<InvariantId, String> {
        let key: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .collect::<String>()
            .to_lowercase();
        InvariantId::ALL
            .into_iter()
            .find(|id| id.name().to_lowercase() == key)
            .ok_or_else(|| format!("unknown invariant `{s}`"))
    }
}

/// History variables that are not part of the model state: who has led each
/// term, and the longest committed prefix each server has held. A history
/// belongs to one execution path.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct GhostHistory {
    /// Indexed by term.
    pub leaders_by_term: Vec<ServerSet>,
    /// Indexed by `ServerId::slot`.
    pub max_committed: Vec<Vec<Entry>>,
}

impl GhostHistory {
    pub fn new(cfg: &Config) -> GhostHistory {
        GhostHistory {
            leaders_by_term: vec![ServerSet::EMPTY; cfg.max_term as usize + 1],
            max_committed: vec![Vec::new(); cfg.servers()],
        }
    }
}

/// Checks one state invariant, updating the history it depends on.
pub fn check_state(inv: InvariantId, g: &GlobalState, h: &mut GhostHistory) -> Result<(), String> {
    match inv {
        InvariantId::ElectionSafety => {
            for s in g.servers.iter().filter(|s| s.role == Role::Leader) {
                h.leaders_by_term[s.current_term.0 as usize].insert(s.id);
            }
            match h
                .leaders_by_term
                .iter()
                .enumerate()
                .find(|(_, l)| l.len() > 1)
            {
                Some((t, l)) => Err(format!(
                    "term {t} has leaders {:?}",
                    l.iter().map(|i| i.0).collect::<Vec<_>>()
                )),
                None => Ok(()),
            }
        }
        InvariantId::LogMatching => {
            for (a, b) in pairs(g) {
                let k_max = a.log.len().min(b.log.len());
                for k in 1..=k_max {
                    if a.log.term_at(k) == b.log.term_at(k) && a.log.prefix(k) != b.log.prefix(k) {
                        return Err(format!(
                            "servers {} and {} agree on the term at index {k} but not on the prefix",
                            a.id, b.id
                        ));
                    }
                }
            }
            Ok(())
        }
        InvariantId::StateMachineSafety => {
            for (a, b) in pairs(g) {
                let k = a.commit_index.min(b.commit_index) as usize;
                if a.log.prefix(k) != b.log.prefix(k) {
                    return Err(format!(
                        "servers {} and {} committed different entries up to index {k}",
                        a.id, b.id
                    ));
                }
            }
            Ok(())
        }
        InvariantId::CommitDurability => {
            for s in &g.servers {
                let now = s.committed();
                let best = &mut h.max_committed[s.id.slot()];
                let shared = now.len().min(best.len());
                if now[..shared] != best[..shared] {
                    return Err(format!(
                        "server {} contradicts a previously committed prefix",
                        s.id
                    ));
                }
                if now.len() > best.len() {
                    *best = now.to_vec();
                }
            }
            Ok(())
        }
        InvariantId::AtMostOneVote => {
            // A single votedFor field per term: only its range can be wrong.
            let n = g.servers.len() as u8;
            match g.servers.iter().find(|s| s.voted_for.0 > n) {
                Some(s) => Err(format!(
                    "server {} voted for unknown server {}",
                    s.id, s.voted_for
                )),
                None => Ok(()),
            }
        }
        other => panic!("{other} is a transition invariant"),
    }
}

fn pairs(
    g: &GlobalState,
) -> impl Iterator<Item = (&crate::server::ServerRecord, &crate::server::ServerRecord)> {
    g.servers
        .iter()
        .enumerate()
        .flat_map(move |(i, a)| g.servers[i + 1..].iter().map(move |b| (a, b)))
}

pub fn check_transition(
    inv: InvariantId,
    src: &GlobalState,
    labels: &[ActionLabel],
    dst: &GlobalState,
) -> Result<(), String> {
    let both = src.servers.iter().zip(&dst.servers);
    match inv {
        InvariantId::TermMonotone => {
            match both.clone().find(|(a, b)| b.current_term < a.current_term) {
                Some((a, b)) => Err(format!(
                    "server {} went from term {} to {}",
                    a.id, a.current_term, b.current_term
                )),
                None => Ok(()),
            }
        }
        InvariantId::VoteOnce => {
            let bad = both.clone().find(|(a, b)| {
                a.current_term == b.current_term
                    && !a.voted_for.is_nil()
                    && b.voted_for != a.voted_for
            });
            match bad {
                Some((a, b)) => Err(format!(
                    "server {} changed its vote from {} to {} in term {}",
                    a.id, a.voted_for, b.voted_for, a.current_term
                )),
                None => Ok(()),
            }
        }
        InvariantId::LeaderAppendOnly => {
            let bad = both.clone().find(|(a, b)| {
                a.is_leader()
                    && b.is_leader()
                    && a.current_term == b.current_term
                    && !a.log.is_prefix_of(&b.log)
            });
            match bad {
                Some((a, _)) => Err(format!(
                    "leader {} rewrote its log in term {}",
                    a.id, a.current_term
                )),
                None => Ok(()),
            }
        }
        InvariantId::CommitMonotone => {
            let bad = both
                .clone()
                .find(|(a, b)| !src.is_crashed(a.id) && b.commit_index < a.commit_index);
            match bad {
                Some((a, b)) => Err(format!(
                    "server {} moved its commit index from {} to {}",
                    a.id, a.commit_index, b.commit_index
                )),
                None => Ok(()),
            }
        }
        InvariantId::CandidateStepDown => {
            for label in labels {
                let ActionLabel::Recv { msg, .. } = label else {
                    continue;
                };
                if !matches!(msg.payload.rpc, Rpc::AppendEntriesRequest { .. }) {
                    continue;
                }
                let before = src.server(msg.to);
                let after = dst.server(msg.to);
                if msg.payload.term == before.current_term && after.role == Role::Candidate {
                    return Err(format!(
                        "candidate {} stayed candidate after an AppendEntries request from {} in term {}",
                        msg.to, msg.from, msg.payload.term
                    ));
                }
            }
            Ok(())
        }
        other => panic!("{other} is a state invariant"),
    }
}
