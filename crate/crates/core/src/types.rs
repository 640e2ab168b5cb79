//! Core domain types shared by the network, server and cluster models.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest cluster the compact encodings support.
pub const MAX_SERVERS: u8 = 32;

/// Server identifier. `ServerId::NIL` (zero) means "no server"; real servers
/// are numbered `1..=servers`.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ServerId(pub u8);

impl ServerId {
    pub const NIL: ServerId = ServerId(0);

    pub fn is_nil(self) -> bool {
        self.0 == 0
    }

    /// Zero-based slot for per-server arrays. Must not be called on `NIL`.
    pub fn slot(self) -> usize {
        debug_assert!(!self.is_nil());
        self.0 as usize - 1
    }
}

impl fmt::Display for ServerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Raft term, the logical clock of the protocol.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Term(pub u8);

impl Term {
    pub const ZERO: Term = Term(0);

    pub fn next(self) -> Term {
        Term(self.0 + 1)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A log entry. Client commands are abstracted away, so only the term of the
/// leader that created the entry is kept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Entry {
    pub term: Term,
}

impl Entry {
    pub fn new(term: u8) -> Entry {
        Entry { term: Term(term) }
    }
}

/// A server log. Indices are 1-based: index 0 denotes the empty prefix.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Log(Vec<Entry>);

impl Log {
    pub fn new() -> Log {
        Log(Vec::new())
    }

    pub fn from_terms(terms: &[u8]) -> Log {
        Log(terms.iter().copied().map(Entry::new).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Entry at 1-based `index`, if present.
    pub fn get(&self, index: usize) -> Option<Entry> {
        index.checked_sub(1).and_then(|i| self.0.get(i)).copied()
    }

    /// Term at 1-based `index`; zero for index 0 or past the end.
    pub fn term_at(&self, index: usize) -> Term {
        self.get(index).map_or(Term::ZERO, |e| e.term)
    }

    pub fn last_term(&self) -> Term {
        last_term(self)
    }

    pub fn push(&mut self, entry: Entry) {
        self.0.push(entry);
    }

    /// Keeps the first `len` entries.
    pub fn truncate(&mut self, len: usize) {
        self.0.truncate(len);
    }

    /// Entries `1..=len` (clamped to the log length).
    pub fn prefix(&self, len: usize) -> &[Entry] {
        &self.0[..len.min(self.0.len())]
    }

    pub fn entries(&self) -> &[Entry] {
        &self.0
    }

    /// True when `self` is a prefix of `other`.
    pub fn is_prefix_of(&self, other: &Log) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl From<Vec<Entry>> for Log {
    fn from(entries: Vec<Entry>) -> Log {
        Log(entries)
    }
}

/// A small set of server IDs stored as a bitmask (bit `i` is server `i`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ServerSet(u64);

impl ServerSet {
    pub const EMPTY: ServerSet = ServerSet(0);

    pub fn single(id: ServerId) -> ServerSet {
        let mut s = ServerSet::EMPTY;
        s.insert(id);
        s
    }

    pub fn insert(&mut self, id: ServerId) {
        self.0 |= 1 << id.0;
    }

    pub fn contains(self, id: ServerId) -> bool {
        self.0 & (1 << id.0) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: ServerSet) -> ServerSet {
        ServerSet(self.0 | other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = ServerId> {
        (0..64u8)
            .filter(move |i| self.0 & (1 << i) != 0)
            .map(ServerId)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn from_bits(bits: u64) -> ServerSet {
        ServerSet(bits)
    }
}

impl FromIterator<ServerId> for ServerSet {
    fn from_iter<I: IntoIterator<Item = ServerId>>(iter: I) -> ServerSet {
        let mut s = ServerSet::EMPTY;
        for id in iter {
            s.insert(id);
        }
        s
    }
}

impl Serialize for ServerSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for ServerSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<ServerSet, D::Error> {
        let ids = Vec::<ServerId>::deserialize(deserializer)?;
        Ok(ids.into_iter().collect())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkModel {
    /// Messages may be lost, duplicated and reordered.
    #[default]
    Unreliable,
    /// Messages may be reordered, but are neither lost nor duplicated.
    Reliable,
}

/// Known defects of the original TLA+ model that can be re-injected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InjectedBug {
    #[default]
    None,
    /// Candidates do not step down on an AppendEntries request of their own term.
    CandidateNoStepdown,
    /// Commit advancement reads the wrong version of `matchIndex`.
    AdvanceCommitMatchIndexTypo,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("servers must be in 1..={MAX_SERVERS}, got {0}")]
    Servers(u32),
    #[error("max-term must be in 1..=255, got {0}")]
    MaxTerm(u32),
    #[error("max-clients must be in 0..=255, got {0}")]
    MaxClients(u32),
}

/// Bounds and semantic switches of one model instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Config {
    pub max_term: u8,
    pub max_server_id: u8,
    pub max_client_interactions: u8,
    pub network_model: NetworkModel,
    pub injected_bug: InjectedBug,
}

impl Config {
    pub fn new(servers: u32, max_term: u32, max_clients: u32) -> Result<Config, ConfigError> {
        if servers == 0 || servers > MAX_SERVERS as u32 {
            return Err(ConfigError::Servers(servers));
        }
        if max_term == 0 || max_term > 255 {
            return Err(ConfigError::MaxTerm(max_term));
        }
        if max_clients > 255 {
            return Err(ConfigError::MaxClients(max_clients));
        }
        Ok(Config {
            max_term: max_term as u8,
            max_server_id: servers as u8,
            max_client_interactions: max_clients as u8,
            network_model: NetworkModel::Unreliable,
            injected_bug: InjectedBug::None,
        })
    }

    pub fn with_network(mut self, model: NetworkModel) -> Config {
        self.network_model = model;
        self
    }

    pub fn with_bug(mut self, bug: InjectedBug) -> Config {
        self.injected_bug = bug;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        Config::new(
            self.max_server_id as u32,
            self.max_term as u32,
            self.max_client_interactions as u32,
        )
        .map(|_| ())
    }

    pub fn servers(&self) -> usize {
        self.max_server_id as usize
    }

    pub fn max_term(&self) -> Term {
        Term(self.max_term)
    }

    /// All real server IDs in ascending order.
    pub fn server_ids(&self) -> impl Iterator<Item = ServerId> {
        (1..=self.max_server_id).map(ServerId)
    }

    pub fn quorum(&self) -> usize {
        majority(self.servers())
    }
}

impl Default for Config {
    /// Three servers, two terms, one client interaction, unreliable network.
    fn default() -> Config {
        Config::new(3, 2, 1).expect("default config is valid")
    }
}

/// Minimal quorum size for a cluster of `n` servers.
pub fn majority(n: usize) -> usize {
    n / 2 + 1
}

/// Term of the last entry of `log`, or zero for an empty log.
pub fn last_term(log: &Log) -> Term {
    log.0.last().map_or(Term::ZERO, |e| e.term)
}
