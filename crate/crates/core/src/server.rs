//! The Raft server as a pure state machine.
//!
//! Every operation takes a server record (plus its input) and returns the
//! next record together with the messages it emits, in emission order. The
//! cluster layer decides which operations are enabled and threads their
//! outbound messages through the network.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{NetMessage, Payload, Rpc};
use crate::types::{Config, Entry, InjectedBug, Log, ServerId, ServerSet, Term, MAX_SERVERS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("server id {id} outside 1..={servers}")]
    ServerOutOfRange { id: u8, servers: u8 },
    #[error("server {0} is leader and cannot start an election")]
    LeaderElection(ServerId),
    #[error("server {0} received a message from itself")]
    SelfMessage(ServerId),
    #[error("AppendEntries request to server {to} carries {len} entries (at most one allowed)")]
    MultiEntryAppend { to: ServerId, len: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Follower,
    Candidate,
    Leader,
}

/// One log index per server, stored inline. Dereferences to a slice of
/// length `servers`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PeerIndex {
    len: u8,
    vals: [u8; MAX_SERVERS as usize],
}

impl PeerIndex {
    pub fn filled(value: u8, len: usize) -> PeerIndex {
        assert!(len <= MAX_SERVERS as usize, "at most {MAX_SERVERS} servers");
        let mut vals = [0; MAX_SERVERS as usize];
        vals[..len].fill(value);
        PeerIndex {
            len: len as u8,
            vals,
        }
    }

    pub fn from_slice(values: &[u8]) -> PeerIndex {
        let mut p = PeerIndex::filled(0, values.len());
        p.copy_from_slice(values);
        p
    }
}

impl Deref for PeerIndex {
    type Target = [u8];

    fn deref(&self) -> &[u8] {
        &self.vals[..self.len as usize]
    }
}

impl DerefMut for PeerIndex {
    fn deref_mut(&mut self) -> &mut [u8] {
        &mut self.vals[..self.len as usize]
    }
}

impl std::fmt::Debug for PeerIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

impl<const N: usize> PartialEq<[u8; N]> for PeerIndex {
    fn eq(&self, other: &[u8; N]) -> bool {
        **self == other[..]
    }
}

/// Full state of one server.
///
/// `next_index` and `match_index` are indexed by `ServerId::slot` and keep
/// their values after the server stops leading, as in the reference model.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ServerRecord {
    pub id: ServerId,
    pub role: Role,
    pub current_term: Term,
    /// `ServerId::NIL` when no vote was cast in the current term.
    pub voted_for: ServerId,
    pub log: Log,
    pub commit_index: u8,
    pub votes_granted: ServerSet,
    pub next_index: PeerIndex,
    pub match_index: PeerIndex,
}

/// Result bundle of one server operation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ServerStep {
    pub next: ServerRecord,
    pub outbound: Vec<NetMessage>,
    /// Set when the step consumed a client interaction.
    pub client_event: bool,
}

impl ServerStep {
    fn quiet(next: ServerRecord) -> ServerStep {
        ServerStep {
            next,
            outbound: Vec::new(),
            client_event: false,
        }
    }

    fn reply(next: ServerRecord, to: ServerId, rpc: Rpc) -> ServerStep {
        let msg = NetMessage::new(next.id, to, next.current_term, rpc);
        ServerStep {
            next,
            outbound: vec![msg],
            client_event: false,
        }
    }
}

/// Outcome of handing a message to a server.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reception {
    /// The message carried a term older than the server's; nothing happens.
    Dropped,
    Handled(ServerStep),
}

impl ServerRecord {
    pub fn is_leader(&self) -> bool {
        self.role == Role::Leader
    }

    fn log_len(&self) -> u8 {
        self.log.len() as u8
    }

    /// Committed prefix of the log.
    pub fn committed(&self) -> &[Entry] {
        self.log.prefix(self.commit_index as usize)
    }

    fn become_leader(&mut self) {
        self.role = Role::Leader;
        let next = self.log_len() + 1;
        self.next_index.iter_mut().for_each(|n| *n = next);
        self.match_index.iter_mut().for_each(|m| *m = 0);
    }

    fn update_term(&mut self, term: Term) {
        self.current_term = term;
        self.role = Role::Follower;
        self.voted_for = ServerId::NIL;
        self.votes_granted = ServerSet::EMPTY;
    }
}

pub fn init_server(id: ServerId, cfg: &Config) -> Result<ServerRecord, ModelError> {
    if id.is_nil() || id.0 > cfg.max_server_id {
        return Err(ModelError::ServerOutOfRange {
            id: id.0,
            servers: cfg.max_server_id,
        });
    }
    let n = cfg.servers();
    Ok(ServerRecord {
        id,
        role: Role::Follower,
        current_term: Term::ZERO,
        voted_for: ServerId::NIL,
        log: Log::new(),
        commit_index: 0,
        votes_granted: ServerSet::EMPTY,
        next_index: PeerIndex::filled(1, n),
        match_index: PeerIndex::filled(0, n),
    })
}

/// Election timeout of a follower or candidate. `Ok(None)` when the server is
/// already at the maximum term: it may no longer start elections, but keeps
/// handling messages.
pub fn timeout_election(s: &ServerRecord, cfg: &Config) -> Result<Option<ServerStep>, ModelError> {
    if s.is_leader() {
        return Err(ModelError::LeaderElection(s.id));
    }
    if s.current_term >= cfg.max_term() {
        return Ok(None);
    }
    let mut next = s.clone();
    next.current_term = s.current_term.next();
    next.role = Role::Candidate;
    next.voted_for = s.id;
    next.votes_granted = ServerSet::single(s.id);
    // A single-server cluster wins on its own vote.
    if next.votes_granted.len() >= cfg.quorum() {
        next.become_leader();
    }
    let rpc = Rpc::RequestVoteRequest {
        last_log_term: s.log.last_term(),
        last_log_index: s.log_len(),
    };
    let outbound = cfg
        .server_ids()
        .filter(|&j| j != s.id)
        .map(|j| NetMessage::new(s.id, j, next.current_term, rpc.clone()))
        .collect();
    Ok(Some(ServerStep {
        next,
        outbound,
        client_event: false,
    }))
}

/// AppendEntries request a leader sends to `peer`: at most one entry, at the
/// peer's `next_index`.
pub fn append_entries_for(s: &ServerRecord, peer: ServerId) -> NetMessage {
    let next = s.next_index[peer.slot()];
    let prev_log_index = next.saturating_sub(1);
    let last_entry = s.log_len().min(next);
    let entries = if next >= 1 && next <= last_entry {
        vec![s.log.get(next as usize).expect("index within log")]
    } else {
        Vec::new()
    };
    let rpc = Rpc::AppendEntriesRequest {
        prev_log_index,
        prev_log_term: s.log.term_at(prev_log_index as usize),
        entries,
        commit_index: s.commit_index.min(last_entry),
    };
    NetMessage::new(s.id, peer, s.current_term, rpc)
}

/// Leader timeout: one AppendEntries request per peer, in ascending ID order.
/// `None` unless the server leads.
pub fn timeout_heartbeat(s: &ServerRecord, cfg: &Config) -> Option<ServerStep> {
    if !s.is_leader() {
        return None;
    }
    let outbound = cfg
        .server_ids()
        .filter(|&j| j != s.id)
        .map(|j| append_entries_for(s, j))
        .collect();
    Some(ServerStep {
        next: s.clone(),
        outbound,
        client_event: false,
    })
}

/// Message reception pipeline: drop stale messages, adopt newer terms, then
/// dispatch to the RPC handler.
pub fn receive(
    s: &ServerRecord,
    from: ServerId,
    p: &Payload,
    cfg: &Config,
) -> Result<Reception, ModelError> {
    if from == s.id {
        return Err(ModelError::SelfMessage(s.id));
    }
    if p.term < s.current_term {
        return Ok(Reception::Dropped);
    }
    let mut s = s.clone();
    if p.term > s.current_term {
        s.update_term(p.term);
    }
    let step = match &p.rpc {
        Rpc::RequestVoteRequest {
            last_log_term,
            last_log_index,
        } => handle_request_vote_request(&s, from, *last_log_term, *last_log_index),
        Rpc::RequestVoteResponse { vote_granted } => {
            handle_request_vote_response(&s, from, *vote_granted, cfg)
        }
        Rpc::AppendEntriesRequest {
            prev_log_index,
            prev_log_term,
            entries,
            commit_index,
        } => {
            let req = AppendRequest {
                prev_log_index: *prev_log_index,
                prev_log_term: *prev_log_term,
                entries,
                commit_index: *commit_index,
            };
            handle_append_entries_request(&s, from, &req, cfg)?
        }
        Rpc::AppendEntriesResponse {
            success,
            match_index,
        } => handle_append_entries_response(&s, from, *success, *match_index, cfg),
    };
    Ok(Reception::Handled(step))
}

/// Vote when the candidate's log is at least as up to date as ours and we
/// have not voted for someone else in this term.
pub fn handle_request_vote_request(
    s: &ServerRecord,
    from: ServerId,
    last_log_term: Term,
    last_log_index: u8,
) -> ServerStep {
    let my_last = s.log.last_term();
    let log_ok =
        last_log_term > my_last || (last_log_term == my_last && last_log_index >= s.log_len());
    let grant = log_ok && (s.voted_for.is_nil() || s.voted_for == from);
    let mut next = s.clone();
    if grant {
        next.voted_for = from;
    }
    ServerStep::reply(
        next,
        from,
        Rpc::RequestVoteResponse {
            vote_granted: grant,
        },
    )
}

pub fn handle_request_vote_response(
    s: &ServerRecord,
    from: ServerId,
    vote_granted: bool,
    cfg: &Config,
) -> ServerStep {
    let mut next = s.clone();
    if s.role != Role::Candidate {
        return ServerStep::quiet(next);
    }
    if vote_granted {
        next.votes_granted.insert(from);
    }
    if next.votes_granted.len() >= cfg.quorum() {
        next.become_leader();
    }
    ServerStep::quiet(next)
}

/// Borrowed fields of an AppendEntries request.
#[derive(Clone, Copy, Debug)]
pub struct AppendRequest<'a> {
    pub prev_log_index: u8,
    pub prev_log_term: Term,
    pub entries: &'a [Entry],
    pub commit_index: u8,
}

pub fn handle_append_entries_request(
    s: &ServerRecord,
    from: ServerId,
    req: &AppendRequest<'_>,
    cfg: &Config,
) -> Result<ServerStep, ModelError> {
    if req.entries.len() > 1 {
        return Err(ModelError::MultiEntryAppend {
            to: s.id,
            len: req.entries.len(),
        });
    }
    let mut next = s.clone();
    if next.role == Role::Candidate && cfg.injected_bug != InjectedBug::CandidateNoStepdown {
        next.role = Role::Follower;
    }
    let prev = req.prev_log_index as usize;
    let log_ok =
        prev == 0 || (prev <= next.log.len() && next.log.term_at(prev) == req.prev_log_term);
    if !log_ok {
        return Ok(ServerStep::reply(
            next,
            from,
            Rpc::AppendEntriesResponse {
                success: false,
                match_index: 0,
            },
        ));
    }
    if let Some(&entry) = req.entries.first() {
        let idx = prev + 1;
        if next.log.len() >= idx && next.log.term_at(idx) != entry.term {
            next.log.truncate(prev);
        }
        if next.log.len() == prev {
            next.log.push(entry);
        }
    }
    // Never move the commit index backwards: a reordered or duplicated request
    // may carry an older leader commit index.
    next.commit_index = next.commit_index.max(req.commit_index);
    let match_index = req.prev_log_index + req.entries.len() as u8;
    Ok(ServerStep::reply(
        next,
        from,
        Rpc::AppendEntriesResponse {
            success: true,
            match_index,
        },
    ))
}

pub fn handle_append_entries_response(
    s: &ServerRecord,
    from: ServerId,
    success: bool,
    their_match: u8,
    cfg: &Config,
) -> ServerStep {
    let mut next = s.clone();
    if !s.is_leader() {
        return ServerStep::quiet(next);
    }
    let slot = from.slot();
    if success {
        next.next_index[slot] = their_match + 1;
        next.match_index[slot] = their_match;
    } else {
        next.next_index[slot] = next.next_index[slot].saturating_sub(1).max(1);
    }
    let agreement = match cfg.injected_bug {
        InjectedBug::AdvanceCommitMatchIndexTypo => &s.match_index,
        _ => &next.match_index,
    };
    if let Some(n) = commit_candidate(&next, agreement, cfg) {
        next.commit_index = n;
    }
    ServerStep::quiet(next)
}

/// Largest index above the current commit index that a quorum has replicated
/// and that holds an entry of the leader's current term.
fn commit_candidate(s: &ServerRecord, match_index: &[u8], cfg: &Config) -> Option<u8> {
    let quorum = cfg.quorum();
    (s.commit_index + 1..=s.log_len()).rev().find(|&n| {
        let agree = 1 + cfg
            .server_ids()
            .filter(|&j| j != s.id && match_index[j.slot()] >= n)
            .count();
        agree >= quorum && s.log.term_at(n as usize) == s.current_term
    })
}

/// A leader appends one entry of its current term. `None` unless leading.
pub fn client_request(s: &ServerRecord) -> Option<ServerStep> {
    if !s.is_leader() {
        return None;
    }
    let mut next = s.clone();
    next.log.push(Entry {
        term: s.current_term,
    });
    Some(ServerStep {
        next,
        outbound: Vec::new(),
        client_event: true,
    })
}
