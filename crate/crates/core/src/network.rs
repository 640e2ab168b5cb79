//! Network models. In-flight messages live in a set: storing a message that
//! is already present is a no-op, which keeps the state space finite even
//! when the network duplicates messages.

use serde::{Deserialize, Serialize};

use crate::types::{Entry, NetworkModel, ServerId, Term};

/// Request and response bodies of the two Raft RPCs.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all_fields = "camelCase")]
pub enum Rpc {
    RequestVoteRequest {
        last_log_term: Term,
        last_log_index: u8,
    },
    RequestVoteResponse {
        vote_granted: bool,
    },
    /// `entries` holds at most one entry.
    AppendEntriesRequest {
        prev_log_index: u8,
        prev_log_term: Term,
        entries: Vec<Entry>,
        commit_index: u8,
    },
    AppendEntriesResponse {
        success: bool,
        match_index: u8,
    },
}

impl Rpc {
    pub fn name(&self) -> &'static str {
        match self {
            Rpc::RequestVoteRequest { .. } => "RequestVoteRequest",
            Rpc::RequestVoteResponse { .. } => "RequestVoteResponse",
            Rpc::AppendEntriesRequest { .. } => "AppendEntriesRequest",
            Rpc::AppendEntriesResponse { .. } => "AppendEntriesResponse",
        }
    }
}

/// An RPC stamped with the sender's current term.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Payload {
    pub term: Term,
    pub rpc: Rpc,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NetMessage {
    pub from: ServerId,
    pub to: ServerId,
    pub payload: Payload,
}

impl NetMessage {
    pub fn new(from: ServerId, to: ServerId, term: Term, rpc: Rpc) -> NetMessage {
        NetMessage {
            from,
            to,
            payload: Payload { term, rpc },
        }
    }
}

/// Messages in flight plus the delivery discipline applied to them.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NetState {
    /// Sorted and free of duplicates.
    pub(crate) in_flight: Vec<NetMessage>,
    pub model: NetworkModel,
}

/// One way the network can take a message from a sender.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SendOutcome {
    pub net: NetState,
    pub lost: bool,
}

/// One way the network can hand a message to its destination.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub msg: NetMessage,
    pub net: NetState,
    /// The message stays in flight and may be delivered again.
    pub duplicated: bool,
}

impl NetState {
    pub fn new(model: NetworkModel) -> NetState {
        NetState {
            in_flight: Vec::new(),
            model,
        }
    }

    /// In-flight messages in ascending order.
    pub fn messages(&self) -> &[NetMessage] {
        &self.in_flight
    }

    pub fn len(&self) -> usize {
        self.in_flight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.in_flight.is_empty()
    }

    pub fn contains(&self, msg: &NetMessage) -> bool {
        self.in_flight.binary_search(msg).is_ok()
    }

    /// Adds `msg` unless it is already in flight.
    pub fn insert(&mut self, msg: NetMessage) {
        if let Err(pos) = self.in_flight.binary_search(&msg) {
            self.in_flight.insert(pos, msg);
        }
    }

    fn with(&self, msg: &NetMessage) -> NetState {
        let mut next = self.clone();
        next.insert(msg.clone());
        next
    }

    /// Successor networks after `msg` is handed to the network. The unreliable
    /// model may store or lose it; the reliable model always stores it. When
    /// the message is already in flight both branches coincide and a single
    /// (stored) outcome is returned.
    pub fn send_outcomes(&self, msg: &NetMessage) -> Vec<SendOutcome> {
        debug_assert_ne!(msg.from, msg.to, "servers never message themselves");
        let stored = SendOutcome {
            net: self.with(msg),
            lost: false,
        };
        if self.model == NetworkModel::Reliable || self.contains(msg) {
            return vec![stored];
        }
        vec![
            stored,
            SendOutcome {
                net: self.clone(),
                lost: true,
            },
        ]
    }

    /// Every way a message addressed to `dest` can be delivered, in message
    /// order. The unreliable model may also keep the delivered message.
    pub fn deliver_outcomes(&self, dest: ServerId) -> Vec<Delivery> {
        let mut out = Vec::new();
        for (pos, msg) in self
            .in_flight
            .iter()
            .enumerate()
            .filter(|(_, m)| m.to == dest)
        {
            let mut removed = self.clone();
            removed.in_flight.remove(pos);
            out.push(Delivery {
                msg: msg.clone(),
                net: removed,
                duplicated: false,
            });
            if self.model == NetworkModel::Unreliable {
                out.push(Delivery {
                    msg: msg.clone(),
                    net: self.clone(),
                    duplicated: true,
                });
            }
        }
        out
    }
}
