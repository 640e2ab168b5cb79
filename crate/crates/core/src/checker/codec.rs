//! Canonical byte encoding of `GlobalState`.
//!
//! The encoding is injective for a fixed configuration, so byte equality is
//! structural equality. The network model is not encoded: it is fixed by the
//! configuration, which lets states explored under different network models
//! be compared directly.

use crate::cluster::GlobalState;
use crate::network::{NetMessage, NetState, Payload, Rpc};
use crate::server::{PeerIndex, Role, ServerRecord};
use crate::types::{Config, Entry, Log, ServerId, ServerSet, Term};

const RV_REQ: u8 = 0;
const RV_RESP: u8 = 1;
const AE_REQ: u8 = 2;
const AE_RESP: u8 = 3;

fn set_bytes(cfg: &Config) -> usize {
    (cfg.servers() + 1).div_ceil(8)
}

fn put_set(out: &mut Vec<u8>, set: ServerSet, width: usize) {
    out.extend_from_slice(&set.bits().to_le_bytes()[..width]);
}

pub fn encode(g: &GlobalState, cfg: &Config, out: &mut Vec<u8>) {
    out.clear();
    let width = set_bytes(cfg);
    out.push(g.client_budget);
    put_set(out, g.crashed, width);
    for s in &g.servers {
        out.push(s.role as u8);
        out.push(s.current_term.0);
        out.push(s.voted_for.0);
        out.push(s.commit_index);
        put_set(out, s.votes_granted, width);
        out.push(s.log.len() as u8);
        out.extend(s.log.entries().iter().map(|e| e.term.0));
        out.extend_from_slice(&s.next_index);
        out.extend_from_slice(&s.match_index);
    }
    out.extend_from_slice(&(g.net.len() as u16).to_le_bytes());
    for m in &g.net.in_flight {
        out.extend_from_slice(&[m.from.0, m.to.0, m.payload.term.0]);
        match &m.payload.rpc {
            Rpc::RequestVoteRequest {
                last_log_term,
                last_log_index,
            } => {
                out.extend_from_slice(&[RV_REQ, last_log_term.0, *last_log_index]);
            }
            Rpc::RequestVoteResponse { vote_granted } => {
                out.extend_from_slice(&[RV_RESP, *vote_granted as u8])
            }
            Rpc::AppendEntriesRequest {
                prev_log_index,
                prev_log_term,
                entries,
                commit_index,
            } => {
                out.extend_from_slice(&[
                    AE_REQ,
                    *prev_log_index,
                    prev_log_term.0,
                    entries.len() as u8,
                ]);
                out.extend(entries.iter().map(|e| e.term.0));
                out.push(*commit_index);
            }
            Rpc::AppendEntriesResponse {
                success,
                match_index,
            } => {
                out.extend_from_slice(&[AE_RESP, *success as u8, *match_index]);
            }
        }
    }
}

pub fn encode_to_vec(g: &GlobalState, cfg: &Config) -> Vec<u8> {
    let mut out = Vec::with_capacity(64);
    encode(g, cfg, &mut out);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn u8(&mut self) -> u8 {
        let b = self.bytes[self.pos];
        self.pos += 1;
        b
    }

    fn take(&mut self, n: usize) -> &[u8] {
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        s
    }

    fn set(&mut self, width: usize) -> ServerSet {
        let mut buf = [0u8; 8];
        buf[..width].copy_from_slice(self.take(width));
        ServerSet::from_bits(u64::from_le_bytes(buf))
    }

    fn entries(&mut self, n: usize) -> Vec<Entry> {
        self.take(n).iter().map(|&t| Entry::new(t)).collect()
    }
}

/// Inverse of [`encode`]. Panics on bytes that `encode` did not produce.
pub fn decode(bytes: &[u8], cfg: &Config) -> GlobalState {
    let n = cfg.servers();
    let width = set_bytes(cfg);
    let mut r = Reader { bytes, pos: 0 };
    let client_budget = r.u8();
    let crashed = r.set(width);
    let servers = cfg
        .server_ids()
        .map(|id| {
            let role = match r.u8() {
                0 => Role::Follower,
                1 => Role::Candidate,
                2 => Role::Leader,
                other => panic!("bad role byte {other}"),
            };
            let current_term = Term(r.u8());
            let voted_for = ServerId(r.u8());
            let commit_index = r.u8();
            let votes_granted = r.set(width);
            let len = r.u8() as usize;
            let log = Log::from(r.entries(len));
            let next_index = PeerIndex::from_slice(r.take(n));
            let match_index = PeerIndex::from_slice(r.take(n));
            ServerRecord {
                id,
                role,
                current_term,
                voted_for,
                log,
                commit_index,
                votes_granted,
                next_index,
                match_index,
            }
        })
        .collect();
    let count = u16::from_le_bytes([r.u8(), r.u8()]) as usize;
    let mut in_flight = Vec::with_capacity(count);
    for _ in 0..count {
        let from = ServerId(r.u8());
        let to = ServerId(r.u8());
        let term = Term(r.u8());
        let rpc = match r.u8() {
            RV_REQ => Rpc::RequestVoteRequest {
                last_log_term: Term(r.u8()),
                last_log_index: r.u8(),
            },
            RV_RESP => Rpc::RequestVoteResponse {
                vote_granted: r.u8() != 0,
            },
            AE_REQ => {
                let prev_log_index = r.u8();
                let prev_log_term = Term(r.u8());
                let len = r.u8() as usize;
                let entries = r.entries(len);
                Rpc::AppendEntriesRequest {
                    prev_log_index,
                    prev_log_term,
                    entries,
                    commit_index: r.u8(),
                }
            }
            AE_RESP => Rpc::AppendEntriesResponse {
                success: r.u8() != 0,
                match_index: r.u8(),
            },
            other => panic!("bad rpc tag {other}"),
        };
        in_flight.push(NetMessage {
            from,
            to,
            payload: Payload { term, rpc },
        });
    }
    assert_eq!(r.pos, bytes.len(), "trailing bytes in encoded state");
    GlobalState {
        servers,
        net: NetState {
            in_flight,
            model: cfg.network_model,
        },
        client_budget,
        crashed,
    }
}
