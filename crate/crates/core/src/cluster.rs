//! Global model: servers, network, client budget and crashed set, plus the
//! enumeration of every enabled labeled transition.
//!
//! One server step (a timeout broadcast, a client interaction, or a receive
//! with its reply) is one transition. The per-message loss choices of the
//! network multiply into sibling transitions. A crash may also interrupt a
//! step after any strict prefix of its outbound messages.

use serde::{Deserialize, Serialize};

use crate::network::{NetMessage, NetState};
use crate::server::{self, ModelError, Reception, ServerRecord, ServerStep};
use crate::types::{Config, ServerId, ServerSet};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GlobalState {
    /// Indexed by `ServerId::slot`.
    pub servers: Vec<ServerRecord>,
    pub net: NetState,
    pub client_budget: u8,
    pub crashed: ServerSet,
}

impl GlobalState {
    pub fn server(&self, id: ServerId) -> &ServerRecord {
        &self.servers[id.slot()]
    }

    pub fn is_crashed(&self, id: ServerId) -> bool {
        self.crashed.contains(id)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TimeoutKind {
    Election,
    Heartbeat,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionLabel {
    Timeout { server: ServerId, kind: TimeoutKind },
    Send { msg: NetMessage, lost: bool },
    Recv { msg: NetMessage, duplicated: bool },
    Client { leader: ServerId },
    Crash { server: ServerId },
}

/// A labeled edge. `labels` starts with the action that triggered the step
/// (timeout, receive, client or crash), followed by the `Send` labels of the
/// messages it emitted and, for an interrupted step, a final `Crash`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub labels: Vec<ActionLabel>,
    pub target: GlobalState,
}

impl Transition {
    pub fn label(&self) -> &ActionLabel {
        &self.labels[0]
    }
}

pub fn initial_state(cfg: &Config) -> GlobalState {
    let servers = cfg
        .server_ids()
        .map(|id| server::init_server(id, cfg).expect("ids come from the config"))
        .collect();
    GlobalState {
        servers,
        net: NetState::new(cfg.network_model),
        client_budget: cfg.max_client_interactions,
        crashed: ServerSet::EMPTY,
    }
}

/// All transitions enabled in `g`, grouped by server in ascending ID order
/// and sorted by label sequence within a server: timeout, receives (in
/// message order), client, crash. A completed step precedes its interrupted
/// variants, and a stored message precedes its lost variant.
pub fn enabled_transitions(g: &GlobalState, cfg: &Config) -> Result<Vec<Transition>, ModelError> {
    let mut out = Vec::new();
    for id in cfg.server_ids() {
        if g.is_crashed(id) {
            continue;
        }
        let start = out.len();
        server_transitions(g, id, cfg, &mut out)?;
        out[start..].sort_by(|a, b| a.labels.cmp(&b.labels));
    }
    Ok(out)
}

fn server_transitions(
    g: &GlobalState,
    id: ServerId,
    cfg: &Config,
    out: &mut Vec<Transition>,
) -> Result<(), ModelError> {
    let s = g.server(id);

    if s.is_leader() {
        if let Some(step) = server::timeout_heartbeat(s, cfg) {
            let head = ActionLabel::Timeout {
                server: id,
                kind: TimeoutKind::Heartbeat,
            };
            expand_step(g, &g.net, head, step, out);
        }
    } else if let Some(step) = server::timeout_election(s, cfg)? {
        let head = ActionLabel::Timeout {
            server: id,
            kind: TimeoutKind::Election,
        };
        expand_step(g, &g.net, head, step, out);
    }

    for delivery in g.net.deliver_outcomes(id) {
        let head = ActionLabel::Recv {
            msg: delivery.msg.clone(),
            duplicated: delivery.duplicated,
        };
        match server::receive(s, delivery.msg.from, &delivery.msg.payload, cfg)? {
            Reception::Dropped => {
                let mut target = g.clone();
                target.net = delivery.net;
                out.push(Transition {
                    labels: vec![head],
                    target,
                });
            }
            Reception::Handled(step) => expand_step(g, &delivery.net, head, step, out),
        }
    }

    if g.client_budget > 0 {
        if let Some(step) = server::client_request(s) {
            debug_assert!(step.client_event);
            let mut target = g.clone();
            target.servers[id.slot()] = step.next;
            target.client_budget -= 1;
            out.push(Transition {
                labels: vec![ActionLabel::Client { leader: id }],
                target,
            });
        }
    }

    let mut target = g.clone();
    target.crashed.insert(id);
    out.push(Transition {
        labels: vec![ActionLabel::Crash { server: id }],
        target,
    });
    Ok(())
}

/// Pushes the transitions of one server step: every combination of
/// per-message loss choices, then every crash after a strict prefix of the
/// outbound sequence.
fn expand_step(
    g: &GlobalState,
    net: &NetState,
    head: ActionLabel,
    step: ServerStep,
    out: &mut Vec<Transition>,
) {
    let id = step.next.id;
    let mut base = g.clone();
    base.servers[id.slot()] = step.next;

    // (labels so far, network so far) after sending the first k messages.
    let mut partial: Vec<(Vec<ActionLabel>, NetState)> = vec![(vec![head], net.clone())];
    for msg in &step.outbound {
        for (labels, net) in &partial {
            let mut target = base.clone();
            target.net = net.clone();
            target.crashed.insert(id);
            let mut labels = labels.clone();
            labels.push(ActionLabel::Crash { server: id });
            out.push(Transition { labels, target });
        }
        partial = partial
            .into_iter()
            .flat_map(|(labels, net)| {
                net.send_outcomes(msg).into_iter().map(move |o| {
                    let mut labels = labels.clone();
                    labels.push(ActionLabel::Send {
                        msg: msg.clone(),
                        lost: o.lost,
                    });
                    (labels, o.net)
                })
            })
            .collect();
    }
    for (labels, net) in partial {
        let mut target = base.clone();
        target.net = net;
        out.push(Transition { labels, target });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Rpc;
    use crate::server::Role;
    use crate::types::{NetworkModel, Term};

    fn heads(ts: &[Transition]) -> Vec<ActionLabel> {
        ts.iter().map(|t| t.label().clone()).collect()
    }

    #[test]
    fn initial_state_shape() {
        let cfg = Config::new(3, 2, 1).unwrap();
        let g = initial_state(&cfg);
        assert_eq!(g.servers.len(), 3);
        assert!(g
            .servers
            .iter()
            .all(|s| s.role == Role::Follower && s.current_term == Term(0)));
        assert!(g.net.is_empty());
        assert_eq!(g.client_budget, 1);
        assert!(g.crashed.is_empty());
        assert_eq!(g, initial_state(&cfg));
    }

    #[test]
    fn initial_two_server_guards() {
        let cfg = Config::new(2, 1, 1).unwrap();
        let ts = enabled_transitions(&initial_state(&cfg), &cfg).unwrap();
        let mut distinct = heads(&ts);
        distinct.dedup();
        assert_eq!(
            distinct,
            vec![
                ActionLabel::Timeout {
                    server: ServerId(1),
                    kind: TimeoutKind::Election
                },
                ActionLabel::Crash {
                    server: ServerId(1)
                },
                ActionLabel::Timeout {
                    server: ServerId(2),
                    kind: TimeoutKind::Election
                },
                ActionLabel::Crash {
                    server: ServerId(2)
                },
            ]
        );
        // Per server: vote request stored, lost, or crash before sending it.
        assert_eq!(ts.len(), 8);
    }

    #[test]
    fn all_crashed_is_terminal() {
        let cfg = Config::new(2, 1, 1).unwrap();
        let mut g = initial_state(&cfg);
        g.crashed = cfg.server_ids().collect();
        assert!(enabled_transitions(&g, &cfg).unwrap().is_empty());
    }

    #[test]
    fn client_needs_budget() {
        let cfg = Config::new(1, 1, 1)
            .unwrap()
            .with_network(NetworkModel::Reliable);
        let g = initial_state(&cfg);
        let elected = enabled_transitions(&g, &cfg).unwrap().remove(0).target;
        assert!(elected.servers[0].is_leader());
        let ts = enabled_transitions(&elected, &cfg).unwrap();
        assert!(heads(&ts).contains(&ActionLabel::Client {
            leader: ServerId(1)
        }));
        let mut spent = elected.clone();
        spent.client_budget = 0;
        let ts = enabled_transitions(&spent, &cfg).unwrap();
        assert!(!heads(&ts)
            .iter()
            .any(|l| matches!(l, ActionLabel::Client { .. })));
    }

    #[test]
    fn reliable_network_has_no_loss_branches() {
        let cfg = Config::new(3, 1, 0)
            .unwrap()
            .with_network(NetworkModel::Reliable);
        let ts = enabled_transitions(&initial_state(&cfg), &cfg).unwrap();
        let s1: Vec<_> = ts
            .iter()
            .filter(|t| {
                matches!(
                    t.label(),
                    ActionLabel::Timeout {
                        server: ServerId(1),
                        ..
                    }
                )
            })
            .collect();
        // full broadcast, crash before first send, crash after first send
        assert_eq!(s1.len(), 3);
        let full = s1
            .iter()
            .find(|t| !t.target.is_crashed(ServerId(1)))
            .unwrap();
        assert_eq!(full.target.net.len(), 2);
        let rpc = Rpc::RequestVoteRequest {
            last_log_term: Term(0),
            last_log_index: 0,
        };
        assert!(full
            .target
            .net
            .in_flight
            .iter()
            .all(|m| m.payload.rpc == rpc));
    }

    #[test]
    fn enumeration_is_deterministic() {
        let cfg = Config::new(3, 2, 1).unwrap();
        let g = initial_state(&cfg);
        let t = enabled_transitions(&g, &cfg).unwrap();
        let next = &t[0].target;
        assert_eq!(
            enabled_transitions(next, &cfg).unwrap(),
            enabled_transitions(next, &cfg).unwrap()
        );
    }
}
