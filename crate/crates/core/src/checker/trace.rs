//! Counterexample traces: a configuration plus the action labels leading
//! from the initial state, their JSON form, and replay.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::invariants::{self, GhostHistory, InvariantId};
use crate::cluster::{enabled_transitions, initial_state, ActionLabel, GlobalState, TimeoutKind};
use crate::network::{NetMessage, Payload};
use crate::server::ModelError;
use crate::types::{Config, ServerId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub config: Config,
    pub steps: Vec<ActionLabel>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
enum ActionKind {
    Timeout,
    Send,
    Recv,
    Client,
    Crash,
}

/// One step of the JSON trace document. Fields that do not apply to the
/// action are omitted.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct StepDoc {
    action: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    server: Option<ServerId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<TimeoutKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    from: Option<ServerId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    to: Option<ServerId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    payload: Option<Payload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lost: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    duplicated: Option<bool>,
}

#[derive(Serialize, Deserialize)]
struct TraceDoc {
    config: Config,
    steps: Vec<StepDoc>,
}

impl StepDoc {
    fn bare(action: ActionKind) -> StepDoc {
        StepDoc {
            action,
            server: None,
            kind: None,
            from: None,
            to: None,
            payload: None,
            lost: None,
            duplicated: None,
        }
    }

    fn message(action: ActionKind, msg: &NetMessage) -> StepDoc {
        StepDoc {
            from: Some(msg.from),
            to: Some(msg.to),
            payload: Some(msg.payload.clone()),
            ..StepDoc::bare(action)
        }
    }

    fn from_label(label: &ActionLabel) -> StepDoc {
        match label {
            ActionLabel::Timeout { server, kind } => StepDoc {
                server: Some(*server),
                kind: Some(*kind),
                ..StepDoc::bare(ActionKind::Timeout)
            },
            ActionLabel::Send { msg, lost } => StepDoc {
                lost: Some(*lost),
                ..StepDoc::message(ActionKind::Send, msg)
            },
            ActionLabel::Recv { msg, duplicated } => StepDoc {
                duplicated: Some(*duplicated),
                ..StepDoc::message(ActionKind::Recv, msg)
            },
            ActionLabel::Client { leader } => StepDoc {
                server: Some(*leader),
                ..StepDoc::bare(ActionKind::Client)
            },
            ActionLabel::Crash { server } => StepDoc {
                server: Some(*server),
                ..StepDoc::bare(ActionKind::Crash)
            },
        }
    }

    fn into_label(self) -> Result<ActionLabel, String> {
        let missing = |field: &str| format!("{:?} step without `{field}`", self.action);
        let msg = || -> Result<NetMessage, String> {
            Ok(NetMessage {
                from: self.from.ok_or_else(|| missing("from"))?,
                to: self.to.ok_or_else(|| missing("to"))?,
                payload: self.payload.clone().ok_or_else(|| missing("payload"))?,
            })
        };
        Ok(match self.action {
            ActionKind::Timeout => ActionLabel::Timeout {
                server: self.server.ok_or_else(|| missing("server"))?,
                kind: self.kind.ok_or_else(|| missing("kind"))?,
            },
            ActionKind::Send => ActionLabel::Send {
                msg: msg()?,
                lost: self.lost.unwrap_or(false),
            },
            ActionKind::Recv => ActionLabel::Recv {
                msg: msg()?,
                duplicated: self.duplicated.unwrap_or(false),
            },
            ActionKind::Client => ActionLabel::Client {
                leader: self.server.ok_or_else(|| missing("server"))?,
            },
            ActionKind::Crash => ActionLabel::Crash {
                server: self.server.ok_or_else(|| missing("server"))?,
            },
        })
    }
}

impl Serialize for Trace {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        TraceDoc {
            config: self.config,
            steps: self.steps.iter().map(StepDoc::from_label).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Trace {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Trace, D::Error> {
        let doc = TraceDoc::deserialize(deserializer)?;
        doc.config.validate().map_err(serde::de::Error::custom)?;
        let steps = doc
            .steps
            .into_iter()
            .map(StepDoc::into_label)
            .collect::<Result<_, _>>()
            .map_err(serde::de::Error::custom)?;
        Ok(Trace {
            config: doc.config,
            steps,
        })
    }
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionLabel::Timeout { server, kind } => write!(f, "Timeout({server}, {kind:?})"),
            ActionLabel::Send { msg, lost } => {
                write!(f, "Send({msg})")?;
                if *lost {
                    f.write_str(" lost")?;
                }
                Ok(())
            }
            ActionLabel::Recv { msg, duplicated } => {
                write!(f, "Recv({msg})")?;
                if *duplicated {
                    f.write_str(" duplicated")?;
                }
                Ok(())
            }
            ActionLabel::Client { leader } => write!(f, "Client({leader})"),
            ActionLabel::Crash { server } => write!(f, "Crash({server})"),
        }
    }
}

impl fmt::Display for NetMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use crate::network::Rpc::*;
        write!(f, "{}->{} t{} ", self.from, self.to, self.payload.term)?;
        match &self.payload.rpc {
            RequestVoteRequest {
                last_log_term,
                last_log_index,
            } => {
                write!(f, "RequestVoteRequest(lastLogTerm={last_log_term}, lastLogIndex={last_log_index})")
            }
            RequestVoteResponse { vote_granted } => {
                write!(f, "RequestVoteResponse(granted={vote_granted})")
            }
            AppendEntriesRequest {
                prev_log_index,
                prev_log_term,
                entries,
                commit_index,
            } => {
                let terms: Vec<_> = entries.iter().map(|e| e.term.0).collect();
                write!(
                    f,
                    "AppendEntriesRequest(prev={prev_log_index}/t{prev_log_term}, entries={terms:?}, commit={commit_index})"
                )
            }
            AppendEntriesResponse {
                success,
                match_index,
            } => {
                write!(
                    f,
                    "AppendEntriesResponse(success={success}, match={match_index})"
                )
            }
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("step {index} ({label}) does not match any enabled transition")]
    NoMatch { index: usize, label: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One replayed transition.
#[derive(Clone, Debug)]
pub struct ReplayedStep {
    pub labels: Vec<ActionLabel>,
    pub state: GlobalState,
}

/// Replays `trace` from the initial state. At every state the enabled
/// transition whose label sequence is the longest prefix of the remaining
/// steps is taken.
pub fn replay(trace: &Trace) -> Result<(GlobalState, Vec<ReplayedStep>), ReplayError> {
    let cfg = &trace.config;
    let mut state = initial_state(cfg);
    let mut path = Vec::new();
    let mut pos = 0;
    while pos < trace.steps.len() {
        let rest = &trace.steps[pos..];
        let next = enabled_transitions(&state, cfg)?
            .into_iter()
            .filter(|t| rest.starts_with(&t.labels))
            .max_by_key(|t| t.labels.len())
            .ok_or_else(|| ReplayError::NoMatch {
                index: pos,
                label: rest[0].to_string(),
            })?;
        pos += next.labels.len();
        state = next.target.clone();
        path.push(ReplayedStep {
            labels: next.labels,
            state: next.target,
        });
    }
    Ok((state, path))
}

/// An invariant, the transition index where it first failed, and the detail.
pub type Finding = (InvariantId, Option<usize>, String);

/// Violations observed along a replayed trace: the first occurrence of each
/// selected invariant, with the index of the transition where it happened
/// (`None` for the initial state).
pub fn replay_check(
    trace: &Trace,
    selected: &[InvariantId],
) -> Result<(GlobalState, Vec<Finding>), ReplayError> {
    let (last, path) = replay(trace)?;
    let mut found: Vec<Finding> = Vec::new();
    let mut ghost = GhostHistory::new(&trace.config);
    let mut record = |inv: InvariantId, at: Option<usize>, detail: String| {
        if !found.iter().any(|(i, _, _)| *i == inv) {
            found.push((inv, at, detail));
        }
    };
    let mut prev = initial_state(&trace.config);
    for inv in selected.iter().filter(|i| i.is_state()) {
        if let Err(d) = invariants::check_state(*inv, &prev, &mut ghost) {
            record(*inv, None, d);
        }
    }
    for (i, step) in path.iter().enumerate() {
        for inv in selected.iter().filter(|i| !i.is_state()) {
            if let Err(d) = invariants::check_transition(*inv, &prev, &step.labels, &step.state) {
                record(*inv, Some(i), d);
            }
        }
        for inv in selected.iter().filter(|i| i.is_state()) {
            if let Err(d) = invariants::check_state(*inv, &step.state, &mut ghost) {
                record(*inv, Some(i), d);
            }
        }
        prev = step.state.clone();
    }
    Ok((last, found))
}
