//! Breadth-first exploration of the reachable state space.
//!
//! Exploration is level-synchronous. Each level is cut into chunks; a chunk
//! is expanded in parallel (successor enumeration, encoding, transition
//! invariants) and then merged into the visited set sequentially in frontier
//! order. State numbering, parent links and reported counts therefore do not
//! depend on the number of worker threads.
//!
//! History-dependent invariants use the history of the BFS-tree path that
//! first reached a state. Re-discovering a state along another path does not
//! re-check it.

use std::collections::HashMap;

use rayon::prelude::*;
use rustc_hash::FxBuildHasher;

use super::codec;
use super::invariants::{self, GhostHistory, InvariantId};
use super::store::StateStore;
use super::trace::Trace;
use super::{CheckReport, Limits, Violation};
use crate::cluster::{enabled_transitions, initial_state, ActionLabel, GlobalState};
use crate::server::ModelError;
use crate::types::Config;

const CHUNK: usize = 2048;

/// A new state, its ghost history and the state invariants it broke.
type Checked = (u32, GhostHistory, Vec<(InvariantId, String)>);
const NO_PARENT: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub struct ExploreOptions {
    pub invariants: Vec<InvariantId>,
    pub limits: Limits,
    /// Stop at the first violation instead of collecting one per invariant.
    pub fail_fast: bool,
}

impl Default for ExploreOptions {
    fn default() -> ExploreOptions {
        ExploreOptions {
            invariants: InvariantId::ALL.to_vec(),
            limits: Limits::default(),
            fail_fast: false,
        }
    }
}

/// An explored edge, reported in exploration order.
pub struct Edge<'a> {
    pub src: u32,
    pub dst: u32,
    pub labels: &'a [ActionLabel],
}

/// Where a violation was observed.
#[derive(Clone, Copy, Debug)]
enum Site {
    State(u32),
    /// Transition number `ordinal` out of state `src`.
    Edge {
        src: u32,
        ordinal: u32,
    },
}

/// Result of an exploration: the report plus the visited states.
pub struct Exploration {
    pub report: CheckReport,
    pub store: StateStore,
    /// `(parent, ordinal of the transition from the parent)` per state.
    parents: Vec<(u32, u32)>,
    cfg: Config,
}

impl Exploration {
    pub fn state(&self, idx: u32) -> GlobalState {
        codec::decode(self.store.get(idx), &self.cfg)
    }

    /// Label groups of the BFS-tree path from the initial state to `idx`.
    pub fn path_to(&self, idx: u32) -> Result<Vec<Vec<ActionLabel>>, ModelError> {
        let mut chain = vec![idx];
        while let Some(&(parent, _)) = self.parents.get(*chain.last().unwrap() as usize) {
            if parent == NO_PARENT {
                break;
            }
            chain.push(parent);
        }
        chain.reverse();
        let mut groups = Vec::with_capacity(chain.len());
        for w in chain.windows(2) {
            let ordinal = self.parents[w[1] as usize].1;
            groups.push(self.labels_of(w[0], ordinal)?);
        }
        Ok(groups)
    }

    fn labels_of(&self, src: u32, ordinal: u32) -> Result<Vec<ActionLabel>, ModelError> {
        let ts = enabled_transitions(&self.state(src), &self.cfg)?;
        Ok(ts
            .into_iter()
            .nth(ordinal as usize)
            .expect("recorded ordinal is enabled")
            .labels)
    }

    fn trace_to(&self, site: Site) -> Result<Trace, ModelError> {
        let mut groups = match site {
            Site::State(idx) => self.path_to(idx)?,
            Site::Edge { src, .. } => self.path_to(src)?,
        };
        if let Site::Edge { src, ordinal } = site {
            groups.push(self.labels_of(src, ordinal)?);
        }
        Ok(Trace {
            config: self.cfg,
            steps: groups.into_iter().flatten().collect(),
        })
    }
}

struct Succ {
    bytes: Vec<u8>,
    labels: Vec<ActionLabel>,
    target: GlobalState,
    violations: Vec<(InvariantId, String)>,
}

struct Expanded {
    src: u32,
    successors: Vec<Succ>,
}

fn expand(
    src: u32,
    store: &StateStore,
    cfg: &Config,
    transition_invs: &[InvariantId],
) -> Result<Expanded, ModelError> {
    let state = codec::decode(store.get(src), cfg);
    let successors = enabled_transitions(&state, cfg)?
        .into_iter()
        .map(|t| {
            let violations = transition_invs
                .iter()
                .filter_map(|&inv| {
                    invariants::check_transition(inv, &state, &t.labels, &t.target)
                        .err()
                        .map(|d| (inv, d))
                })
                .collect();
            Succ {
                bytes: codec::encode_to_vec(&t.target, cfg),
                labels: t.labels,
                target: t.target,
                violations,
            }
        })
        .collect();
    Ok(Expanded { src, successors })
}

fn check_new_state(
    state: &GlobalState,
    ghost: &mut GhostHistory,
    state_invs: &[InvariantId],
) -> Vec<(InvariantId, String)> {
    state_invs
        .iter()
        .filter_map(|&inv| {
            invariants::check_state(inv, state, ghost)
                .err()
                .map(|d| (inv, d))
        })
        .collect()
}

/// Distinct ghost histories. Frontier entries refer to them by number; most
/// states share a handful of histories.
#[derive(Default)]
struct Ghosts {
    list: Vec<GhostHistory>,
    ids: HashMap<GhostHistory, u32, FxBuildHasher>,
}

impl Ghosts {
    fn intern(&mut self, ghost: GhostHistory) -> u32 {
        if let Some(&id) = self.ids.get(&ghost) {
            return id;
        }
        let id = self.list.len() as u32;
        self.list.push(ghost.clone());
        self.ids.insert(ghost, id);
        id
    }
}

struct Recorder {
    found: Vec<(InvariantId, String, Site)>,
    fail_fast: bool,
}

impl Recorder {
    fn record(&mut self, inv: InvariantId, detail: String, site: Site) {
        if !self.found.iter().any(|(i, _, _)| *i == inv) {
            self.found.push((inv, detail, site));
        }
    }

    fn stop(&self) -> bool {
        self.fail_fast && !self.found.is_empty()
    }
}

pub fn explore(cfg: &Config, opts: &ExploreOptions) -> Result<Exploration, ModelError> {
    explore_with(cfg, opts, None)
}

/// Explores the state space, passing every counted edge to `on_edge`.
pub fn explore_with(
    cfg: &Config,
    opts: &ExploreOptions,
    mut on_edge: Option<&mut dyn FnMut(Edge<'_>)>,
) -> Result<Exploration, ModelError> {
    let state_invs: Vec<_> = opts
        .invariants
        .iter()
        .copied()
        .filter(|i| i.is_state())
        .collect();
    let transition_invs: Vec<_> = opts
        .invariants
        .iter()
        .copied()
        .filter(|i| !i.is_state())
        .collect();
    let limits = opts.limits;

    let mut store = StateStore::new();
    let mut parents: Vec<(u32, u32)> = Vec::new();
    let mut report = CheckReport::default();
    let mut rec = Recorder {
        found: Vec::new(),
        fail_fast: opts.fail_fast,
    };

    let init = initial_state(cfg);
    let mut ghosts = Ghosts::default();
    let mut frontier: Vec<(u32, u32)> = Vec::new();
    if limits.max_states == 0 {
        report.truncated = true;
    } else {
        let (idx, _) = store
            .insert(&codec::encode_to_vec(&init, cfg), true)
            .expect("empty store accepts");
        parents.push((NO_PARENT, 0));
        let mut ghost = GhostHistory::new(cfg);
        for (inv, d) in check_new_state(&init, &mut ghost, &state_invs) {
            rec.record(inv, d, Site::State(idx));
        }
        frontier.push((idx, ghosts.intern(ghost)));
    }

    let mut depth = 0usize;
    'levels: while !frontier.is_empty() && !rec.stop() {
        report.depth = depth as u64;
        if depth >= limits.max_depth {
            // Depth-limited states are not expanded; only classify them.
            let enabled: Vec<bool> = frontier
                .par_iter()
                .map(|(idx, _)| {
                    enabled_transitions(&codec::decode(store.get(*idx), cfg), cfg)
                        .map(|ts| !ts.is_empty())
                })
                .collect::<Result<_, _>>()?;
            report.terminal_states += enabled.iter().filter(|e| !**e).count() as u64;
            report.truncated |= enabled.iter().any(|e| *e);
            break;
        }
        let mut next_frontier = Vec::new();
        for chunk in frontier.chunks(CHUNK) {
            let expanded: Vec<Expanded> = chunk
                .par_iter()
                .map(|(idx, _)| expand(*idx, &store, cfg, &transition_invs))
                .collect::<Result<_, _>>()?;

            // (new state, position of its parent in `chunk`, successor)
            let mut fresh: Vec<(u32, usize, GlobalState)> = Vec::new();
            for (pos, exp) in expanded.into_iter().enumerate() {
                if exp.successors.is_empty() {
                    report.terminal_states += 1;
                }
                for (ordinal, succ) in exp.successors.into_iter().enumerate() {
                    let ordinal = ordinal as u32;
                    for (inv, d) in succ.violations {
                        rec.record(
                            inv,
                            d,
                            Site::Edge {
                                src: exp.src,
                                ordinal,
                            },
                        );
                    }
                    let allow_new = store.len() < limits.max_states;
                    let Some((dst, is_new)) = store.insert(&succ.bytes, allow_new) else {
                        report.truncated = true;
                        continue;
                    };
                    report.transitions += 1;
                    if let Some(sink) = on_edge.as_mut() {
                        sink(Edge {
                            src: exp.src,
                            dst,
                            labels: &succ.labels,
                        });
                    }
                    if is_new {
                        parents.push((exp.src, ordinal));
                        fresh.push((dst, pos, succ.target));
                    }
                }
            }

            let checked: Vec<Checked> = fresh
                .into_par_iter()
                .map(|(idx, pos, state)| {
                    let mut ghost = ghosts.list[chunk[pos].1 as usize].clone();
                    let v = check_new_state(&state, &mut ghost, &state_invs);
                    (idx, ghost, v)
                })
                .collect();
            for (idx, ghost, violations) in checked {
                for (inv, d) in violations {
                    rec.record(inv, d, Site::State(idx));
                }
                next_frontier.push((idx, ghosts.intern(ghost)));
            }
            if rec.stop() {
                break 'levels;
            }
        }
        frontier = next_frontier;
        depth += 1;
    }
    if rec.stop() && !frontier.is_empty() {
        report.truncated = true;
    }

    report.states_explored = store.len() as u64;
    let mut exploration = Exploration {
        report,
        store,
        parents,
        cfg: *cfg,
    };
    let mut violations = Vec::with_capacity(rec.found.len());
    for (inv, detail, site) in rec.found {
        let trace = exploration.trace_to(site)?;
        violations.push(Violation {
            invariant: inv,
            detail,
            trace,
        });
    }
    exploration.report.violations = violations;
    Ok(exploration)
}
