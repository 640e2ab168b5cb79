//! Seeded random-walk simulation for configurations too large to exhaust.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::invariants::{self, GhostHistory, InvariantId};
use super::trace::Trace;
use super::{CheckReport, Violation};
use crate::cluster::{enabled_transitions, initial_state};
use crate::server::ModelError;
use crate::types::Config;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WalkEnd {
    MaxSteps,
    Terminal,
    Violation,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WalkReport {
    pub seed: u64,
    pub max_steps: u64,
    pub end: WalkEnd,
    pub report: CheckReport,
    pub trace: Trace,
}

/// Walks from the initial state, choosing uniformly among enabled
/// transitions with a ChaCha8 generator seeded by `seed`. Stops after
/// `max_steps` transitions, in a terminal state, or at the first violation.
pub fn random_walk(
    cfg: &Config,
    seed: u64,
    max_steps: u64,
    selected: &[InvariantId],
) -> Result<WalkReport, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = initial_state(cfg);
    let mut ghost = GhostHistory::new(cfg);
    let mut steps = Vec::new();
    let mut report = CheckReport {
        states_explored: 1,
        ..CheckReport::default()
    };
    let mut found: Vec<(InvariantId, String)> = Vec::new();

    for &inv in selected.iter().filter(|i| i.is_state()) {
        if let Err(d) = invariants::check_state(inv, &state, &mut ghost) {
            found.push((inv, d));
        }
    }

    let mut end = WalkEnd::MaxSteps;
    while found.is_empty() {
        if report.transitions >= max_steps {
            break;
        }
        let mut ts = enabled_transitions(&state, cfg)?;
        if ts.is_empty() {
            report.terminal_states = 1;
            end = WalkEnd::Terminal;
            break;
        }
        let t = ts.swap_remove(rng.random_range(0..ts.len()));
        for &inv in selected.iter().filter(|i| !i.is_state()) {
            if let Err(d) = invariants::check_transition(inv, &state, &t.labels, &t.target) {
                found.push((inv, d));
            }
        }
        for &inv in selected.iter().filter(|i| i.is_state()) {
            if let Err(d) = invariants::check_state(inv, &t.target, &mut ghost) {
                found.push((inv, d));
            }
        }
        steps.extend(t.labels);
        state = t.target;
        report.transitions += 1;
        report.states_explored += 1;
        report.depth = report.transitions;
    }

    let trace = Trace {
        config: *cfg,
        steps,
    };
    if !found.is_empty() {
        end = WalkEnd::Violation;
    }
    report.violations = found
        .into_iter()
        .map(|(invariant, detail)| Violation {
            invariant,
            detail,
            trace: trace.clone(),
        })
        .collect();
    Ok(WalkReport {
        seed,
        max_steps,
        end,
        report,
        trace,
    })
}
