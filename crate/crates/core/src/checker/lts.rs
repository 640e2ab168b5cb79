//! GraphViz DOT export of the explored labeled transition system.

use std::fmt::Write;

use super::explore::{explore_with, Edge, ExploreOptions};
use super::Limits;
use crate::cluster::ActionLabel;
use crate::server::ModelError;
use crate::types::Config;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn edge_label(labels: &[ActionLabel]) -> String {
    labels
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Explores `cfg` within `limits` (no invariant checks) and renders the
/// result. State 0 is the initial state. The two comment lines at the top
/// carry the configuration and the exact node and edge counts.
pub fn export_lts(cfg: &Config, limits: Limits) -> Result<String, ModelError> {
    let opts = ExploreOptions {
        invariants: Vec::new(),
        limits,
        fail_fast: false,
    };
    let mut edges = String::new();
    let mut sink = |e: Edge<'_>| {
        let _ = writeln!(
            edges,
            "  {} -> {} [label=\"{}\"];",
            e.src,
            e.dst,
            escape(&edge_label(e.labels))
        );
    };
    let exploration = explore_with(cfg, &opts, Some(&mut sink))?;
    let report = &exploration.report;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "// raft-xplore lts servers={} maxTerm={} maxClients={} network={:?} bug={:?}",
        cfg.max_server_id,
        cfg.max_term,
        cfg.max_client_interactions,
        cfg.network_model,
        cfg.injected_bug
    );
    let _ = writeln!(
        out,
        "// states={} transitions={} truncated={}",
        report.states_explored, report.transitions, report.truncated
    );
    out.push_str("digraph lts {\n");
    if report.states_explored > 0 {
        out.push_str("  0 [shape=doublecircle];\n");
        for idx in 1..report.states_explored {
            let _ = writeln!(out, "  {idx};");
        }
    }
    out.push_str(&edges);
    out.push_str("}\n");
    Ok(out)
}
