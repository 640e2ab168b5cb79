//! Command-line frontend. `run` parses arguments, does the work and returns
//! the exit status with the rendered output; the binary only prints it.
//!
//! Exit status: 0 no violations, 1 violations found, 2 usage or input error,
//! 3 exploration truncated without a verdict.

use std::ffi::OsString;
use std::fmt::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::checker::{
    self, explore, export_lts, random_walk, replay_check, CheckReport, ExploreOptions, InvariantId,
    Limits, Trace, WalkReport,
};
use crate::types::{Config, InjectedBug, NetworkModel};

pub const THREADS_ENV: &str = "RAFT_XPLORE_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TRUNCATED: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "raft-xplore",
    version,
    about = "Explicit-state model checker for the core Raft protocol"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exhaustively explore a configuration and check safety invariants
    Check(CheckArgs),
    /// Run a seeded random walk
    Simulate(SimulateArgs),
    /// Export the explored state space as a GraphViz DOT graph
    Graph(GraphArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NetworkArg {
    Unreliable,
    Reliable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BugArg {
    None,
    CandidateNoStepdown,
    AdvanceCommitMatchindexTypo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    /// Number of servers
    #[arg(long, default_value_t = 3)]
    pub servers: u32,
    /// Highest term a server may reach by starting an election
    #[arg(long, default_value_t = 2)]
    pub max_term: u32,
    /// Total number of client interactions
    #[arg(long, default_value_t = 1)]
    pub max_clients: u32,
    #[arg(long, value_enum, default_value = "unreliable")]
    pub network: NetworkArg,
    #[arg(long, value_enum, default_value = "none")]
    pub inject_bug: BugArg,
}

impl ModelArgs {
    fn config(&self) -> Result<Config, String> {
        let network = match self.network {
            NetworkArg::Unreliable => NetworkModel::Unreliable,
            NetworkArg::Reliable => NetworkModel::Reliable,
        };
        let bug = match self.inject_bug {
            BugArg::None => InjectedBug::None,
            BugArg::CandidateNoStepdown => InjectedBug::CandidateNoStepdown,
            BugArg::AdvanceCommitMatchindexTypo => InjectedBug::AdvanceCommitMatchIndexTypo,
        };
        let cfg = Config::new(self.servers, self.max_term, self.max_clients).map_err(|e| {
            let flag = match e {
                crate::types::ConfigError::Servers(_) => "--servers",
                crate::types::ConfigError::MaxTerm(_) => "--max-term",
                crate::types::ConfigError::MaxClients(_) => "--max-clients",
            };
            format!("{flag}: {e}")
        })?;
        Ok(cfg.with_network(network).with_bug(bug))
    }
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Stop after this many distinct states
    #[arg(long, default_value_t = 50_000_000)]
    pub max_states: usize,
    /// Do not expand states deeper than this
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Comma-separated invariants to check (default: all)
    #[arg(long, value_delimiter = ',')]
    pub invariants: Vec<String>,
    /// Stop at the first violation
    #[arg(long)]
    pub fail_fast: bool,
    /// Re-validate a trace (or every trace of a report) instead of exploring
    #[arg(long)]
    pub replay: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Write the report here instead of standard output
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub max_steps: u64,
    /// Comma-separated invariants to check (default: all)
    #[arg(long, value_delimiter = ',')]
    pub invariants: Vec<String>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GraphArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_states: usize,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, value_enum, default_value = "dot")]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Exit status plus what goes to stdout and stderr.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct CliOutcome {
    pub status: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CliOutcome {
    fn usage(msg: impl Into<String>) -> CliOutcome {
        CliOutcome {
            status: EXIT_USAGE,
            stdout: String::new(),
            stderr: format!("error: {}\n", msg.into()),
        }
    }
}

#[derive(Serialize)]
struct CheckDoc<'a> {
    config: &'a Config,
    #[serde(flatten)]
    report: &'a CheckReport,
}

/// Anything `--replay` accepts.
#[derive(Deserialize)]
#[serde(untagged)]
enum ReplayInput {
    Trace(Trace),
    Walk { trace: Trace },
    Report { violations: Vec<checker::Violation> },
}

pub fn run<I, T>(args: I) -> CliOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let status = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            return if e.use_stderr() {
                CliOutcome {
                    status,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                CliOutcome {
                    status,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    let threads = match thread_count() {
        Ok(t) => t,
        Err(msg) => return CliOutcome::usage(msg),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(e) => return CliOutcome::usage(format!("cannot start worker threads: {e}")),
    };
    pool.install(|| match cli.command {
        Command::Check(a) => run_check(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Graph(a) => run_graph(a),
    })
}

fn thread_count() -> Result<Option<usize>, String> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            )),
        },
    }
}

fn parse_invariants(names: &[String]) -> Result<Vec<InvariantId>, String> {
    if names.is_empty() {
        return Ok(InvariantId::ALL.to_vec());
    }
    names
        .iter()
        .map(|n| {
            n.parse::<InvariantId>()
                .map_err(|e| format!("--invariants: {e}"))
        })
        .collect()
}

/// Writes `doc` to `output` when given, else returns it as stdout.
fn emit(doc: String, output: Option<&Path>, status: i32, summary: String) -> CliOutcome {
    match output {
        None => CliOutcome {
            status,
            stdout: doc,
            stderr: String::new(),
        },
        Some(path) => match std::fs::write(path, doc) {
            Ok(()) => CliOutcome {
                status,
                stdout: summary,
                stderr: String::new(),
            },
            Err(e) => CliOutcome::usage(format!("--output {}: {e}", path.display())),
        },
    }
}

fn config_line(cfg: &Config) -> String {
    format!(
        "config: servers={} max-term={} max-clients={} network={:?} bug={:?}",
        cfg.max_server_id,
        cfg.max_term,
        cfg.max_client_interactions,
        cfg.network_model,
        cfg.injected_bug
    )
}

fn render_trace(out: &mut String, trace: &Trace) {
    for (i, step) in trace.steps.iter().enumerate() {
        let _ = writeln!(out, "    {:>3}. {step}", i + 1);
    }
}

fn render_report(cfg: &Config, r: &CheckReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", config_line(cfg));
    let _ = writeln!(out, "states: {}", r.states_explored);
    let _ = writeln!(out, "transitions: {}", r.transitions);
    let _ = writeln!(out, "terminal states: {}", r.terminal_states);
    let _ = writeln!(out, "depth: {}", r.depth);
    let _ = writeln!(out, "truncated: {}", r.truncated);
    let _ = writeln!(out, "violations: {}", r.violations.len());
    for v in &r.violations {
        let _ = writeln!(
            out,
            "  {}: {} ({} steps)",
            v.invariant,
            v.detail,
            v.trace.steps.len()
        );
        render_trace(&mut out, &v.trace);
    }
    out
}

fn verdict(r: &CheckReport) -> i32 {
    if !r.passed() {
        EXIT_VIOLATION
    } else if r.truncated {
        EXIT_TRUNCATED
    } else {
        EXIT_OK
    }
}

fn run_check(a: CheckArgs) -> CliOutcome {
    if a.format == Format::Dot {
        return CliOutcome::usage("--format dot is only supported by `graph`");
    }
    let invariants = match parse_invariants(&a.invariants) {
        Ok(i) => i,
        Err(e) => return CliOutcome::usage(e),
    };
    if let Some(path) = &a.replay {
        return run_replay(path, &invariants, a.format, a.output.as_deref());
    }
    if a.max_states == 0 {
        return CliOutcome::usage("--max-states must be positive");
    }
    if a.max_depth == Some(0) {
        return CliOutcome::usage("--max-depth must be positive");
    }
    let cfg = match a.model.config() {
        Ok(c) => c,
        Err(e) => return CliOutcome::usage(e),
    };
    let limits = Limits {
        max_states: a.max_states,
        max_depth: a.max_depth.unwrap_or(usize::MAX),
    };
    let opts = ExploreOptions {
        invariants,
        limits,
        fail_fast: a.fail_fast,
    };
    let report = match explore(&cfg, &opts) {
        Ok(e) => e.report,
        Err(e) => return CliOutcome::usage(format!("model error: {e}")),
    };
    let status = verdict(&report);
    let doc = match a.format {
        Format::Json => to_json(&CheckDoc {
            config: &cfg,
            report: &report,
        }),
        _ => render_report(&cfg, &report),
    };
    let summary = format!(
        "states={} transitions={} violations={} truncated={}\n",
        report.states_explored,
        report.transitions,
        report.violations.len(),
        report.truncated
    );
    emit(doc, a.output.as_deref(), status, summary)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ReplayDoc {
    steps: usize,
    violations: Vec<ReplayViolation>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ReplayViolation {
    invariant: InvariantId,
    detail: String,
    /// Index of the transition where the violation appears; absent for the
    /// initial state.
    at_transition: Option<usize>,
}

fn run_replay(
    path: &Path,
    invariants: &[InvariantId],
    format: Format,
    output: Option<&Path>,
) -> CliOutcome {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return CliOutcome::usage(format!("--replay {}: {e}", path.display())),
    };
    let traces = match serde_json::from_str::<ReplayInput>(&text) {
        Ok(ReplayInput::Trace(t)) => vec![t],
        Ok(ReplayInput::Walk { trace }) => vec![trace],
        Ok(ReplayInput::Report { violations }) => violations.into_iter().map(|v| v.trace).collect(),
        Err(e) => {
            return CliOutcome::usage(format!(
                "--replay {}: not a trace or report: {e}",
                path.display()
            ))
        }
    };
    let mut docs = Vec::new();
    for trace in &traces {
        let (_, found) = match replay_check(trace, invariants) {
            Ok(r) => r,
            Err(e) => return CliOutcome::usage(format!("--replay {}: {e}", path.display())),
        };
        docs.push(ReplayDoc {
            steps: trace.steps.len(),
            violations: found
                .into_iter()
                .map(|(invariant, at, detail)| ReplayViolation {
                    invariant,
                    detail,
                    at_transition: at,
                })
                .collect(),
        });
    }
    let status = if docs.iter().any(|d| !d.violations.is_empty()) {
        EXIT_VIOLATION
    } else {
        EXIT_OK
    };
    let doc = match format {
        Format::Json => to_json(&docs),
        _ => {
            let mut out = String::new();
            for (i, d) in docs.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "trace {}: replayed {} steps, {} violation(s)",
                    i + 1,
                    d.steps,
                    d.violations.len()
                );
                for v in &d.violations {
                    let at = v.at_transition.map_or("initial state".to_string(), |t| {
                        format!("transition {}", t + 1)
                    });
                    let _ = writeln!(out, "  {} at {at}: {}", v.invariant, v.detail);
                }
            }
            out
        }
    };
    let summary = format!("replayed {} trace(s)\n", docs.len());
    emit(doc, output, status, summary)
}

fn run_simulate(a: SimulateArgs) -> CliOutcome {
    if a.format == Format::Dot {
        return CliOutcome::usage("--format dot is only supported by `graph`");
    }
    if a.max_steps == 0 {
        return CliOutcome::usage("--max-steps must be positive");
    }
    let invariants = match parse_invariants(&a.invariants) {
        Ok(i) => i,
        Err(e) => return CliOutcome::usage(e),
    };
    let cfg = match a.model.config() {
        Ok(c) => c,
        Err(e) => return CliOutcome::usage(e),
    };
    let walk: WalkReport = match random_walk(&cfg, a.seed, a.max_steps, &invariants) {
        Ok(w) => w,
        Err(e) => return CliOutcome::usage(format!("model error: {e}")),
    };
    let status = if walk.report.passed() {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    };
    let doc = match a.format {
        Format::Json => to_json(&walk),
        _ => {
            let mut out = render_report(&cfg, &walk.report);
            let _ = writeln!(out, "seed: {} end: {:?}", walk.seed, walk.end);
            let _ = writeln!(out, "trace ({} labels):", walk.trace.steps.len());
            render_trace(&mut out, &walk.trace);
            out
        }
    };
    let summary = format!(
        "steps={} end={:?} violations={}\n",
        walk.report.transitions,
        walk.end,
        walk.report.violations.len()
    );
    emit(doc, a.output.as_deref(), status, summary)
}

fn run_graph(a: GraphArgs) -> CliOutcome {
    if a.format != Format::Dot {
        return CliOutcome::usage("--format: `graph` only writes dot");
    }
    let cfg = match a.model.config() {
        Ok(c) => c,
        Err(e) => return CliOutcome::usage(e),
    };
    let limits = Limits {
        max_states: a.max_states,
        max_depth: a.max_depth.unwrap_or(usize::MAX),
    };
    let dot = match export_lts(&cfg, limits) {
        Ok(d) => d,
        Err(e) => return CliOutcome::usage(format!("model error: {e}")),
    };
    let truncated = dot
        .lines()
        .nth(1)
        .is_some_and(|l| l.ends_with("truncated=true"));
    let status = if truncated { EXIT_TRUNCATED } else { EXIT_OK };
    let summary = dot
        .lines()
        .nth(1)
        .unwrap_or_default()
        .trim_start_matches("// ")
        .to_string()
        + "\n";
    emit(dot, a.output.as_deref(), status, summary)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}
