//! C ABI for the raft-xplore checker.
//!
//! Configurations and reports are opaque heap handles owned by the caller and
//! released with the matching `*_free` function. Fallible calls return an
//! [`RxStatus`]; the message of the most recent failure on the calling thread
//! is available from [`rx_last_error`]. Strings returned by the library are
//! NUL-terminated and must be released with [`rx_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use raft_xplore::checker::{self, ExploreOptions, InvariantId, WalkReport};
use raft_xplore::{CheckReport, Config, InjectedBug, Limits, NetworkModel};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RxStatus {
    /// Finished without violations.
    Ok = 0,
    /// Finished and found at least one violation.
    Violation = 1,
    InvalidArgument = 2,
    /// A state or depth limit cut the exploration short; no violation found.
    Truncated = 3,
    NullPointer = 4,
    /// The model reached an inconsistent state.
    ModelError = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RxNetwork {
    Unreliable = 0,
    Reliable = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RxBug {
    None = 0,
    CandidateNoStepdown = 1,
    AdvanceCommitMatchIndexTypo = 2,
}

/// Opaque model configuration.
pub struct RxConfig {
    inner: Config,
}

enum ReportKind {
    Check(CheckReport),
    Walk(WalkReport),
}

/// Opaque result of `rx_check` or `rx_simulate`.
pub struct RxReport {
    config: Config,
    kind: ReportKind,
}

impl RxReport {
    fn summary(&self) -> &CheckReport {
        match &self.kind {
            ReportKind::Check(r) => r,
            ReportKind::Walk(w) => &w.report,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: RxStatus, msg: impl Into<String>) -> RxStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> RxStatus) -> RxStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(RxStatus::Internal, "internal panic"))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s)
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

fn verdict(r: &CheckReport) -> RxStatus {
    if !r.passed() {
        RxStatus::Violation
    } else if r.truncated {
        RxStatus::Truncated
    } else {
        RxStatus::Ok
    }
}

fn limits(max_states: u64, max_depth: u64) -> Limits {
    Limits {
        max_states: usize::try_from(max_states).unwrap_or(usize::MAX),
        max_depth: if max_depth == 0 {
            usize::MAX
        } else {
            usize::try_from(max_depth).unwrap_or(usize::MAX)
        },
    }
}

/// Message describing the last failure on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Writes a new configuration (unreliable network, no injected bug) to `out`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rx_config_new(
    servers: u32,
    max_term: u32,
    max_clients: u32,
    out: *mut *mut RxConfig,
) -> RxStatus {
    guard(|| {
        if out.is_null() {
            return fail(RxStatus::NullPointer, "out is null");
        }
        match Config::new(servers, max_term, max_clients) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RxConfig { inner }));
                RxStatus::Ok
            }
            Err(e) => fail(RxStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `cfg` must be null or a live handle from `rx_config_new`.
#[no_mangle]
pub unsafe extern "C" fn rx_config_set_network(cfg: *mut RxConfig, network: RxNetwork) -> RxStatus {
    let Some(cfg) = cfg.as_mut() else {
        return fail(RxStatus::NullPointer, "cfg is null");
    };
    cfg.inner.network_model = match network {
        RxNetwork::Unreliable => NetworkModel::Unreliable,
        RxNetwork::Reliable => NetworkModel::Reliable,
    };
    RxStatus::Ok
}

/// # Safety
/// `cfg` must be null or a live handle from `rx_config_new`.
#[no_mangle]
pub unsafe extern "C" fn rx_config_set_bug(cfg: *mut RxConfig, bug: RxBug) -> RxStatus {
    let Some(cfg) = cfg.as_mut() else {
        return fail(RxStatus::NullPointer, "cfg is null");
    };
    cfg.inner.injected_bug = match bug {
        RxBug::None => InjectedBug::None,
        RxBug::CandidateNoStepdown => InjectedBug::CandidateNoStepdown,
        RxBug::AdvanceCommitMatchIndexTypo => InjectedBug::AdvanceCommitMatchIndexTypo,
    };
    RxStatus::Ok
}

/// # Safety
/// `cfg` must be null or a handle from `rx_config_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rx_config_free(cfg: *mut RxConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Exhaustive check of every invariant. `max_depth == 0` means unlimited.
/// On any status other than `InvalidArgument`, `NullPointer`, `ModelError`
/// or `Internal`, a report is written to `out`.
///
/// # Safety
/// `cfg` must be a live handle or null; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rx_check(
    cfg: *const RxConfig,
    max_states: u64,
    max_depth: u64,
    out: *mut *mut RxReport,
) -> RxStatus {
    guard(|| {
        let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
            return fail(RxStatus::NullPointer, "cfg or out is null");
        };
        let opts = ExploreOptions {
            limits: limits(max_states, max_depth),
            ..ExploreOptions::default()
        };
        match checker::explore(&cfg.inner, &opts) {
            Ok(exploration) => {
                let report = exploration.report;
                let status = verdict(&report);
                *out = Box::into_raw(Box::new(RxReport {
                    config: cfg.inner,
                    kind: ReportKind::Check(report),
                }));
                status
            }
            Err(e) => fail(RxStatus::ModelError, e.to_string()),
        }
    })
}

/// Seeded random walk checking every invariant.
///
/// # Safety
/// `cfg` must be a live handle or null; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rx_simulate(
    cfg: *const RxConfig,
    seed: u64,
    max_steps: u64,
    out: *mut *mut RxReport,
) -> RxStatus {
    guard(|| {
        let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
            return fail(RxStatus::NullPointer, "cfg or out is null");
        };
        if max_steps == 0 {
            return fail(RxStatus::InvalidArgument, "max_steps must be positive");
        }
        match checker::random_walk(&cfg.inner, seed, max_steps, &InvariantId::ALL) {
            Ok(walk) => {
                let status = if walk.report.passed() {
                    RxStatus::Ok
                } else {
                    RxStatus::Violation
                };
                *out = Box::into_raw(Box::new(RxReport {
                    config: cfg.inner,
                    kind: ReportKind::Walk(walk),
                }));
                status
            }
            Err(e) => fail(RxStatus::ModelError, e.to_string()),
        }
    })
}

/// Returns 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rx_report_states(report: *const RxReport) -> u64 {
    report.as_ref().map_or(0, |r| r.summary().states_explored)
}

/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rx_report_transitions(report: *const RxReport) -> u64 {
    report.as_ref().map_or(0, |r| r.summary().transitions)
}

/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rx_report_violations(report: *const RxReport) -> u64 {
    report
        .as_ref()
        .map_or(0, |r| r.summary().violations.len() as u64)
}

/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rx_report_truncated(report: *const RxReport) -> bool {
    report.as_ref().is_some_and(|r| r.summary().truncated)
}

/// Full report as JSON, including counterexample traces. Null on failure.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rx_report_json(report: *const RxReport) -> *mut c_char {
    let Some(r) = report.as_ref() else {
        set_error("report is null");
        return ptr::null_mut();
    };
    let json = match &r.kind {
        ReportKind::Check(c) => serde_json::json!({ "config": r.config, "report": c }),
        ReportKind::Walk(w) => serde_json::json!({ "config": r.config, "walk": w }),
    };
    into_c_string(json.to_string())
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rx_report_free(report: *mut RxReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Explores `cfg` and writes the state graph in DOT format to `out`.
/// Returns `Truncated` when the state limit was reached.
///
/// # Safety
/// `cfg` must be a live handle or null; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rx_graph_dot(
    cfg: *const RxConfig,
    max_states: u64,
    out: *mut *mut c_char,
) -> RxStatus {
    guard(|| {
        let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
            return fail(RxStatus::NullPointer, "cfg or out is null");
        };
        match checker::export_lts(&cfg.inner, limits(max_states, 0)) {
            Ok(dot) => {
                let truncated = dot
                    .lines()
                    .nth(1)
                    .is_some_and(|l| l.ends_with("truncated=true"));
                *out = into_c_string(dot);
                if truncated {
                    RxStatus::Truncated
                } else {
                    RxStatus::Ok
                }
            }
            Err(e) => fail(RxStatus::ModelError, e.to_string()),
        }
    })
}

/// Checks a trace (JSON, as found in reports) by replaying it. Returns `Ok`
/// when it replays cleanly, `Violation` when an invariant fails along it and
/// `InvalidArgument` when it is malformed or not executable.
///
/// # Safety
/// `trace_json` must be null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rx_replay(trace_json: *const c_char) -> RxStatus {
    guard(|| {
        if trace_json.is_null() {
            return fail(RxStatus::NullPointer, "trace_json is null");
        }
        let Ok(text) = CStr::from_ptr(trace_json).to_str() else {
            return fail(RxStatus::InvalidArgument, "trace is not UTF-8");
        };
        let trace: checker::Trace = match serde_json::from_str(text) {
            Ok(t) => t,
            Err(e) => return fail(RxStatus::InvalidArgument, format!("bad trace: {e}")),
        };
        match checker::replay_check(&trace, &InvariantId::ALL) {
            Ok((_, found)) if found.is_empty() => RxStatus::Ok,
            Ok((_, found)) => fail(RxStatus::Violation, found[0].2.clone()),
            Err(e) => fail(RxStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rx_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
