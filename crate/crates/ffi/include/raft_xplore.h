/* Generated by cbindgen from crates/ffi/src/lib.rs. */

#ifndef RAFT_XPLORE_H
#define RAFT_XPLORE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  /**
   * Finished without violations.
   */
  RX_STATUS_OK = 0,
  /**
   * Finished and found at least one violation.
   */
  RX_STATUS_VIOLATION = 1,
  RX_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A state or depth limit cut the exploration short; no violation found.
   */
  RX_STATUS_TRUNCATED = 3,
  RX_STATUS_NULL_POINTER = 4,
  /**
   * The model reached an inconsistent state.
   */
  RX_STATUS_MODEL_ERROR = 5,
  RX_STATUS_INTERNAL = 6,
} RxStatus;

typedef enum {
  RX_NETWORK_UNRELIABLE = 0,
  RX_NETWORK_RELIABLE = 1,
} RxNetwork;

typedef enum {
  RX_BUG_NONE = 0,
  RX_BUG_CANDIDATE_NO_STEPDOWN = 1,
  RX_BUG_ADVANCE_COMMIT_MATCH_INDEX_TYPO = 2,
} RxBug;

/**
 * Opaque model configuration.
 */
typedef struct RxConfig RxConfig;

/**
 * Opaque result of `rx_check` or `rx_simulate`.
 */
typedef struct RxReport RxReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *rx_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rx_version(void);

/**
 * Writes a new configuration (unreliable network, no injected bug) to `out`.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
RxStatus rx_config_new(uint32_t servers, uint32_t max_term, uint32_t max_clients, RxConfig **out);

/**
 * # Safety
 * `cfg` must be null or a live handle from `rx_config_new`.
 */
RxStatus rx_config_set_network(RxConfig *cfg, RxNetwork network);

/**
 * # Safety
 * `cfg` must be null or a live handle from `rx_config_new`.
 */
RxStatus rx_config_set_bug(RxConfig *cfg, RxBug bug);

/**
 * # Safety
 * `cfg` must be null or a handle from `rx_config_new` not yet freed.
 */
void rx_config_free(RxConfig *cfg);

/**
 * Exhaustive check of every invariant. `max_depth == 0` means unlimited.
 * On any status other than `InvalidArgument`, `NullPointer`, `ModelError`
 * or `Internal`, a report is written to `out`.
 *
 * # Safety
 * `cfg` must be a live handle or null; `out` must be null or valid for writes.
 */
RxStatus rx_check(const RxConfig *cfg, uint64_t max_states, uint64_t max_depth, RxReport **out);

/**
 * Seeded random walk checking every invariant.
 *
 * # Safety
 * `cfg` must be a live handle or null; `out` must be null or valid for writes.
 */
RxStatus rx_simulate(const RxConfig *cfg, uint64_t seed, uint64_t max_steps, RxReport **out);

/**
 * Returns 0 for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
uint64_t rx_report_states(const RxReport *report);

/**
 * # Safety
 * `report` must be null or a live handle.
 */
uint64_t rx_report_transitions(const RxReport *report);

/**
 * # Safety
 * `report` must be null or a live handle.
 */
uint64_t rx_report_violations(const RxReport *report);

/**
 * # Safety
 * `report` must be null or a live handle.
 */
bool rx_report_truncated(const RxReport *report);

/**
 * Full report as JSON, including counterexample traces. Null on failure.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
char *rx_report_json(const RxReport *report);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void rx_report_free(RxReport *report);

/**
 * Explores `cfg` and writes the state graph in DOT format to `out`.
 * Returns `Truncated` when the state limit was reached.
 *
 * # Safety
 * `cfg` must be a live handle or null; `out` must be null or valid for writes.
 */
RxStatus rx_graph_dot(const RxConfig *cfg, uint64_t max_states, char **out);

/**
 * Checks a trace (JSON, as found in reports) by replaying it. Returns `Ok`
 * when it replays cleanly, `Violation` when an invariant fails along it and
 * `InvalidArgument` when it is malformed or not executable.
 *
 * # Safety
 * `trace_json` must be null or a NUL-terminated string.
 */
RxStatus rx_replay(const char *trace_json);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void rx_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RAFT_XPLORE_H */
