#ifndef MOKKA_H
#define MOKKA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MokkaStatus {
  MOKKA_STATUS_OK = 0,
  MOKKA_STATUS_NULL_POINTER = 1,
  MOKKA_STATUS_INVALID_UTF8 = 2,
  MOKKA_STATUS_INVALID_ARGUMENT = 3,
  MOKKA_STATUS_PARSE = 4,
  MOKKA_STATUS_CRYPTO = 5,
  MOKKA_STATUS_SIMULATION = 6,
  MOKKA_STATUS_OUT_OF_RANGE = 7,
  MOKKA_STATUS_PANIC = 99,
} MokkaStatus;

/**
 * Outcome of proof validation. Mirrors the CLI's `verify` output.
 */
typedef enum MokkaValidation {
  MOKKA_VALIDATION_OK = 0,
  MOKKA_VALIDATION_EXPIRED = 1,
  MOKKA_VALIDATION_BAD_SIGNATURE = 2,
  MOKKA_VALIDATION_BAD_SECRET = 3,
  MOKKA_VALIDATION_UNKNOWN_VOTER = 4,
  MOKKA_VALIDATION_FUTURE_TIMESTAMP = 5,
} MokkaValidation;

/**
 * Public keys of a cluster and its quorum combos.
 */
typedef struct MokkaKeyring MokkaKeyring;

/**
 * Result of one simulation run.
 */
typedef struct MokkaReport MokkaReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into the library from this thread.
 */
const char *mokka_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mokka_version(void);

/**
 * Derives the deterministic keyring for `n` nodes from `seed`.
 *
 * # Safety
 * `seed` must be a NUL-terminated string and `out` writable.
 */
enum MokkaStatus mokka_keyring_generate(const char *seed, size_t n, struct MokkaKeyring **out);

/**
 * Loads a keyring from keyset TOML as written by `mokka keys`.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` writable.
 */
enum MokkaStatus mokka_keyring_from_toml(const char *toml, struct MokkaKeyring **out);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `keyring` must be null or a live handle.
 */
size_t mokka_keyring_nodes(const struct MokkaKeyring *keyring);

/**
 * Quorum size, or 0 for a null handle.
 *
 * # Safety
 * `keyring` must be null or a live handle.
 */
size_t mokka_keyring_quorum(const struct MokkaKeyring *keyring);

/**
 * # Safety
 * `keyring` must be null or a handle not yet freed.
 */
void mokka_keyring_free(struct MokkaKeyring *keyring);

/**
 * Decodes and validates an encoded proof at virtual time `now_ms`.
 * A rejected proof is not an error: the call returns `Ok` and writes the
 * verdict to `out`.
 *
 * # Safety
 * `proof` must point to `len` readable bytes, `keyring` must be live and
 * `out` writable.
 */
enum MokkaStatus mokka_proof_validate(const struct MokkaKeyring *keyring,
                                      const uint8_t *proof,
                                      size_t len,
                                      uint64_t now_ms,
                                      uint64_t ttl_ms,
                                      uint64_t max_clock_skew_ms,
                                      enum MokkaValidation *out);

/**
 * Simulates a scenario given as TOML text, or by the name of a bundled
 * scenario.
 *
 * # Safety
 * `scenario` must be a NUL-terminated string and `out` writable.
 */
enum MokkaStatus mokka_simulate(const char *scenario, struct MokkaReport **out);

/**
 * Invariant violations found in the run.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t mokka_report_violations(const struct MokkaReport *report);

/**
 * Number of terms that had a leader.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t mokka_report_leader_terms(const struct MokkaReport *report);

/**
 * Writes the leader every honest node followed at the end of the run.
 * Returns `OutOfRange` when the cluster ended without a single leader.
 *
 * # Safety
 * `report` must be a live handle and `out` writable.
 */
enum MokkaStatus mokka_report_final_leader(const struct MokkaReport *report, uint16_t *out);

/**
 * Tab-separated machine report, the same text as `mokka run --machine`.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
const char *mokka_report_machine(const struct MokkaReport *report);

/**
 * Full event trace, one event per line.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
const char *mokka_report_trace(const struct MokkaReport *report);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void mokka_report_free(struct MokkaReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOKKA_H */
