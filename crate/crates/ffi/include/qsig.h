#ifndef QSIG_H
#define QSIG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum QsigStatus {
  QSIG_STATUS_OK = 0,
  QSIG_STATUS_NULL_POINTER = 1,
  QSIG_STATUS_INVALID_ARGUMENT = 2,
  QSIG_STATUS_DIMENSION_MISMATCH = 3,
  QSIG_STATUS_TOO_MANY_QUBITS = 4,
  QSIG_STATUS_INVALID_STATE = 5,
  QSIG_STATUS_PARSE = 6,
  QSIG_STATUS_INCONSISTENT = 7,
  QSIG_STATUS_PANIC = 8,
} QsigStatus;

/**
 * Which qubit of a pair a single-side attack touches.
 */
typedef enum QsigSide {
  QSIG_SIDE_Q = 0,
  QSIG_SIDE_S = 1,
} QsigSide;

/**
 * An eavesdropper model.
 */
typedef struct QsigAttack QsigAttack;

/**
 * A pass-probability report.
 */
typedef struct QsigReport QsigReport;

/**
 * A pure or mixed payload state.
 */
typedef struct QsigState QsigState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *qsig_version(void);

/**
 * Copies the last error message of this thread into `buf` (truncated and
 * NUL-terminated) and returns the full length including the terminator.
 * Pass a null `buf` to query the length.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t qsig_last_error(char *buf, size_t len);

/**
 * Pure state from `len` amplitudes (`len` a power of two, unit norm).
 *
 * # Safety
 * `re` and `im` must be valid for `len` reads; `out` must be writable.
 */
enum QsigStatus qsig_state_from_amplitudes(const double *re,
                                           const double *im,
                                           size_t len,
                                           struct QsigState **out);

/**
 * Computational basis state `|index>` on `n_qubits` qubits.
 *
 * # Safety
 * `out` must be writable.
 */
enum QsigStatus qsig_state_basis(size_t n_qubits, size_t index, struct QsigState **out);

/**
 * Haar-random pure state drawn from a ChaCha8 stream seeded with `seed`.
 *
 * # Safety
 * `out` must be writable.
 */
enum QsigStatus qsig_state_haar(size_t n_qubits, uint64_t seed, struct QsigState **out);

/**
 * Number of qubits, or 0 for a null handle.
 *
 * # Safety
 * `state` must be null or a live handle.
 */
size_t qsig_state_n_qubits(const struct QsigState *state);

/**
 * # Safety
 * `state` must be null or a handle not yet freed.
 */
void qsig_state_free(struct QsigState *state);

/**
 * Attack from its JSON description, e.g. `{"variant":"replace_random"}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum QsigStatus qsig_attack_from_json(const char *json, struct QsigAttack **out);

/**
 * Intercept/resend on one side of every pair. `measure` and `resend` are
 * unit Bloch vectors of three doubles.
 *
 * # Safety
 * `measure` and `resend` must be valid for 3 reads; `out` must be writable.
 */
enum QsigStatus qsig_attack_ir_single(enum QsigSide side,
                                      const double *measure,
                                      const double *resend,
                                      struct QsigAttack **out);

/**
 * Intercept/resend on both qubits of every pair. `vectors` holds the
 * measure vectors on Q and S followed by the resend vectors on Q and S,
 * twelve doubles in all.
 *
 * # Safety
 * `vectors` must be valid for 12 reads; `out` must be writable.
 */
enum QsigStatus qsig_attack_ir_pair(const double *vectors, struct QsigAttack **out);

/**
 * Replacement of every pair by fresh random qubits.
 *
 * # Safety
 * `out` must be writable.
 */
enum QsigStatus qsig_attack_replace_random(struct QsigAttack **out);

/**
 * Named probe-circuit topology, e.g. `"ancilla_swap_s"`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum QsigStatus qsig_attack_probe_preset(const char *name, struct QsigAttack **out);

/**
 * # Safety
 * `attack` must be null or a handle not yet freed.
 */
void qsig_attack_free(struct QsigAttack *attack);

/**
 * Exact pass probability of `attack` on `state`. With a null `sig_bits`
 * the value is averaged over all signatures; otherwise `sig_len` bits
 * (0 or 1) fix it.
 *
 * # Safety
 * Handles must be live; `sig_bits` must be null or valid for `sig_len`
 * reads; `out` must be writable.
 */
enum QsigStatus qsig_pb_exact(const struct QsigState *state,
                              const struct QsigAttack *attack,
                              const uint8_t *sig_bits,
                              size_t sig_len,
                              struct QsigReport **out);

/**
 * Monte Carlo pass probability over `trials` full protocol runs.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum QsigStatus qsig_mc_estimate(const struct QsigState *state,
                                 const struct QsigAttack *attack,
                                 uint64_t trials,
                                 uint64_t seed,
                                 struct QsigReport **out);

/**
 * # Safety
 * `report` must be live; `value` must be writable.
 */
enum QsigStatus qsig_report_exact(const struct QsigReport *report, double *value);

/**
 * Closed-form value; `present` is false when no closed form applies.
 *
 * # Safety
 * `report` must be live; `value` and `present` must be writable.
 */
enum QsigStatus qsig_report_closed_form(const struct QsigReport *report,
                                        double *value,
                                        bool *present);

/**
 * Sampled mean, standard error and trial count; `present` is false for
 * reports without a Monte Carlo estimate.
 *
 * # Safety
 * `report` must be live; all outputs must be writable.
 */
enum QsigStatus qsig_report_mc(const struct QsigReport *report,
                               double *mean,
                               double *std_error,
                               uint64_t *trials,
                               bool *present);

/**
 * Report as a JSON string, released with [`qsig_string_free`].
 *
 * # Safety
 * `report` must be live; `out` must be writable.
 */
enum QsigStatus qsig_report_to_json(const struct QsigReport *report, char **out);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void qsig_report_free(struct QsigReport *report);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void qsig_string_free(char *s);

/**
 * Honest protocol run on `state`. Writes whether Bob accepted and the
 * fidelity of his output (0 when aborted).
 *
 * # Safety
 * `state` must be live; `delivered` and `fidelity` must be writable.
 */
enum QsigStatus qsig_roundtrip(const struct QsigState *state,
                               uint64_t seed,
                               bool *delivered,
                               double *fidelity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QSIG_H */
