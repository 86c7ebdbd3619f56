#ifndef QWALK_H
#define QWALK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QwStatus {
  QW_STATUS_OK = 0,
  QW_STATUS_NULL_POINTER = 1,
  QW_STATUS_INVALID_ARGUMENT = 2,
  QW_STATUS_INVALID_SPEC = 3,
  QW_STATUS_SIMULATION = 4,
  QW_STATUS_INSUFFICIENT_DATA = 5,
  QW_STATUS_CONFIG = 6,
  QW_STATUS_BUFFER_TOO_SMALL = 7,
  QW_STATUS_INTERNAL = 8,
} QwStatus;

/**
 * Opaque parsed spec.
 */
typedef struct QwSpec QwSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Valid until the next call
 * into this library from the same thread.
 */
const char *qw_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qw_version(void);

/**
 * Parse a spec from NUL-terminated JSON into a new handle.
 *
 * # Safety
 * `json` must be a valid C string and `out` valid for writes.
 */
enum QwStatus qw_spec_from_json(const char *json, struct QwSpec **out);

/**
 * Release a handle from [`qw_spec_from_json`]. Null is ignored.
 *
 * # Safety
 * `spec` must be null or a handle not yet freed.
 */
void qw_spec_free(struct QwSpec *spec);

/**
 * Canonical JSON of a spec, to be released with [`qw_string_free`].
 *
 * # Safety
 * `spec` must be a live handle and `out` valid for writes.
 */
enum QwStatus qw_spec_canonical_json(const struct QwSpec *spec, char **out);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void qw_string_free(char *s);

/**
 * The sign `+1` or `-1` used by path `path_id` at grid step `step`.
 */
int8_t qw_sample_sign(uint64_t seed, uint64_t path_id, uint64_t step);

/**
 * Simulate one path into `out`, which must hold `n_q + 1` values.
 *
 * # Safety
 * `spec` must be a live handle and `out` valid for `out_len` writes.
 */
enum QwStatus qw_simulate_path(const struct QwSpec *spec,
                               uint64_t n_q,
                               uint64_t seed,
                               uint64_t path_id,
                               double *out,
                               size_t out_len);

/**
 * Sum of squared increments of `values[0..len]`.
 *
 * # Safety
 * `values` must be valid for `len` reads and `out` valid for a write.
 */
enum QwStatus qw_quadratic_variation(const double *values, size_t len, double *out);

/**
 * Heisenberg check of path `path_id` under the scale's default policy; JSON report in `out_json`.
 *
 * # Safety
 * `spec` must be a live handle and `out_json` valid for writes.
 */
enum QwStatus qw_heisenberg_check(const struct QwSpec *spec,
                                  uint64_t n_q,
                                  uint64_t seed,
                                  uint64_t path_id,
                                  char **out_json);

/**
 * Equiprobability test of `signs[0..n]`; JSON report in `out_json`.
 *
 * # Safety
 * `signs` must be valid for `n` reads and `out_json` valid for writes.
 */
enum QwStatus qw_equiprobability_test(const int8_t *signs,
                                      size_t n,
                                      double alpha,
                                      size_t max_lag,
                                      char **out_json);

/**
 * Coupled distance between two specs; JSON report in `out_json`.
 *
 * # Safety
 * Both handles must be live and `out_json` valid for writes.
 */
enum QwStatus qw_coupled_distance(const struct QwSpec *spec_a,
                                  const struct QwSpec *spec_b,
                                  uint64_t n_q,
                                  uint64_t seed,
                                  uint64_t n_paths,
                                  char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QWALK_H */
