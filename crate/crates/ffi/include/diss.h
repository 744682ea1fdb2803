#ifndef DISS_H
#define DISS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DissStatus {
  DISS_STATUS_OK = 0,
  DISS_STATUS_NULL_POINTER = 1,
  DISS_STATUS_INVALID_UTF8 = 2,
  DISS_STATUS_INVALID_CONFIG = 3,
  DISS_STATUS_IO = 4,
  DISS_STATUS_INVALID_ARGUMENT = 5,
  DISS_STATUS_RUNTIME = 6,
  DISS_STATUS_PANIC = 7,
} DissStatus;

/**
 * Parsed experiment configuration.
 */
typedef struct DissConfig DissConfig;

/**
 * Curve table produced by [`diss_config_run`].
 */
typedef struct DissRun DissRun;

typedef struct DissCurvePoint {
  uint64_t seed;
  uint64_t queries;
  double mean_reward;
  double mean_nfeat;
} DissCurvePoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The
 * pointer stays valid until the next call into this library on the same
 * thread.
 */
const char *diss_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *diss_version(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void diss_string_free(char *s);

/**
 * Parses TOML text. Relative paths resolve against the working directory.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum DissStatus diss_config_from_toml(const char *toml, struct DissConfig **out);

/**
 * Reads and validates a config file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DissStatus diss_config_from_path(const char *path, struct DissConfig **out);

/**
 * # Safety
 * `cfg` must be a live handle from this library.
 */
enum DissStatus diss_config_validate(const struct DissConfig *cfg);

/**
 * Resolved config as TOML; free with [`diss_string_free`].
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum DissStatus diss_config_to_toml(const struct DissConfig *cfg, char **out);

/**
 * Overrides where [`diss_config_run`] writes its artifacts.
 *
 * # Safety
 * `cfg` must be a live handle; `dir` a NUL-terminated string.
 */
enum DissStatus diss_config_set_output_dir(struct DissConfig *cfg, const char *dir);

/**
 * Runs the experiment, writing artifacts to disk, and returns the curves.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum DissStatus diss_config_run(const struct DissConfig *cfg,
                                uint64_t seed_offset,
                                struct DissRun **out);

/**
 * # Safety
 * `cfg` must come from this library and not be freed twice.
 */
void diss_config_free(struct DissConfig *cfg);

/**
 * Number of curve rows, or 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
uintptr_t diss_run_len(const struct DissRun *run);

/**
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum DissStatus diss_run_point(const struct DissRun *run,
                               uintptr_t index,
                               struct DissCurvePoint *out);

/**
 * Strategy label of a row; owned by the run handle. Null when out of range.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
const char *diss_run_strategy(const struct DissRun *run, uintptr_t index);

/**
 * Directory the artifacts were written to; owned by the run handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
const char *diss_run_output_dir(const struct DissRun *run);

/**
 * # Safety
 * `run` must come from this library and not be freed twice.
 */
void diss_run_free(struct DissRun *run);

/**
 * Penalized log-likelihood reward of decision probability `eta` for label
 * `y` under a mask of `d` bytes (non-zero = shown).
 *
 * # Safety
 * `mask` must point to `d` readable bytes; `out` must be writable.
 */
enum DissStatus diss_compute_reward(uint8_t y,
                                    double eta,
                                    const uint8_t *mask,
                                    uintptr_t d,
                                    double lambda,
                                    double epsilon,
                                    double *out);

/**
 * p·r(1, η) + (1 − p)·r(0, η) for label probability `p`.
 *
 * # Safety
 * `mask` must point to `d` readable bytes; `out` must be writable.
 */
enum DissStatus diss_expected_reward(double p,
                                     double eta,
                                     const uint8_t *mask,
                                     uintptr_t d,
                                     double lambda,
                                     double epsilon,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DISS_H */
