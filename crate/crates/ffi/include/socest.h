/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef SOCEST_H
#define SOCEST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SocestStatus {
  SOCEST_STATUS_OK = 0,
  SOCEST_STATUS_NULL_POINTER = 1,
  SOCEST_STATUS_INVALID_UTF8 = 2,
  /**
   * Unknown key, bad value or unreadable config file.
   */
  SOCEST_STATUS_CONFIG = 3,
  SOCEST_STATUS_INVALID_ARGUMENT = 4,
  /**
   * The estimator could not be built from the configuration.
   */
  SOCEST_STATUS_ESTIMATOR = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  SOCEST_STATUS_PANIC = 6,
} SocestStatus;

typedef enum SocestFilterKind {
  SOCEST_FILTER_KIND_EKF = 0,
  SOCEST_FILTER_KIND_HIEKF = 1,
  SOCEST_FILTER_KIND_AHIEKF = 2,
  SOCEST_FILTER_KIND_IAHIEKF = 3,
} SocestFilterKind;

/**
 * Opaque configuration handle.
 */
typedef struct SocestConfig SocestConfig;

/**
 * Opaque joint estimator handle: one filter plus its parameter identifier.
 */
typedef struct SocestEstimator SocestEstimator;

/**
 * Output of one estimator step.
 */
typedef struct SocestStepResult {
  double soc;
  double up_v;
  /**
   * Measured minus predicted terminal voltage; NaN when the measurement
   * update failed and the filter only propagated.
   */
  double residual_v;
  /**
   * Parameters used at this step.
   */
  double r0_ohm;
  double rp_ohm;
  double cp_f;
  double rx;
  double qx_trace;
  /**
   * Non-zero when the adaptive rule produced a non-positive Rx this step.
   */
  uint8_t negative_rx;
} SocestStepResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next `socest_*` call on the same thread.
 */
const char *socest_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *socest_version(void);

/**
 * Configuration holding every default. Never returns NULL.
 */
struct SocestConfig *socest_config_new(void);

/**
 * Loads a TOML configuration file into a new handle.
 *
 * # Safety
 * `path` must be NULL or a NUL-terminated string; `out` must be NULL or
 * point to writable storage for a handle pointer.
 */
enum SocestStatus socest_config_from_file(const char *path, struct SocestConfig **out);

/**
 * Sets one dotted configuration key, e.g. `("filter.gamma", "0.01")` or
 * `("ocv.coeffs", "[0, 0, 0, 0, 0, 0, 3.7]")`. The value uses TOML syntax;
 * bare words are taken as strings. On error the handle is unchanged.
 *
 * # Safety
 * `config` must be NULL or a live handle; `key` and `value` must be NULL or
 * NUL-terminated strings.
 */
enum SocestStatus socest_config_set(struct SocestConfig *config,
                                    const char *key,
                                    const char *value);

/**
 * # Safety
 * `config` must be NULL or a handle from this library not yet freed.
 */
void socest_config_free(struct SocestConfig *config);

/**
 * Builds a joint estimator of `kind` from `config`. The configuration is
 * copied; the handle may be freed afterwards.
 *
 * # Safety
 * `config` must be NULL or a live handle; `out` must be NULL or writable.
 */
enum SocestStatus socest_estimator_new(const struct SocestConfig *config,
                                       enum SocestFilterKind kind,
                                       struct SocestEstimator **out);

/**
 * Feeds one sample (current discharge-positive, in amperes; terminal
 * voltage in volts) and writes the new estimate to `out`.
 *
 * # Safety
 * `estimator` must be NULL or a live handle; `out` must be NULL or writable.
 */
enum SocestStatus socest_estimator_step(struct SocestEstimator *estimator,
                                        double current_a,
                                        double voltage_v,
                                        struct SocestStepResult *out);

/**
 * Number of steps at which the adaptive rule produced a non-positive Rx.
 *
 * # Safety
 * `estimator` must be NULL or a live handle.
 */
uint64_t socest_estimator_negative_rx_count(const struct SocestEstimator *estimator);

/**
 * # Safety
 * `estimator` must be NULL or a handle from this library not yet freed.
 */
void socest_estimator_free(struct SocestEstimator *estimator);

/**
 * Evaluates the configured OCV curve (the default curve when `config` is
 * NULL) at `soc`, clamped to `[0, 1]`.
 *
 * # Safety
 * `config` must be NULL or a live handle; `out` must be NULL or writable.
 */
enum SocestStatus socest_ocv_eval(const struct SocestConfig *config, double soc, double *out);

/**
 * `100 * sqrt(mean((est - reference)^2))` over `len` values.
 *
 * # Safety
 * `est` and `reference` must point to `len` readable doubles; `out` must be
 * writable.
 */
enum SocestStatus socest_rmse_pct(const double *est,
                                  const double *reference,
                                  size_t len,
                                  double *out);

/**
 * `100 * mean(|est - reference|)` over `len` values.
 *
 * # Safety
 * As for [`socest_rmse_pct`].
 */
enum SocestStatus socest_mae_pct(const double *est,
                                 const double *reference,
                                 size_t len,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOCEST_H */
