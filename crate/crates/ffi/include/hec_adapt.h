#ifndef HEC_ADAPT_H
#define HEC_ADAPT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum HecStatus {
  HEC_STATUS_OK = 0,
  HEC_STATUS_NULL_POINTER = 1,
  HEC_STATUS_INVALID_ARGUMENT = 2,
  HEC_STATUS_DIMENSION_MISMATCH = 3,
  HEC_STATUS_IO = 4,
  HEC_STATUS_FORMAT = 5,
  HEC_STATUS_MISSING_ARTIFACT = 6,
  HEC_STATUS_DEGENERATE = 7,
  HEC_STATUS_PANIC = 8,
} HecStatus;

/**
 * Trained autoencoder with its error model.
 */
typedef struct HecDetector HecDetector;

/**
 * Trained tier-selection policy.
 */
typedef struct HecPolicy HecPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string. Do not free.
 */
const char *hec_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `len > 0`). Returns the full message length
 * excluding the NUL, or 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t hec_last_error_message(char *buf, size_t len);

/**
 * Loads a detector bundle directory written by `hec-adapt train-detectors`.
 *
 * # Safety
 * `dir` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HecStatus hec_detector_load(const char *dir, struct HecDetector **out);

/**
 * Releases a detector. Null is ignored.
 *
 * # Safety
 * `detector` must come from [`hec_detector_load`] and not be used afterwards.
 */
void hec_detector_free(struct HecDetector *detector);

/**
 * Number of trainable parameters, or 0 for a null handle.
 *
 * # Safety
 * `detector` must be null or a live handle.
 */
size_t hec_detector_param_count(const struct HecDetector *detector);

/**
 * Inference FLOP used by the delay model, or 0 for a null handle.
 *
 * # Safety
 * `detector` must be null or a live handle.
 */
size_t hec_detector_flop(const struct HecDetector *detector);

/**
 * Reconstructs one standardized week window (`len` must be 672) into `out`.
 *
 * # Safety
 * `window` must hold `len` doubles and `out` must hold `out_len` doubles.
 */
enum HecStatus hec_detector_reconstruct(const struct HecDetector *detector,
                                        const double *window,
                                        size_t len,
                                        double *out,
                                        size_t out_len);

/**
 * Classifies the seven days of a standardized week window.
 *
 * `anomalous` and `min_logpd` receive seven entries each (either may be
 * null). `confident` (nullable) is set to 1 when every flagged day clears
 * the confidence bar for `factor`, which must be at least 1.
 *
 * # Safety
 * `window` must hold `len` doubles; non-null outputs must hold seven
 * entries (one for `confident`).
 */
enum HecStatus hec_detector_classify(const struct HecDetector *detector,
                                     const double *window,
                                     size_t len,
                                     double factor,
                                     uint8_t *anomalous,
                                     double *min_logpd,
                                     uint8_t *confident);

/**
 * Loads a policy directory written by `hec-adapt train-policy`.
 *
 * # Safety
 * `dir` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HecStatus hec_policy_load(const char *dir, struct HecPolicy **out);

/**
 * Releases a policy. Null is ignored.
 *
 * # Safety
 * `policy` must come from [`hec_policy_load`] and not be used afterwards.
 */
void hec_policy_free(struct HecPolicy *policy);

/**
 * Number of arms (tiers), or 0 for a null handle.
 *
 * # Safety
 * `policy` must be null or a live handle.
 */
size_t hec_policy_arms(const struct HecPolicy *policy);

/**
 * Softmax likelihood of each tier for a 28-value context.
 *
 * # Safety
 * `state` must hold `len` doubles and `out` must hold `out_len` doubles.
 */
enum HecStatus hec_policy_likelihoods(const struct HecPolicy *policy,
                                      const double *state,
                                      size_t len,
                                      double *out,
                                      size_t out_len);

/**
 * Greedy tier choice, written as a one-based tier number.
 *
 * # Safety
 * `state` must hold `len` doubles and `tier` must be a valid pointer.
 */
enum HecStatus hec_policy_select_tier(const struct HecPolicy *policy,
                                      const double *state,
                                      size_t len,
                                      uint32_t *tier);

/**
 * Per-day (min, max, mean, std) context of a week window, day-major.
 *
 * # Safety
 * `window` must hold `len` doubles and `out` must hold `out_len` doubles.
 */
enum HecStatus hec_extract_state(const double *window, size_t len, double *out, size_t out_len);

/**
 * Delay penalty `alpha * t / (1 + alpha * t)` for a delay in milliseconds.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HecStatus hec_f_cost(double t_ms, double alpha, double *out);

/**
 * Accuracy minus the delay penalty.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HecStatus hec_reward(double accuracy, double t_ms, double alpha, double *out);

/**
 * Latency plus compute delay of a `model_flop` model on a tier.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HecStatus hec_t_total_ms(double model_flop, double tier_flops, double latency_ms, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HEC_ADAPT_H */
