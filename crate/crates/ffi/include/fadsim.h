#ifndef FADSIM_H
#define FADSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function. Stable across releases.
 */
typedef enum FadsStatus {
  FADS_STATUS_OK = 0,
  FADS_STATUS_NULL_POINTER = 1,
  FADS_STATUS_INVALID_PARAMETER = 2,
  FADS_STATUS_OUT_OF_RANGE = 3,
  FADS_STATUS_INTERNAL = 4,
} FadsStatus;

/**
 * Opaque model handle.
 */
typedef struct FadsModel FadsModel;

/**
 * Opaque trace handle.
 */
typedef struct FadsTrace FadsTrace;

typedef struct FadsConstants {
  double c_alpha;
  double c_u;
  double cap_k;
  uint64_t cap_k_floor;
  double fad_bound_m;
} FadsConstants;

/**
 * One period of a trace. Signs are `+1` / `-1`; region is
 * 0 = up cascade, 1 = down cascade, 2 = learning.
 */
typedef struct FadsStep {
  uint64_t t;
  int8_t theta;
  int8_t signal;
  int8_t action;
  uint8_t region;
  double l_pub;
  double l_post;
} FadsStep;

typedef struct FadsSummary {
  uint64_t action_changes;
  uint64_t state_changes;
  double q_a;
  double q_theta;
  bool fads_emerged;
  /**
   * Mean gap between sign switches of the public likelihood, NaN if none.
   */
  double mean_gap;
  uint64_t restricted_fad_count;
  uint64_t max_cascade_len;
} FadsSummary;

typedef struct FadsInterval {
  double low;
  double high;
  uint64_t depth;
  double mass_unresolved;
} FadsInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *fads_last_error(void);

/**
 * Static description of a status code.
 */
const char *fads_status_str(enum FadsStatus status);

/**
 * Creates a model for signal accuracy `alpha` and switching rate `epsilon`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle pointer.
 */
enum FadsStatus fads_model_new(double alpha, double epsilon, struct FadsModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`fads_model_new`] not yet freed.
 */
void fads_model_free(struct FadsModel *model);

/**
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum FadsStatus fads_model_constants(const struct FadsModel *model, struct FadsConstants *out);

/**
 * Public likelihood after an up action in the learning region.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum FadsStatus fads_f1(const struct FadsModel *model, double l, double *out);

/**
 * Public likelihood after a down action in the learning region.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum FadsStatus fads_f0(const struct FadsModel *model, double l, double *out);

/**
 * One period of deterministic decay inside a cascade.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum FadsStatus fads_cascade_decay(const struct FadsModel *model, double l, double *out);

/**
 * Probability of an up signal given public likelihood `l`.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum FadsStatus fads_signal_prob_up(const struct FadsModel *model, double l, double *out);

/**
 * Simulates `horizon` periods from `seed`.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum FadsStatus fads_simulate(const struct FadsModel *model,
                              uint64_t horizon,
                              uint64_t seed,
                              struct FadsTrace **out);

/**
 * # Safety
 * `trace` must be null or a handle from [`fads_simulate`] not yet freed.
 */
void fads_trace_free(struct FadsTrace *trace);

/**
 * Number of periods in the trace, 0 for a null handle.
 *
 * # Safety
 * `trace` must be null or a live handle.
 */
uint64_t fads_trace_len(const struct FadsTrace *trace);

/**
 * Copies period `index` (0-based) into `out`.
 *
 * # Safety
 * `trace` must be a live handle and `out` writable.
 */
enum FadsStatus fads_trace_step(const struct FadsTrace *trace,
                                uint64_t index,
                                struct FadsStep *out);

/**
 * Change frequencies and fad statistics for a trace.
 *
 * # Safety
 * `trace` must be a live handle and `out` writable.
 */
enum FadsStatus fads_trace_summary(const struct FadsTrace *trace, struct FadsSummary *out);

/**
 * Certified interval for the expected time until the public likelihood
 * changes sign, starting from `l0`. `depth == 0` selects the default depth.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum FadsStatus fads_expected_gap_interval(const struct FadsModel *model,
                                           double l0,
                                           uint64_t depth,
                                           struct FadsInterval *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* FADSIM_H */
