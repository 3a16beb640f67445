#ifndef BELLSIM_H
#define BELLSIM_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BellsimStatus {
  BELLSIM_STATUS_OK = 0,
  BELLSIM_STATUS_NULL_POINTER = 1,
  BELLSIM_STATUS_INVALID_ARGUMENT = 2,
  // A conditional correlation is undefined because a pair never coincided.
  BELLSIM_STATUS_NO_COINCIDENCE = 3,
  // The operation needs a piecewise-constant model.
  BELLSIM_STATUS_NOT_PIECEWISE = 4,
  // A property suite found a counterexample.
  BELLSIM_STATUS_CHECK_FAILED = 5,
  BELLSIM_STATUS_PANIC = 6,
} BellsimStatus;

typedef enum BellsimModelKind {
  BELLSIM_MODEL_KIND_OCTANT = 0,
  BELLSIM_MODEL_KIND_CLASSIC = 1,
  BELLSIM_MODEL_KIND_QM = 2,
} BellsimModelKind;

typedef enum BellsimSuite {
  BELLSIM_SUITE_THEOREM2 = 0,
  BELLSIM_SUITE_PROOF_CHAIN = 1,
  BELLSIM_SUITE_DELTA_GAMMA = 2,
  BELLSIM_SUITE_SATURATION = 3,
} BellsimSuite;

// Opaque Monte Carlo result.
typedef struct BellsimChshResult BellsimChshResult;

// Opaque experiment configuration.
typedef struct BellsimExperiment BellsimExperiment;

// Exact statistics for one setting pair.
typedef struct BellsimPairStatistics {
  double p_coincidence;
  double p_equal_and_coincident;
  double p_unequal_and_coincident;
  // Meaningful only when `has_correlation` is true.
  double conditional_correlation;
  bool has_correlation;
} BellsimPairStatistics;

typedef struct BellsimBounds {
  double delta_lb;
  double s_bound;
} BellsimBounds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Description of the last error on this thread; empty if none. Do not free.
const char *bellsim_last_error(void);

// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void bellsim_string_free(char *s);

// Build an experiment from explicit parameters. `l` is ignored unless `model`
// is `BELLSIM_MODEL_KIND_OCTANT`. Angles are radians.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum BellsimStatus bellsim_experiment_new(enum BellsimModelKind model,
                                          double l,
                                          double a,
                                          double b,
                                          double c,
                                          double d,
                                          double delta_t,
                                          uint64_t trials_per_pair,
                                          uint64_t seed,
                                          uint64_t stream,
                                          struct BellsimExperiment **out);

// Build an experiment from the JSON configuration format used by the CLI.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum BellsimStatus bellsim_experiment_from_json(const char *json, struct BellsimExperiment **out);

// Canonical JSON form of the configuration; free with `bellsim_string_free`.
// Returns null if `experiment` is null.
//
// # Safety
// `experiment` must be null or a live handle.
char *bellsim_experiment_to_json(const struct BellsimExperiment *experiment);

// # Safety
// `experiment` must be null or a handle not yet freed.
void bellsim_experiment_free(struct BellsimExperiment *experiment);

// Monte Carlo run over the four setting pairs. `lanes` = 0 uses the
// environment default (`BELLSIM_THREADS`). Results do not depend on `lanes`.
//
// # Safety
// `experiment` must be a live handle and `out` writable.
enum BellsimStatus bellsim_experiment_run(const struct BellsimExperiment *experiment,
                                          uint32_t lanes,
                                          struct BellsimChshResult **out);

// # Safety
// `result` must be null or a handle not yet freed.
void bellsim_chsh_result_free(struct BellsimChshResult *result);

// # Safety
// `result` must be a live handle and `out` writable.
enum BellsimStatus bellsim_chsh_s_value(const struct BellsimChshResult *result, double *out);

// # Safety
// `result` must be a live handle and `out` writable.
enum BellsimStatus bellsim_chsh_s_std_error(const struct BellsimChshResult *result, double *out);

// # Safety
// `result` must be a live handle and `out` writable.
enum BellsimStatus bellsim_chsh_gamma_min(const struct BellsimChshResult *result, double *out);

// Conditional correlation of pair 0..3 (AC', AD', BC', BD').
//
// # Safety
// `result` must be a live handle and `out` writable.
enum BellsimStatus bellsim_chsh_pair_correlation(const struct BellsimChshResult *result,
                                                 uint32_t pair,
                                                 double *out);

// Observed coincidence fraction of pair 0..3.
//
// # Safety
// `result` must be a live handle and `out` writable.
enum BellsimStatus bellsim_chsh_pair_gamma(const struct BellsimChshResult *result,
                                           uint32_t pair,
                                           double *out);

// Full JSON run report (same schema as `bellsim simulate`). With `canonical`
// the timestamp is omitted. Free with `bellsim_string_free`; null on error.
//
// # Safety
// Both handles must be live.
char *bellsim_chsh_report_json(const struct BellsimExperiment *experiment,
                               const struct BellsimChshResult *result,
                               bool canonical);

// Exact statistics of pair 0..3 for a piecewise-constant model.
//
// # Safety
// `experiment` must be a live handle and `out` writable.
enum BellsimStatus bellsim_exact_pair(const struct BellsimExperiment *experiment,
                                      uint32_t pair,
                                      struct BellsimPairStatistics *out);

// Exact S, γ and δ over the four pairs. Any output pointer may be null.
//
// # Safety
// `experiment` must be a live handle; non-null outputs must be writable.
enum BellsimStatus bellsim_exact_chsh(const struct BellsimExperiment *experiment,
                                      double *s_value,
                                      double *gamma,
                                      double *delta);

// `delta_lb = max(0, 4 − 3/γ)` and `s_bound = 6/γ − 4` for γ in (0, 1].
//
// # Safety
// `out` must be writable.
enum BellsimStatus bellsim_bounds(double gamma, struct BellsimBounds *out);

// Coincidence probability threshold `3 − 3/√2`.
double bellsim_critical_gamma(void);

// Detector-efficiency threshold `1/√2`, for comparison.
double bellsim_efficiency_reference(void);

// Run a property suite over `models` random finite models. Returns
// `BELLSIM_STATUS_CHECK_FAILED` if any model failed. Output pointers may be null.
//
// # Safety
// Non-null outputs must be writable.
enum BellsimStatus bellsim_verify(enum BellsimSuite suite,
                                  uint64_t models,
                                  uint64_t seed,
                                  uint64_t *passed,
                                  uint64_t *failed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BELLSIM_H */
