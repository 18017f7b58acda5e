#ifndef INVMEAN_H
#define INVMEAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>

typedef enum ImIterationStatus {
  IM_ITERATION_STATUS_CONVERGED = 0,
  IM_ITERATION_STATUS_MAX_ITERATIONS = 1,
  IM_ITERATION_STATUS_STALLED = 2,
} ImIterationStatus;

typedef enum ImStatus {
  IM_STATUS_OK = 0,
  IM_STATUS_NULL_POINTER = 1,
  IM_STATUS_INVALID_ARGUMENT = 2,
  IM_STATUS_PARSE_ERROR = 3,
  IM_STATUS_INVALID_MEASURE = 4,
  IM_STATUS_INVALID_GENERATOR = 5,
  IM_STATUS_INVALID_FAMILY = 6,
  IM_STATUS_DOMAIN_ERROR = 7,
  IM_STATUS_CONVERGENCE_FAILURE = 8,
  IM_STATUS_NUMERICAL_ERROR = 9,
  IM_STATUS_PANIC = 10,
} ImStatus;

// Opaque admissible family.
typedef struct ImFamily ImFamily;

// Opaque generator bound to its domain.
typedef struct ImGenerator ImGenerator;

// Opaque probability measure.
typedef struct ImMeasure ImMeasure;

typedef struct ImInvariantResult {
  double lower;
  double upper;
  double k_value;
  double gap;
  size_t iterations;
  enum ImIterationStatus status;
} ImInvariantResult;

// Message describing the last failed call on this thread, or null. The
// string stays valid until the next call into this library on the thread.
const char *im_last_error(void);

// Builds a measure from `len` atoms; duplicates are merged and weights
// renormalized.
//
// # Safety
// `points` and `weights` must point to `len` readable doubles.
enum ImStatus im_measure_new(const double *points,
                             const double *weights,
                             size_t len,
                             double lo,
                             double hi,
                             struct ImMeasure **out_measure);

// Parses `{"domain":[lo,hi],"atoms":[[x,w],...]}` strictly.
//
// # Safety
// `json` must be a nul-terminated string.
enum ImStatus im_measure_from_json(const char *json, struct ImMeasure **out_measure);

// # Safety
// `m` must come from this library and not be used afterwards.
void im_measure_free(struct ImMeasure *m);

// # Safety
// `m` must be a live measure handle.
enum ImStatus im_measure_len(const struct ImMeasure *m, size_t *out_len);

// Atom `index` in ascending order.
//
// # Safety
// `m` must be a live measure handle.
enum ImStatus im_measure_atom(const struct ImMeasure *m,
                              size_t index,
                              double *out_point,
                              double *out_weight);

// Support hull `[min supp, max supp]`.
//
// # Safety
// `m` must be a live measure handle.
enum ImStatus im_measure_gamma(const struct ImMeasure *m, double *out_lo, double *out_hi);

// # Safety
// `m` must be a live measure handle.
enum ImStatus im_measure_mean_variance(const struct ImMeasure *m,
                                       double *out_mean,
                                       double *out_variance);

// Parses a generator spec such as `{"kind":"power","p":0.5}` on `[lo, hi]`.
//
// # Safety
// `json` must be a nul-terminated string.
enum ImStatus im_generator_from_json(const char *json,
                                     double lo,
                                     double hi,
                                     struct ImGenerator **out_generator);

// # Safety
// `g` must come from this library and not be used afterwards.
void im_generator_free(struct ImGenerator *g);

// # Safety
// `g` must be a live generator handle.
enum ImStatus im_generator_eval(const struct ImGenerator *g, double t, double *out_value);

// # Safety
// `g` must be a live generator handle.
enum ImStatus im_generator_invert(const struct ImGenerator *g, double y, double *out_value);

// `f⁻¹(∫ f dP)`.
//
// # Safety
// `g` and `m` must be live handles.
enum ImStatus im_qa_mean(const struct ImGenerator *g, const struct ImMeasure *m, double *out_value);

// Power mean of exponent `p` (`p = 0` is the geometric mean).
//
// # Safety
// `m` must be a live measure handle.
enum ImStatus im_power_mean(double p, const struct ImMeasure *m, double *out_value);

// Parses a family spec `{"domain":[lo,hi],"pieces":[...]}`.
//
// # Safety
// `json` must be a nul-terminated string.
enum ImStatus im_family_from_json(const char *json, struct ImFamily **out_family);

// # Safety
// `f` must come from this library and not be used afterwards.
void im_family_free(struct ImFamily *f);

// One application of the family operator with `nodes` quadrature nodes; the
// result is a new measure owned by the caller.
//
// # Safety
// `f` and `m` must be live handles.
enum ImStatus im_family_apply(const struct ImFamily *f,
                              const struct ImMeasure *m,
                              size_t nodes,
                              struct ImMeasure **out_measure);

// Iterates the family until the support hull is narrower than `tol`.
// `tol <= 0` selects `1e-12·|I|`; `max_iter = 0` selects 10000.
//
// # Safety
// `f` and `m` must be live handles.
enum ImStatus im_compute_invariant(const struct ImFamily *f,
                                   const struct ImMeasure *m,
                                   size_t nodes,
                                   double tol,
                                   size_t max_iter,
                                   struct ImInvariantResult *out_result);

// Lower estimate of the separation `d_{f,g}(t)`.
//
// # Safety
// `f` and `g` must be live handles.
enum ImStatus im_separation(const struct ImGenerator *f,
                            const struct ImGenerator *g,
                            double t,
                            size_t grid,
                            double *out_value);

// Maximum separation over all pairs of `len` generators.
//
// # Safety
// `generators` must point to `len` live generator handles.
enum ImStatus im_contraction_bound(const struct ImGenerator *const *generators,
                                   size_t len,
                                   double t,
                                   size_t grid,
                                   double *out_value);

#endif  /* INVMEAN_H */
