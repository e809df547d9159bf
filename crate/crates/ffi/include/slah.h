#ifndef SLAH_H
#define SLAH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum SlahStatus {
  SLAH_STATUS_OK = 0,
  SLAH_STATUS_NULL_POINTER = 1,
  SLAH_STATUS_INVALID_ARGUMENT = 2,
  SLAH_STATUS_CONFIG = 3,
  SLAH_STATUS_SIMULATION = 4,
  SLAH_STATUS_FIT = 5,
  SLAH_STATUS_HEALING = 6,
  SLAH_STATUS_PANIC = 7,
} SlahStatus;

// Fitted logistic KPI model.
typedef struct SlahModel SlahModel;

// Simulator bound to a network layout and traffic model.
typedef struct SlahSimulator SlahSimulator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len - 1` bytes). Returns the full message length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t slah_last_error(char *buf, size_t len);

// Creates a simulator from a TOML experiment configuration. A null
// `config_toml` selects the defaults.
//
// # Safety
// `config_toml` must be null or a NUL-terminated string; `out` must be a
// valid pointer.
enum SlahStatus slah_simulator_new(const char *config_toml, struct SlahSimulator **out);

// # Safety
// `sim` must be null or a handle from [`slah_simulator_new`] not yet freed.
void slah_simulator_free(struct SlahSimulator *sim);

// Number of eNBs, or 0 for a null handle.
//
// # Safety
// `sim` must be null or a live handle.
size_t slah_simulator_num_enbs(const struct SlahSimulator *sim);

// Runs one episode with per-eNB `alphas` (length `n`, the eNB count) and
// writes per-eNB BCR (percent) and FTT (seconds) into `bcr` and `ftt`,
// each of length `n`.
//
// # Safety
// `sim` must be a live handle; array pointers must be valid for `n` elements.
enum SlahStatus slah_simulator_run_episode(const struct SlahSimulator *sim,
                                           const double *alphas,
                                           size_t n,
                                           uint64_t duration,
                                           uint64_t warmup,
                                           uint64_t seed,
                                           double *bcr,
                                           double *ftt);

// Runs one episode and writes the row-major `n x n` interference matrix
// into `matrix`.
//
// # Safety
// `sim` must be a live handle; `alphas` valid for `n` and `matrix` for
// `n * n` elements.
enum SlahStatus slah_simulator_interference_matrix(const struct SlahSimulator *sim,
                                                   const double *alphas,
                                                   size_t n,
                                                   uint64_t duration,
                                                   uint64_t warmup,
                                                   uint64_t seed,
                                                   double *matrix);

// Fits a logistic model to `n` samples `(xs[i], ys[i])`. `refine_bounds`
// of zero keeps the fixed 10% margin bounds.
//
// # Safety
// `xs` and `ys` must be valid for `n` elements; `out` must be valid.
enum SlahStatus slah_fit(const double *xs,
                         const double *ys,
                         size_t n,
                         int32_t refine_bounds,
                         struct SlahModel **out);

// # Safety
// `model` must be null or a handle from [`slah_fit`] not yet freed.
void slah_model_free(struct SlahModel *model);

// Model prediction at `x`; NaN for a null handle.
//
// # Safety
// `model` must be null or a live handle.
double slah_model_predict(const struct SlahModel *model, double x);

// Writes the model parameters. Any output pointer may be null.
//
// # Safety
// `model` must be a live handle; non-null outputs must be valid.
enum SlahStatus slah_model_params(const struct SlahModel *model,
                                  double *beta0,
                                  double *beta1,
                                  double *y_lo,
                                  double *y_hi);

// Cost weights `I_j / sum(I)` of an interference row of length `n`.
//
// # Safety
// `interference` and `out` must be valid for `n` elements.
enum SlahStatus slah_weights(const double *interference, size_t n, double *out);

// Neighbour alphas implied by `alpha_s` on the neighbour at index `s` of
// the interference row.
//
// # Safety
// `interference` and `out` must be valid for `n` elements.
enum SlahStatus slah_propagate_alpha(double alpha_s,
                                     const double *interference,
                                     size_t n,
                                     size_t s,
                                     double *out);

// Runs the healing loop against the synthetic oracle described by the
// `[oracle]` and `[slah]` sections of `config_toml` (null for defaults).
// Writes the converged alpha, the true grid optimum and the number of
// iterations.
//
// # Safety
// `config_toml` must be null or NUL-terminated; non-null outputs must be valid.
enum SlahStatus slah_oracle_heal(const char *config_toml,
                                 uint64_t seed,
                                 double *alpha_s,
                                 double *optimum,
                                 size_t *iterations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLAH_H */
