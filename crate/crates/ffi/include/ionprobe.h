#ifndef IONPROBE_H
#define IONPROBE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IonprobeStatus {
  IONPROBE_STATUS_OK = 0,
  IONPROBE_STATUS_NULL_POINTER = 1,
  IONPROBE_STATUS_DOMAIN = 2,
  IONPROBE_STATUS_SINGULAR = 3,
  IONPROBE_STATUS_ILL_CONDITIONED = 4,
  IONPROBE_STATUS_PRECISION = 5,
  IONPROBE_STATUS_UNDEFINED = 6,
  IONPROBE_STATUS_INCONSISTENT = 7,
  IONPROBE_STATUS_RESOURCE = 8,
  IONPROBE_STATUS_PARSE = 9,
  IONPROBE_STATUS_IO = 10,
  IONPROBE_STATUS_BUFFER_TOO_SMALL = 11,
  IONPROBE_STATUS_PANIC = 12,
} IonprobeStatus;

typedef enum IonprobeCoupling {
  IONPROBE_COUPLING_F0 = 0,
  IONPROBE_COUPLING_F1 = 1,
} IonprobeCoupling;

typedef enum IonprobeTwoEtaModel {
  IONPROBE_TWO_ETA_MODEL_BARE = 0,
  IONPROBE_TWO_ETA_MODEL_DEBYE_WALLER = 1,
} IonprobeTwoEtaModel;

/**
 * Solved laser-weight engineering problem.
 */
typedef struct IonprobeEngineering IonprobeEngineering;

/**
 * Motional density matrix.
 */
typedef struct IonprobeMotionalState IonprobeMotionalState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ionprobe_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ionprobe_version(void);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum IonprobeStatus ionprobe_state_fock(size_t n, size_t dim, struct IonprobeMotionalState **out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum IonprobeStatus ionprobe_state_coherent(double re,
                                            double im,
                                            size_t dim,
                                            struct IonprobeMotionalState **out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum IonprobeStatus ionprobe_state_thermal(double nbar,
                                           size_t dim,
                                           struct IonprobeMotionalState **out);

/**
 * Density matrix from row-major real and imaginary parts, `dim*dim` each.
 *
 * # Safety
 * `re` and `im` must point to `dim*dim` values; `out` must be valid for writes.
 */
enum IonprobeStatus ionprobe_state_from_matrix(const double *re,
                                               const double *im,
                                               size_t dim,
                                               struct IonprobeMotionalState **out);

/**
 * # Safety
 * `state` must come from an `ionprobe_state_*` constructor (or be null)
 * and must not be used afterwards.
 */
void ionprobe_state_free(struct IonprobeMotionalState *state);

/**
 * Fock dimension of a state, or 0 for null.
 *
 * # Safety
 * `state` must be a live handle or null.
 */
size_t ionprobe_state_dim(const struct IonprobeMotionalState *state);

/**
 * Diagonal populations into `out` (length at least the dimension).
 *
 * # Safety
 * `state` must be a live handle; `out` must hold `len` values.
 */
enum IonprobeStatus ionprobe_state_populations(const struct IonprobeMotionalState *state,
                                               double *out,
                                               size_t len);

/**
 * `⟨n̂ᵖ⟩`.
 *
 * # Safety
 * `state` must be a live handle; `out` must be valid for writes.
 */
enum IonprobeStatus ionprobe_number_moment(const struct IonprobeMotionalState *state,
                                           uint32_t p,
                                           double *out);

/**
 * Population in the top `k_tail` Fock levels.
 *
 * # Safety
 * `state` must be a live handle; `out` must be valid for writes.
 */
enum IonprobeStatus ionprobe_leakage(const struct IonprobeMotionalState *state,
                                     size_t k_tail,
                                     double *out);

/**
 * `f₀(n;η)` or `f₁(n;η)` for `n < dim` by the stable recurrence.
 *
 * # Safety
 * `out` must hold `len` values.
 */
enum IonprobeStatus ionprobe_coupling_diag(enum IonprobeCoupling kind,
                                           double eta,
                                           size_t dim,
                                           double *out,
                                           size_t len);

/**
 * Independent Laguerre evaluation of the same diagonal.
 *
 * # Safety
 * `out` must hold `len` values.
 */
enum IonprobeStatus ionprobe_laguerre_oracle(enum IonprobeCoupling kind,
                                             double eta,
                                             size_t dim,
                                             double *out,
                                             size_t len);

/**
 * Coefficient `a_p^m` of the falling-factorial expansion. Values beyond
 * `u64` report a precision error.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum IonprobeStatus ionprobe_a_pm(uint32_t p, uint32_t m, uint64_t *out);

/**
 * Taylor coefficients `c_0 … c_{p_max}` of `Σ_j w_j f₀(n;η_j)` in powers of `n`.
 *
 * # Safety
 * `weights` and `etas` must hold `n_lasers` values; `out` must hold `len`.
 */
enum IonprobeStatus ionprobe_taylor_coeffs(const double *weights,
                                           const double *etas,
                                           size_t n_lasers,
                                           size_t p_max,
                                           size_t m_max,
                                           double *out,
                                           size_t len);

/**
 * Solves for laser weights whose coupling has Taylor coefficients `target`.
 *
 * # Safety
 * `etas` and `target` must hold `n_lasers` values; `out` must be valid for writes.
 */
enum IonprobeStatus ionprobe_engineer(enum IonprobeCoupling kind,
                                      const double *etas,
                                      const double *target,
                                      size_t n_lasers,
                                      struct IonprobeEngineering **out);

/**
 * # Safety
 * `sol` must come from [`ionprobe_engineer`] (or be null) and must not be used afterwards.
 */
void ionprobe_engineering_free(struct IonprobeEngineering *sol);

/**
 * Normalized weights `Ω_j/Ω_L` (largest magnitude 1), the scale that
 * converts a measured slope back to the target, and the condition number.
 *
 * # Safety
 * `sol` must be a live handle; `ratios` must hold `len` values; the other
 * outputs must be valid for writes.
 */
enum IonprobeStatus ionprobe_engineering_result(const struct IonprobeEngineering *sol,
                                                double *ratios,
                                                size_t len,
                                                double *scale,
                                                double *condition_number);

/**
 * Exact carrier slope `∓sinφ⟨F₀⟩` for probe sign `sign` (+1 or −1).
 *
 * # Safety
 * `state` must be a live handle; `weights`/`etas` must hold `n_lasers`
 * values; `out` must be valid for writes.
 */
enum IonprobeStatus ionprobe_carrier_slope(const struct IonprobeMotionalState *state,
                                           int32_t sign,
                                           double phi,
                                           const double *weights,
                                           const double *etas,
                                           size_t n_lasers,
                                           double *out);

/**
 * Carrier slope estimated from simulated populations on the default grid.
 * `shots == 0` uses the exact commutator slope; otherwise each grid point
 * is sampled with that many shots from a generator keyed by `seed`.
 *
 * # Safety
 * As [`ionprobe_carrier_slope`]; `stderr` must be valid for writes.
 */
enum IonprobeStatus ionprobe_estimate_carrier_slope(const struct IonprobeMotionalState *state,
                                                    int32_t sign,
                                                    double phi,
                                                    const double *weights,
                                                    const double *etas,
                                                    size_t n_lasers,
                                                    uint64_t shots,
                                                    uint64_t seed,
                                                    double *value,
                                                    double *stderr);

/**
 * `(⟨n̂⟩, ⟨n̂²⟩)` from two `⟨f₀⟩` observations. `out` receives
 * `[n1, n1_stderr, n2, n2_stderr]`.
 *
 * # Safety
 * `out` must hold 4 values.
 */
enum IonprobeStatus ionprobe_moments_two_eta(double eta1,
                                             double f1,
                                             double f1_stderr,
                                             double eta2,
                                             double f2,
                                             double f2_stderr,
                                             enum IonprobeTwoEtaModel model,
                                             double *out);

/**
 * Fano-Mandel `Q` with propagated standard error.
 *
 * # Safety
 * `q` and `q_stderr` must be valid for writes.
 */
enum IonprobeStatus ionprobe_fano_mandel(double n1,
                                         double n1_stderr,
                                         double n2,
                                         double n2_stderr,
                                         double *q,
                                         double *q_stderr);

/**
 * Distribution on `{0 … support−1}` from moments `m_0 … m_{support−1}`.
 *
 * # Safety
 * `moments` and `probs` must hold `support` values; the scalar outputs
 * must be valid for writes.
 */
enum IonprobeStatus ionprobe_moments_to_distribution(const double *moments,
                                                     size_t support,
                                                     double *probs,
                                                     double *condition_number,
                                                     double *negativity);

/**
 * Collective slope of ion `ion` (zero-based) in an `n_ions` chain, other
 * ions in the ground state. `modes` is the joint motional state with mode 0
 * most significant.
 *
 * # Safety
 * `mode_dims` and `mode_etas` must hold `n_ions` values; `modes` must be a
 * live handle; `out` must be valid for writes.
 */
enum IonprobeStatus ionprobe_collective_slope(size_t n_ions,
                                              const size_t *mode_dims,
                                              const double *mode_etas,
                                              size_t ion,
                                              int32_t sign,
                                              double phi,
                                              const struct IonprobeMotionalState *modes,
                                              double *out);

/**
 * Runs a scenario given as JSON text; relative file paths resolve against
 * the working directory. On success `*report` receives the JSON report,
 * to be released with [`ionprobe_string_free`].
 *
 * # Safety
 * `scenario_json` must be a NUL-terminated string; `report` must be valid for writes.
 */
enum IonprobeStatus ionprobe_run_scenario_json(const char *scenario_json, char **report);

/**
 * # Safety
 * `s` must come from this library (or be null) and must not be used afterwards.
 */
void ionprobe_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IONPROBE_H */
