#ifndef AIRCOMP_H
#define AIRCOMP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum AircompStatus {
  AIRCOMP_STATUS_OK = 0,
  AIRCOMP_STATUS_NULL_POINTER = 1,
  AIRCOMP_STATUS_INVALID_ARGUMENT = 2,
  AIRCOMP_STATUS_DIMENSION_MISMATCH = 3,
  AIRCOMP_STATUS_DEGENERATE_CHANNEL = 4,
  AIRCOMP_STATUS_UNSUPPORTED = 5,
  AIRCOMP_STATUS_UNBOUNDED_INNER = 6,
  AIRCOMP_STATUS_INTERNAL_ERROR = 7,
  AIRCOMP_STATUS_PANIC = 8,
} AircompStatus;

typedef enum AircompMethod {
  AIRCOMP_METHOD_AUTO = 0,
  AIRCOMP_METHOD_ELLIPSOID = 1,
  AIRCOMP_METHOD_PROJECTED_NEWTON = 2,
  AIRCOMP_METHOD_PROJECTED_SUBGRADIENT = 3,
} AircompMethod;

/**
 * A finite set of weighted channel states.
 */
typedef struct AircompEnsemble AircompEnsemble;

/**
 * Result of `aircomp_solve_fading`.
 */
typedef struct AircompFadingSolution AircompFadingSolution;

/**
 * Noise variance and per-device power budgets.
 */
typedef struct AircompSystem AircompSystem;

typedef struct AircompFadingOptions {
  double tol;
  double kkt_tol;
  /**
   * 0 selects the method's default iteration cap.
   */
  size_t max_iter;
  double mu_max;
  enum AircompMethod method;
} AircompFadingOptions;

typedef struct AircompFadingSummary {
  double dual_value;
  /**
   * Unscaled ensemble MSE of the returned policy.
   */
  double primal_value;
  double gap;
  double relative_gap;
  /**
   * Scaled ensemble MSE (primal value divided by K^2).
   */
  double mse;
  size_t iterations;
  bool converged;
  size_t num_warnings;
} AircompFadingSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 */
size_t aircomp_last_error_message(char *buf, size_t len);

enum AircompStatus aircomp_system_new(double noise_var,
                                      const double *budgets,
                                      size_t k,
                                      struct AircompSystem **out);

void aircomp_system_free(struct AircompSystem *system);

/**
 * `n` i.i.d. Rayleigh states with `h_k ~ CN(0, sigma_h_sq)`.
 */
enum AircompStatus aircomp_ensemble_rayleigh(size_t k,
                                             size_t n,
                                             double sigma_h_sq,
                                             uint64_t seed,
                                             struct AircompEnsemble **out);

/**
 * Builds an ensemble from row-major `n x k` channel power gains and `n` weights summing to one.
 */
enum AircompStatus aircomp_ensemble_from_power_gains(const double *power_gains,
                                                     const double *weights,
                                                     size_t n,
                                                     size_t k,
                                                     struct AircompEnsemble **out);

/**
 * Number of states, or 0 for a null handle.
 */
size_t aircomp_ensemble_len(const struct AircompEnsemble *ensemble);

/**
 * Copies the `k` channel power gains of one state into `out`.
 */
enum AircompStatus aircomp_ensemble_power_gains(const struct AircompEnsemble *ensemble,
                                                size_t state,
                                                double *out,
                                                size_t k);

void aircomp_ensemble_free(struct AircompEnsemble *ensemble);

/**
 * Optimal static policy for one channel state. `out_powers` receives `k`
 * values; the scalar outputs may be null when not needed.
 */
enum AircompStatus aircomp_solve_static(const struct AircompSystem *system,
                                        const double *power_gains,
                                        size_t k,
                                        double *out_powers,
                                        double *out_eta,
                                        size_t *out_k_star,
                                        double *out_objective);

/**
 * Scaled MSE of a policy in one state. Pass `eta = INFINITY` for a silent receiver.
 */
enum AircompStatus aircomp_mse_single_state(const struct AircompSystem *system,
                                            const double *power_gains,
                                            const double *powers,
                                            size_t k,
                                            double eta,
                                            double *out_mse);

struct AircompFadingOptions aircomp_fading_options_default(void);

/**
 * Solves the fading problem; `options` may be null for defaults.
 */
enum AircompStatus aircomp_solve_fading(const struct AircompSystem *system,
                                        const struct AircompEnsemble *ensemble,
                                        const struct AircompFadingOptions *options,
                                        struct AircompFadingSolution **out);

enum AircompStatus aircomp_fading_summary(const struct AircompFadingSolution *solution,
                                          struct AircompFadingSummary *out);

/**
 * Copies the `k` optimal dual prices.
 */
enum AircompStatus aircomp_fading_mu(const struct AircompFadingSolution *solution,
                                     double *out,
                                     size_t k);

/**
 * Copies the `k` powers of one state and its denoising factor (`INFINITY` when silent).
 */
enum AircompStatus aircomp_fading_state_policy(const struct AircompFadingSolution *solution,
                                               size_t state,
                                               double *out_powers,
                                               size_t k,
                                               double *out_eta);

void aircomp_fading_solution_free(struct AircompFadingSolution *solution);

/**
 * Truncated channel inversion with one denoising factor; `out_xi` receives
 * the `k` thresholds on `|h_k|^2`.
 */
enum AircompStatus aircomp_solve_lowcomplexity(const struct AircompSystem *system,
                                               const struct AircompEnsemble *ensemble,
                                               double *out_eta,
                                               double *out_xi,
                                               size_t k,
                                               double *out_mse);

/**
 * Single power-limited device: its dual price, silence threshold on `|h|`
 * and the magnitude at which its power peaks.
 */
enum AircompStatus aircomp_solve_waterfilling(const struct AircompSystem *system,
                                              const struct AircompEnsemble *ensemble,
                                              size_t limited_device,
                                              double *out_mu,
                                              double *out_threshold,
                                              double *out_peak_gain);

/**
 * Library version as a static NUL-terminated string.
 */
const char *aircomp_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AIRCOMP_H */
