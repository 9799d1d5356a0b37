#ifndef HHVG_H
#define HHVG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum HhvgStatus {
  HHVG_STATUS_OK = 0,
  HHVG_STATUS_NULL_POINTER = 1,
  HHVG_STATUS_INVALID_ARGUMENT = 2,
  HHVG_STATUS_NUMERICAL = 3,
  HHVG_STATUS_CONFIG = 4,
  HHVG_STATUS_DEPENDENCY = 5,
  HHVG_STATUS_IO = 6,
  HHVG_STATUS_PANIC = 7,
} HhvgStatus;

/**
 * Learning agent handle.
 */
typedef struct HhvgAgent HhvgAgent;

/**
 * Environment configuration handle.
 */
typedef struct HhvgEnv HhvgEnv;

/**
 * Summary of one agent step.
 */
typedef struct HhvgStepReport {
  uint64_t t;
  double state[4];
  double fm_loss;
  /**
   * NaN when the variant has no such component.
   */
  double vf_loss;
  double mm_loss;
  double ap_loss;
  double reward;
} HhvgStepReport;

/**
 * Mann-Whitney U test of `x < y`.
 */
typedef struct HhvgUTest {
  double u;
  /**
   * One-sided p-value `P(U <= u)`.
   */
  double p;
  /**
   * 1 when the exact distribution was used, 0 for the normal approximation.
   */
  int32_t exact;
  /**
   * 1 when every pooled value was identical.
   */
  int32_t degenerate;
} HhvgUTest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *hhvg_last_error_message(void);

/**
 * Creates the default environment.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HhvgStatus hhvg_env_new(struct HhvgEnv **out);

/**
 * Creates an environment from TOML text (fields not given keep their defaults).
 *
 * # Safety
 * `toml` must be a nul-terminated string and `out` a valid pointer.
 */
enum HhvgStatus hhvg_env_from_toml(const char *toml, struct HhvgEnv **out);

/**
 * # Safety
 * `env` must come from `hhvg_env_new`/`hhvg_env_from_toml` or be null.
 */
void hhvg_env_free(struct HhvgEnv *env);

/**
 * Number of discrete actions.
 *
 * # Safety
 * `env` must be a live handle and `out` a valid pointer.
 */
enum HhvgStatus hhvg_env_num_actions(const struct HhvgEnv *env, uint32_t *out);

/**
 * Advances `state` (x, y, vx, vy) by one step under a grid action.
 *
 * # Safety
 * `state_in` and `state_out` must point to 4 doubles; they may alias.
 */
enum HhvgStatus hhvg_env_step(const struct HhvgEnv *env,
                              const double *state_in,
                              uint32_t action_index,
                              double *state_out);

/**
 * Creates an agent of `variant` (`cb`, `cpe`, `pggr`, `prw`) with desk
 * settings in `env`. PG/IRS needs a reward database and is refused with
 * `Dependency`.
 *
 * # Safety
 * `env` must be a live handle, `variant` a nul-terminated string and `out`
 * a valid pointer.
 */
enum HhvgStatus hhvg_agent_new(const struct HhvgEnv *env,
                               const char *variant,
                               uint64_t seed,
                               struct HhvgAgent **out);

/**
 * # Safety
 * `agent` must come from `hhvg_agent_new` or be null.
 */
void hhvg_agent_free(struct HhvgAgent *agent);

/**
 * Runs one act-and-learn step. On failure the agent is left unchanged.
 *
 * # Safety
 * `agent` must be a live handle and `report` a valid pointer or null.
 */
enum HhvgStatus hhvg_agent_step(struct HhvgAgent *agent, struct HhvgStepReport *report);

/**
 * Current state of the agent.
 *
 * # Safety
 * `agent` must be a live handle and `state_out` point to 4 doubles.
 */
enum HhvgStatus hhvg_agent_state(const struct HhvgAgent *agent, double *state_out);

/**
 * Forward-model mean prediction of the agent for `(state, accel)`.
 *
 * # Safety
 * `state` must point to 4 doubles, `accel` to 2 and `out` to 4.
 */
enum HhvgStatus hhvg_agent_predict(const struct HhvgAgent *agent,
                                   const double *state,
                                   const double *accel,
                                   double *out);

/**
 * Closed-form `KL[N(mp, Cp) || N(mq, Cq)]` in four dimensions.
 *
 * # Safety
 * Means point to 4 doubles, covariances to 16 (row-major), `out` to one.
 */
enum HhvgStatus hhvg_gaussian_kl(const double *mean_p,
                                 const double *cov_p,
                                 const double *mean_q,
                                 const double *cov_q,
                                 double *out);

/**
 * Covariance `H diag(d) H` with `H` the reflection along `v`.
 *
 * # Safety
 * `d` and `v` point to 4 doubles, `cov_out` to 16.
 */
enum HhvgStatus hhvg_householder_cov(const double *d, const double *v, double *cov_out);

/**
 * # Safety
 * `x` points to `nx` doubles, `y` to `ny`, `out` to one `HhvgUTest`.
 */
enum HhvgStatus hhvg_mann_whitney_u(const double *x,
                                    size_t nx,
                                    const double *y,
                                    size_t ny,
                                    struct HhvgUTest *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HHVG_H */
