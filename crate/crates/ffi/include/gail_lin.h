#ifndef GAIL_LIN_H
#define GAIL_LIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Feasible set for the reward parameters.
 */
typedef enum GlRewardDomain {
  GL_REWARD_DOMAIN_BALL = 0,
  GL_REWARD_DOMAIN_NONNEGATIVE_BALL = 1,
} GlRewardDomain;

/**
 * Who collects the offline dataset.
 */
typedef enum GlBehavior {
  GL_BEHAVIOR_EXPERT = 0,
  GL_BEHAVIOR_UNIFORM = 1,
} GlBehavior;

/**
 * Status codes returned by every fallible function.
 */
typedef enum GlStatus {
  GL_STATUS_OK = 0,
  GL_STATUS_NULL_POINTER = 1,
  /**
   * Malformed model, dimension mismatch, non-finite or degenerate input.
   */
  GL_STATUS_INVALID_INPUT = 2,
  GL_STATUS_CONFIG = 3,
  GL_STATUS_ABORTED = 4,
  GL_STATUS_IO = 5,
  GL_STATUS_FORMAT = 6,
  /**
   * A string argument was not valid UTF-8.
   */
  GL_STATUS_UTF8 = 7,
  GL_STATUS_PANIC = 8,
} GlStatus;

/**
 * An environment with its hidden expert.
 */
typedef struct GlInstance GlInstance;

/**
 * A Markov policy.
 */
typedef struct GlPolicy GlPolicy;

/**
 * A completed learner run.
 */
typedef struct GlRun GlRun;

/**
 * Online learner settings. Zero `alpha` or `eta` selects the default step.
 */
typedef struct GlOgapOptions {
  size_t episodes;
  size_t n1;
  double alpha;
  double eta;
  double lambda;
  double kappa_scale;
  double xi;
  uint64_t seed;
  enum GlRewardDomain reward_domain;
  bool diagnostics;
} GlOgapOptions;

/**
 * Offline learner settings. Zero `alpha` or `eta` selects the default step.
 */
typedef struct GlPgapOptions {
  size_t iterations;
  size_t n1;
  size_t n2;
  double alpha;
  double eta;
  double lambda;
  double kappa_scale;
  double xi;
  uint64_t seed;
  enum GlRewardDomain reward_domain;
  enum GlBehavior behavior;
  bool diagnostics;
} GlPgapOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` as a
 * NUL-terminated string, truncating to `len - 1` bytes. Returns the full
 * message length excluding the terminator; `buf` may be null to query it.
 */
size_t gl_last_error_message(char *buf, size_t len);

struct GlOgapOptions gl_ogap_options_default(void);

struct GlPgapOptions gl_pgap_options_default(void);

/**
 * Random tabular instance whose expert is optimal for a random
 * nonnegative reward.
 */
enum GlStatus gl_instance_tabular(size_t num_states,
                                  size_t num_actions,
                                  size_t horizon,
                                  uint64_t seed,
                                  struct GlInstance **out);

/**
 * The 4-state, 3-action, horizon-4 reference instance.
 */
enum GlStatus gl_instance_reference(struct GlInstance **out);

/**
 * Loads an instance JSON document.
 */
enum GlStatus gl_instance_load(const char *path, struct GlInstance **out);

void gl_instance_free(struct GlInstance *instance);

/**
 * Writes |S|, |A|, H, the transition feature dimension and the reward
 * feature dimension. Any output pointer may be null.
 */
enum GlStatus gl_instance_dims(const struct GlInstance *instance,
                               size_t *num_states,
                               size_t *num_actions,
                               size_t *horizon,
                               size_t *transition_dim,
                               size_t *reward_dim);

/**
 * Copy of the instance's expert policy.
 */
enum GlStatus gl_instance_expert(const struct GlInstance *instance, struct GlPolicy **out);

/**
 * Policy from a row-major `[h][s][a]` probability table of length H·|S|·|A|.
 */
enum GlStatus gl_policy_new(size_t num_states,
                            size_t num_actions,
                            size_t horizon,
                            const double *probs,
                            struct GlPolicy **out);

void gl_policy_free(struct GlPolicy *policy);

/**
 * π_h(a | s).
 */
enum GlStatus gl_policy_prob(const struct GlPolicy *policy,
                             size_t h,
                             size_t s,
                             size_t a,
                             double *out);

/**
 * Exact return of `policy` under the instance's expert reward.
 */
enum GlStatus gl_policy_return(const struct GlInstance *instance,
                               const struct GlPolicy *policy,
                               double *out);

/**
 * Samples N₁ expert demonstrations and runs the online learner.
 */
enum GlStatus gl_run_ogap(const struct GlInstance *instance,
                          const struct GlOgapOptions *options,
                          struct GlRun **out);

/**
 * Samples N₁ demonstrations and N₂ offline trajectories, then runs the
 * offline learner.
 */
enum GlStatus gl_run_pgap(const struct GlInstance *instance,
                          const struct GlPgapOptions *options,
                          struct GlRun **out);

void gl_run_free(struct GlRun *run);

/**
 * Number of recorded episodes or iterations.
 */
enum GlStatus gl_run_len(const struct GlRun *run, size_t *out);

/**
 * Copy of the k-th iterate, 0-based.
 */
enum GlStatus gl_run_policy(const struct GlRun *run, size_t k, struct GlPolicy **out);

/**
 * Worst-case cumulative regret over the reward ball, Regret(K).
 */
enum GlStatus gl_run_regret(const struct GlInstance *instance,
                            const struct GlRun *run,
                            double *out);

/**
 * Worst-case gap between the expert and the uniform mixture of iterates.
 */
enum GlStatus gl_run_gap(const struct GlInstance *instance, const struct GlRun *run, double *out);

/**
 * Intrinsic uncertainty of an offline run's kernel estimate under the
 * expert's occupancy.
 */
enum GlStatus gl_run_intrinsic_uncertainty(const struct GlInstance *instance,
                                           const struct GlRun *run,
                                           double *out);

/**
 * Writes the run's artifacts (manifest, per-episode CSV and, with
 * `diagnostics`, raw tables) into `dir`.
 */
enum GlStatus gl_run_write(const struct GlRun *run, const char *dir, bool diagnostics);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAIL_LIN_H */
