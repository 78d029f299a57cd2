#ifndef SEMALLOC_H
#define SEMALLOC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum SemallocStatus {
  SEMALLOC_STATUS_OK = 0,
  SEMALLOC_STATUS_NULL_POINTER = 1,
  SEMALLOC_STATUS_INVALID_ARGUMENT = 2,
  SEMALLOC_STATUS_IO = 3,
  SEMALLOC_STATUS_PARSE = 4,
  SEMALLOC_STATUS_INVALID_CONFIG = 5,
  SEMALLOC_STATUS_DIMENSION_MISMATCH = 6,
  SEMALLOC_STATUS_NON_FINITE = 7,
  SEMALLOC_STATUS_CHECKPOINT = 8,
  SEMALLOC_STATUS_CONTRACT = 9,
  SEMALLOC_STATUS_INTERNAL = 10,
} SemallocStatus;

// A trained agent with its own sampling stream.
typedef struct SemallocAgent SemallocAgent;

// A loaded model catalog.
typedef struct SemallocCatalog SemallocCatalog;

// An environment instance with its own random stream.
typedef struct SemallocEnv SemallocEnv;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL after a success.
// The pointer stays valid until the next call on the same thread.
const char *semalloc_last_error(void);

// Library version as a static NUL-terminated string.
const char *semalloc_version(void);

// Loads a catalog TOML file.
enum SemallocStatus semalloc_catalog_load(const char *path, struct SemallocCatalog **out);

// Number of models in the catalog, 0 for NULL.
size_t semalloc_catalog_len(const struct SemallocCatalog *catalog);

void semalloc_catalog_free(struct SemallocCatalog *catalog);

// Creates an environment with default budgets for `num_users` users.
// The catalog handle may be freed afterwards.
enum SemallocStatus semalloc_env_new(const struct SemallocCatalog *catalog,
                                     size_t num_users,
                                     uint64_t seed,
                                     struct SemallocEnv **out);

// Observation length, 0 for NULL.
size_t semalloc_env_observation_dim(const struct SemallocEnv *env);

size_t semalloc_env_num_users(const struct SemallocEnv *env);

// Starts an episode and writes the first observation.
enum SemallocStatus semalloc_env_reset(struct SemallocEnv *env,
                                       double *observation_out,
                                       size_t observation_len);

// Applies one action. All action arrays hold one entry per user.
enum SemallocStatus semalloc_env_step(struct SemallocEnv *env,
                                      const uint32_t *scm_index,
                                      const double *power_fraction,
                                      const double *bandwidth_fraction,
                                      size_t num_users,
                                      double *observation_out,
                                      size_t observation_len,
                                      double *reward_out,
                                      bool *done_out);

void semalloc_env_free(struct SemallocEnv *env);

// Loads an agent checkpoint written by `semalloc train`.
enum SemallocStatus semalloc_agent_load(const char *path,
                                        uint64_t seed,
                                        struct SemallocAgent **out);

size_t semalloc_agent_num_users(const struct SemallocAgent *agent);

size_t semalloc_agent_observation_dim(const struct SemallocAgent *agent);

// Chooses an action for `observation`. With `deterministic` the policy's
// mode is taken and no randomness is consumed.
enum SemallocStatus semalloc_agent_act(struct SemallocAgent *agent,
                                       const double *observation,
                                       size_t observation_len,
                                       bool deterministic,
                                       uint32_t *scm_index_out,
                                       double *power_fraction_out,
                                       double *bandwidth_fraction_out,
                                       size_t num_users);

void semalloc_agent_free(struct SemallocAgent *agent);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEMALLOC_H */
