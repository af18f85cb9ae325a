#ifndef IPDSIM_H
#define IPDSIM_H

/* Generated with cbindgen:0.27.0 */

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Action codes accepted where a function takes an `int32_t` action.
 */
typedef enum IpdAction {
  IPD_ACTION_COOPERATE = 0,
  IPD_ACTION_DEFECT = 1,
} IpdAction;

typedef enum IpdStatus {
  IPD_STATUS_OK = 0,
  IPD_STATUS_NULL_POINTER = 1,
  IPD_STATUS_INVALID_ARGUMENT = 2,
  IPD_STATUS_INVALID_CONFIG = 3,
  /*
   Training produced a non-finite loss. The simulation cannot continue.
   */
  IPD_STATUS_NUMERICAL = 4,
  /*
   Every configured episode has already run.
   */
  IPD_STATUS_FINISHED = 5,
  IPD_STATUS_INTERNAL = 6,
} IpdStatus;

/*
 Opaque simulation handle.
 */
typedef struct IpdSimulation IpdSimulation;

typedef struct IpdEpisodeMetrics {
  uint64_t episode;
  double cooperation_pct;
  double cooperator_selection_pct;
  double punishment_pct;
  double selected_punisher_pct;
  double just_ratio_pct;
  double just_punisher_selection_pct;
  double societal_reward;
  double societal_reputation;
} IpdEpisodeMetrics;

typedef struct IpdPunishmentDeltas {
  int64_t punisher_reward;
  int64_t punished_reward;
  int64_t punisher_rep;
} IpdPunishmentDeltas;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failure on the calling thread, or null. The string
 stays valid until the next failing call on the same thread.
 */
const char *ipd_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *ipd_version(void);

/*
 Create a simulation with the published defaults for `mode` ("DP",
 "TPP-S", ..., "NONE") and the given scheme (1 or 2), population size,
 episode count, rounds per episode and seed.

 # Safety
 `mode` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IpdStatus ipd_simulation_new(const char *mode,
                                  uint8_t scheme,
                                  uint32_t population_size,
                                  uint64_t episodes,
                                  uint32_t rounds_per_episode,
                                  uint64_t seed,
                                  struct IpdSimulation **out);

/*
 Create a simulation from a TOML settings document naming a `mode`
 (same keys as the command-line config file; `preset`, `repeats`, `jobs`
 and `out` are ignored). `seed` in the document is used directly.

 # Safety
 `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IpdStatus ipd_simulation_from_toml(const char *toml, struct IpdSimulation **out);

/*
 Release a simulation. Null is ignored.

 # Safety
 `sim` must come from this library and not be used afterwards.
 */
void ipd_simulation_free(struct IpdSimulation *sim);

/*
 Run the next episode and write its metrics to `out`.
 Returns `IPD_STATUS_FINISHED` once every configured episode has run.

 # Safety
 `sim` and `out` must be valid pointers.
 */
enum IpdStatus ipd_simulation_step(struct IpdSimulation *sim, struct IpdEpisodeMetrics *out);

/*
 Episodes completed so far.

 # Safety
 `sim` must be a valid pointer or null (which yields 0).
 */
uint64_t ipd_simulation_episode(const struct IpdSimulation *sim);

/*
 Number of agents, or 0 for null.

 # Safety
 `sim` must be a valid pointer or null.
 */
uintptr_t ipd_simulation_population_size(const struct IpdSimulation *sim);

/*
 Copy the current reputations into `buf`, which must hold `len` values.

 # Safety
 `sim` must be valid and `buf` must point to `len` writable values.
 */
enum IpdStatus ipd_simulation_reputations(const struct IpdSimulation *sim,
                                          int64_t *buf,
                                          uintptr_t len);

/*
 Row and column player payoffs when the row player plays `a` and the
 column player `b` (see `IpdAction`).

 # Safety
 `row` and `col` must be valid pointers.
 */
enum IpdStatus ipd_payoff(int32_t a, int32_t b, int64_t *row, int64_t *col);

/*
 Reward and reputation effects of one punishment decision (`punish` is
 0 or 1) on a target that played `target_action`.

 # Safety
 `out` must be a valid pointer.
 */
enum IpdStatus ipd_punishment_deltas(uint8_t scheme,
                                     uint8_t punish,
                                     int32_t target_action,
                                     struct IpdPunishmentDeltas *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IPDSIM_H */
