#ifndef MATCH_BANDITS_H
#define MATCH_BANDITS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MbStatus {
  MB_STATUS_OK = 0,
  MB_STATUS_NULL_POINTER = 1,
  MB_STATUS_INVALID_UTF8 = 2,
  MB_STATUS_INVALID_MARKET = 3,
  MB_STATUS_INVALID_CONFIG = 4,
  MB_STATUS_TOO_LARGE = 5,
  MB_STATUS_OUT_OF_RANGE = 6,
  MB_STATUS_IO = 7,
  MB_STATUS_INTERNAL = 8,
} MbStatus;

/**
 * Opaque market handle.
 */
typedef struct MbMarket MbMarket;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next call.
 */
const char *mb_last_error_message(void);

/**
 * Builds a named example market with Bernoulli rewards.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable pointer.
 */
enum MbStatus mb_market_from_example(const char *name, struct MbMarket **out);

/**
 * Parses a market from its JSON description.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum MbStatus mb_market_from_json(const char *json, struct MbMarket **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `market` must come from this library and not be used afterwards.
 */
void mb_market_free(struct MbMarket *market);

/**
 * Number of agents and firms.
 *
 * # Safety
 * Pointers must be valid.
 */
enum MbStatus mb_market_size(const struct MbMarket *market, size_t *n, size_t *m);

/**
 * Deferred acceptance on the true preferences. `proposer` 0 = agents, 1 = firms.
 * Writes the 0-based firm of each agent (-1 if unmatched) into `out[0..n]`.
 *
 * # Safety
 * `out` must point to `len` writable entries.
 */
enum MbStatus mb_market_gale_shapley(const struct MbMarket *market,
                                     int32_t proposer,
                                     int32_t *out,
                                     size_t len);

/**
 * Number of stable matchings.
 *
 * # Safety
 * Pointers must be valid.
 */
enum MbStatus mb_market_stable_count(struct MbMarket *market, size_t *count);

/**
 * Stable matching number `index`, written like [`mb_market_gale_shapley`].
 *
 * # Safety
 * `out` must point to `len` writable entries.
 */
enum MbStatus mb_market_stable_get(struct MbMarket *market, size_t index, int32_t *out, size_t len);

/**
 * Runs a TOML experiment config and returns its summary as JSON in `summary_json`.
 * With a non-null `out_dir` all artifacts are written there too; relative
 * market files resolve against the working directory.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string, `out_dir` null or one, and
 * `summary_json` writable. Free the result with [`mb_string_free`].
 */
enum MbStatus mb_run_config(const char *config_toml, const char *out_dir, char **summary_json);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void mb_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MATCH_BANDITS_H */
