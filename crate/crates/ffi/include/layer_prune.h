#ifndef LAYER_PRUNE_H
#define LAYER_PRUNE_H

#include <stddef.h>
#include <stdint.h>

typedef enum LpStatus {
  LP_STATUS_OK = 0,
  LP_STATUS_NULL_ARGUMENT = 1,
  LP_STATUS_INVALID_ARGUMENT = 2,
  LP_STATUS_OUT_OF_RANGE = 3,
  /**
   * The output buffer is too small; the needed length was still written.
   */
  LP_STATUS_BUFFER_TOO_SMALL = 4,
  LP_STATUS_IO = 5,
  /**
   * The score callback reported a failure.
   */
  LP_STATUS_ORACLE = 6,
  LP_STATUS_PANIC = 7,
} LpStatus;

/**
 * Which score an `lp_metric` call computes.
 */
typedef enum LpMetric {
  LP_METRIC_ACCURACY = 0,
  LP_METRIC_F1 = 1,
  LP_METRIC_MATTHEWS_CORR = 2,
} LpMetric;

/**
 * Stored search result.
 */
typedef struct LpLedger LpLedger;

/**
 * Scores a model keeping `kept_len` layers listed in `kept` (ascending).
 * Writes the score to `score` and returns 0, or returns non-zero on failure.
 */
typedef int (*LpScoreFn)(void *user_data,
                         const size_t *kept,
                         size_t kept_len,
                         uint64_t seed,
                         double *score);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or null. Valid until
 * the next call into the library from this thread.
 */
const char *lp_last_error(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void lp_string_free(char *s);

/**
 * Loads a ledger file written by the command-line tool.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be writable.
 */
enum LpStatus lp_ledger_load(const char *path, struct LpLedger **out);

/**
 * Parses a ledger from its JSON text.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string; `out` must be writable.
 */
enum LpStatus lp_ledger_from_json(const char *json, struct LpLedger **out);

/**
 * Serializes a ledger; release the result with [`lp_string_free`].
 *
 * # Safety
 * `ledger` must be a live handle; `out` must be writable.
 */
enum LpStatus lp_ledger_to_json(const struct LpLedger *ledger, char **out);

/**
 * # Safety
 * `ledger` must be null or a handle not yet freed.
 */
void lp_ledger_free(struct LpLedger *ledger);

/**
 * Number of layers of the model the ledger describes.
 *
 * # Safety
 * `ledger` must be a live handle.
 */
size_t lp_ledger_depth(const struct LpLedger *ledger);

/**
 * Number of pruning steps recorded, i.e. the largest valid `x` for lookup.
 *
 * # Safety
 * `ledger` must be a live handle.
 */
size_t lp_ledger_steps(const struct LpLedger *ledger);

/**
 * Layers to prune for `x` removed layers, in pruning order. Reads only the
 * stored ledger.
 *
 * # Safety
 * `ledger` must be a live handle; `out` must hold `cap` elements.
 */
enum LpStatus lp_ledger_lookup(const struct LpLedger *ledger,
                               size_t x,
                               size_t *out,
                               size_t cap,
                               size_t *out_len);

/**
 * The `n` highest layers of a `depth`-layer model, highest first.
 *
 * # Safety
 * `out` must hold `cap` elements; `out_len` must be writable.
 */
enum LpStatus lp_top_layer_prune(size_t depth, size_t n, size_t *out, size_t cap, size_t *out_len);

/**
 * Greedy layer pruning for `n` steps. Calls `score` once per candidate, on
 * the calling thread. The resulting ledger is written to `out`.
 *
 * # Safety
 * `score` must be safe to call with `user_data`; `out` must be writable.
 */
enum LpStatus lp_glp_search(size_t depth,
                            size_t n,
                            uint64_t seed,
                            LpScoreFn score,
                            void *user_data,
                            struct LpLedger **out);

/**
 * Scores all `n`-layer subsets and writes the best one (descending) to
 * `out` and its score to `best_score`.
 *
 * # Safety
 * `score` must be safe to call with `user_data`; `out` must hold `cap`
 * elements; `out_len` and `best_score` must be writable.
 */
enum LpStatus lp_optimal_search(size_t depth,
                                size_t n,
                                uint64_t seed,
                                LpScoreFn score,
                                void *user_data,
                                size_t *out,
                                size_t cap,
                                size_t *out_len,
                                double *best_score);

/**
 * Classification metric over `len` predicted and reference labels.
 *
 * # Safety
 * `preds` and `golds` must hold `len` elements; `out` must be writable.
 */
enum LpStatus lp_metric(enum LpMetric metric,
                        const uint32_t *preds,
                        const uint32_t *golds,
                        size_t len,
                        double *out);

/**
 * Spearman rank correlation of two series of `len` values.
 *
 * # Safety
 * `x` and `y` must hold `len` elements; `out` must be writable.
 */
enum LpStatus lp_spearman(const double *x, const double *y, size_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAYER_PRUNE_H */
