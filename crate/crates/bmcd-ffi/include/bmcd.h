#ifndef BMCD_H
#define BMCD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code of every API call.
typedef enum BmcdStatus {
  BMCD_STATUS_OK = 0,
  BMCD_STATUS_NULL_POINTER = 1,
  BMCD_STATUS_INVALID_ARGUMENT = 2,
  BMCD_STATUS_DIMENSION_MISMATCH = 3,
  BMCD_STATUS_DOMAIN_ERROR = 4,
  BMCD_STATUS_NUMERIC_ERROR = 5,
  BMCD_STATUS_IO_ERROR = 6,
  BMCD_STATUS_EMPTY_INPUT = 7,
  BMCD_STATUS_UTF8_ERROR = 8,
  BMCD_STATUS_PANIC = 9,
} BmcdStatus;

// Opaque click-data handle.
typedef struct BmcdClickData BmcdClickData;

// Opaque partition-table handle.
typedef struct BmcdPartitionTable BmcdPartitionTable;

// Opaque posterior handle.
typedef struct BmcdPosterior BmcdPosterior;

// Opaque next-top-k probability matrix handle.
typedef struct BmcdTpp BmcdTpp;

// Chain options with plain C types. Zeroed integer fields fall back to
// defaults where documented; get a baseline from
// [`bmcd_chain_options_default`].
typedef struct BmcdChainOptions {
  size_t n_clusters;
  // Exponential prior rate on the scale parameters.
  double lambda;
  // Dirichlet concentration of the cluster-weight prior.
  double psi;
  uint64_t iter_max;
  uint64_t burn_in;
  uint64_t thinning;
  // Propose scales every this many iterations.
  uint64_t alpha_update;
  // Leap-and-shift window; 0 selects max(1, n/20).
  size_t leap_size;
  double alpha_proposal_sd;
  // 0 = swap proposal, 1 = two-part leap-and-shift.
  int32_t augmentation;
  // 0 = random initialization, 1 = popularity initialization.
  int32_t init;
  double alpha_init;
  uint64_t seed;
  // Worker threads for the per-user phase; results do not depend on it.
  size_t threads;
  // Recommendation horizon whose posterior counts the chain accumulates.
  size_t tpp_k;
  // Monte-Carlo sample count for an auto-built partition table.
  uint64_t mc_samples;
} BmcdChainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Defaults mirroring the library's long-run schedule, scaled to the data
// at hand by the caller.
struct BmcdChainOptions bmcd_chain_options_default(void);

// Library version as a static string; do not free.
const char *bmcd_version(void);

// The last error message on this thread, or NULL. Free the returned
// string with `bmcd_string_free`.
char *bmcd_last_error_message(void);

// Free a string returned by this library.
//
// # Safety
// `s` must have been returned by a bmcd function and not freed before.
void bmcd_string_free(char *s);

// Footrule distance between two rank vectors of length `len`.
//
// # Safety
// `a` and `b` must point to `len` readable u32 values; `out` must be a
// valid writable pointer.
enum BmcdStatus bmcd_footrule_distance(const uint32_t *a,
                                       const uint32_t *b,
                                       size_t len,
                                       uint64_t *out);

// Exact partition table for `n <= 8` items.
//
// # Safety
// `out` must be a valid writable pointer.
enum BmcdStatus bmcd_partition_table_exact(size_t n, struct BmcdPartitionTable **out);

// Monte-Carlo partition table on the default grid (0.05..=20 step 0.05).
//
// # Safety
// `out` must be a valid writable pointer.
enum BmcdStatus bmcd_partition_table_monte_carlo(size_t n,
                                                 uint64_t samples,
                                                 uint64_t seed,
                                                 struct BmcdPartitionTable **out);

// Load a table from its CSV form.
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` writable.
enum BmcdStatus bmcd_partition_table_load_csv(const char *path, struct BmcdPartitionTable **out);

// Persist a table as CSV.
//
// # Safety
// `table` must be a live handle; `path` a valid NUL-terminated string.
enum BmcdStatus bmcd_partition_table_save_csv(const struct BmcdPartitionTable *table,
                                              const char *path);

// `log Z_n(alpha)`.
//
// # Safety
// `table` must be a live handle; `out` writable.
enum BmcdStatus bmcd_log_partition(const struct BmcdPartitionTable *table,
                                   double alpha,
                                   double *out);

// # Safety
// `table` must be a live handle or NULL; double frees are undefined.
void bmcd_partition_table_free(struct BmcdPartitionTable *table);

// Empty dataset over `n_items` items; add users one by one.
//
// # Safety
// `out` must be a valid writable pointer.
enum BmcdStatus bmcd_click_data_new(size_t n_items, struct BmcdClickData **out);

// Append one user's clicked item indices.
//
// # Safety
// `data` must be a live handle; `items` must point to `len` readable u32.
enum BmcdStatus bmcd_click_data_add_user(struct BmcdClickData *data,
                                         const uint32_t *items,
                                         size_t len);

// Load a `user_id,item_id` CSV; `n_items = 0` infers the universe size.
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` writable.
enum BmcdStatus bmcd_click_data_load_csv(const char *path,
                                         size_t n_items,
                                         struct BmcdClickData **out);

// # Safety
// `data` must be a live handle.
size_t bmcd_click_data_n_users(const struct BmcdClickData *data);

// # Safety
// `data` must be a live handle.
size_t bmcd_click_data_n_items(const struct BmcdClickData *data);

// # Safety
// `data` must be a live handle or NULL; double frees are undefined.
void bmcd_click_data_free(struct BmcdClickData *data);

// Run the chain. `table` may be NULL: an exact table is built for
// `n <= 8` items, otherwise a Monte-Carlo one with `options.mc_samples`
// draws.
//
// # Safety
// `data` and (when non-NULL) `table` must be live handles; `options` and
// `out` must be valid pointers.
enum BmcdStatus bmcd_fit(const struct BmcdClickData *data,
                         const struct BmcdChainOptions *options,
                         const struct BmcdPartitionTable *table,
                         struct BmcdPosterior **out);

// # Safety
// `posterior` must be a live handle.
size_t bmcd_posterior_n_samples(const struct BmcdPosterior *posterior);

// Posterior mean of the summed within-cluster footrule distances.
//
// # Safety
// `posterior` must be a live handle; `out` writable.
enum BmcdStatus bmcd_posterior_mwcd(const struct BmcdPosterior *posterior, double *out);

// # Safety
// `posterior` must be a live handle or NULL; double frees are undefined.
void bmcd_posterior_free(struct BmcdPosterior *posterior);

// Next-top-k posterior probabilities at horizon `k` (must match the
// `tpp_k` the chain accumulated, unless latent rankings were stored).
//
// # Safety
// `posterior` must be a live handle; `out` writable.
enum BmcdStatus bmcd_tpp_compute(const struct BmcdPosterior *posterior,
                                 size_t k,
                                 struct BmcdTpp **out);

// Probability for one (user, item) cell.
//
// # Safety
// `tpp` must be a live handle; `out` writable.
enum BmcdStatus bmcd_tpp_value(const struct BmcdTpp *tpp, size_t user, size_t item, double *out);

// Top-k recommendations for one user. Fills up to `capacity` entries of
// `out_items`/`out_scores` and reports the actual count in `out_len`.
//
// # Safety
// `tpp` must be a live handle; the out arrays must have `capacity`
// writable elements; `out_len` must be writable.
enum BmcdStatus bmcd_recommend_user(const struct BmcdTpp *tpp,
                                    size_t user,
                                    uint32_t *out_items,
                                    double *out_scores,
                                    size_t capacity,
                                    size_t *out_len);

// # Safety
// `tpp` must be a live handle or NULL; double frees are undefined.
void bmcd_tpp_free(struct BmcdTpp *tpp);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BMCD_H */
