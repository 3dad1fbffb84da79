#ifndef EXPLAT_H
#define EXPLAT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum ExplatStatus {
  EXPLAT_STATUS_OK = 0,
  EXPLAT_STATUS_NULL_POINTER = 1,
  EXPLAT_STATUS_INVALID_UTF8 = 2,
  EXPLAT_STATUS_INVALID_ARGUMENT = 3,
  EXPLAT_STATUS_DATA = 4,
  EXPLAT_STATUS_MODEL = 5,
  EXPLAT_STATUS_MARKET = 6,
  EXPLAT_STATUS_EXCHANGE = 7,
  EXPLAT_STATUS_PANIC = 8,
} ExplatStatus;

typedef enum ExplatValence {
  EXPLAT_VALENCE_NEGATIVE = 0,
  EXPLAT_VALENCE_POSITIVE = 1,
} ExplatValence;

typedef enum ExplatTier {
  EXPLAT_TIER_STANDARD = 0,
  EXPLAT_TIER_VALUABLE = 1,
} ExplatTier;

typedef enum ExplatDomain {
  EXPLAT_DOMAIN_FINANCE = 0,
  EXPLAT_DOMAIN_EMPLOYMENT = 1,
  EXPLAT_DOMAIN_EDUCATION = 2,
} ExplatDomain;

typedef enum ExplatPricing {
  EXPLAT_PRICING_FIRST_PRICE = 0,
  EXPLAT_PRICING_SECOND_PRICE = 1,
} ExplatPricing;

typedef struct ExplatDataset ExplatDataset;

typedef struct ExplatForest ExplatForest;

typedef struct ExplatRegistry ExplatRegistry;

typedef struct ExplatSchema ExplatSchema;

// Closed-form yearly market size.
typedef struct ExplatMarketEstimate {
  double rejected_revenue;
  double accepted_revenue;
  double total_revenue;
} ExplatMarketEstimate;

// Outcome of one auction. `winner` is a registration index, or -1 when
// the impression went unsold.
typedef struct ExplatAuctionResult {
  int64_t winner;
  double winning_bid;
  double clearing_price;
  uint64_t bids;
} ExplatAuctionResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL.
const char *explat_last_error(void);

// Library version, a static string.
const char *explat_version(void);

// Loads a schema file.
enum ExplatStatus explat_schema_load(const char *path, struct ExplatSchema **out_schema);

void explat_schema_free(struct ExplatSchema *schema);

// Number of input features.
enum ExplatStatus explat_schema_feature_count(const struct ExplatSchema *schema,
                                              uint64_t *out_count);

// Loads a dataset that conforms to `schema`.
enum ExplatStatus explat_dataset_load(const struct ExplatSchema *schema,
                                      const char *path,
                                      struct ExplatDataset **out_dataset);

void explat_dataset_free(struct ExplatDataset *dataset);

enum ExplatStatus explat_dataset_len(const struct ExplatDataset *dataset, uint64_t *out_len);

// Stratified split; the test part has round(test_fraction * rows) rows.
enum ExplatStatus explat_dataset_split(const struct ExplatDataset *dataset,
                                       double test_fraction,
                                       uint64_t seed,
                                       struct ExplatDataset **out_train,
                                       struct ExplatDataset **out_test);

// Trains a random forest. `max_depth` 0 means unlimited; the number of
// features tried per split is the default (square root of the encoded width).
enum ExplatStatus explat_forest_train(const struct ExplatDataset *train,
                                      uint64_t n_trees,
                                      uint64_t max_depth,
                                      uint64_t min_leaf,
                                      uint64_t seed,
                                      struct ExplatForest **out_forest);

// Loads a model file written by `explat train` or [`explat_forest_save`].
enum ExplatStatus explat_forest_load(const struct ExplatSchema *schema,
                                     const char *path,
                                     struct ExplatForest **out_forest);

enum ExplatStatus explat_forest_save(const struct ExplatForest *forest, const char *path);

void explat_forest_free(struct ExplatForest *forest);

// Positive-class probability of row `row` (0-based) of `dataset`.
enum ExplatStatus explat_forest_predict(const struct ExplatForest *forest,
                                        const struct ExplatDataset *dataset,
                                        uint64_t row,
                                        double *out_probability);

// Area under the ROC curve of the forest on a labelled dataset.
enum ExplatStatus explat_forest_auc(const struct ExplatForest *forest,
                                    const struct ExplatDataset *dataset,
                                    double *out_auc);

// Expected revenue of one explanation impression under the default rate
// table: ctr[valence] * cpc[valence, tier of the most expensive feature].
enum ExplatStatus explat_expected_revenue(enum ExplatValence valence,
                                          enum ExplatTier tier,
                                          double *out_revenue);

// Yearly market size with the built-in parameters for `domain`.
enum ExplatStatus explat_market_estimate(enum ExplatDomain domain,
                                         struct ExplatMarketEstimate *out_estimate);

// Loads advertisers from a campaign file. Feature themes for broad
// matching come from `schema`, which may be NULL (keyword matching only).
enum ExplatStatus explat_registry_load(const char *path,
                                       const struct ExplatSchema *schema,
                                       struct ExplatRegistry **out_registry);

void explat_registry_free(struct ExplatRegistry *registry);

enum ExplatStatus explat_registry_len(const struct ExplatRegistry *registry, uint64_t *out_len);

// Id of the advertiser at registration index `index`, owned by the
// registry; NULL when out of range.
const char *explat_registry_advertiser_id(const struct ExplatRegistry *registry, uint64_t index);

// Collects bids for an explanation with `n_features` changed features and
// runs a single-slot auction. Budgets are not charged.
enum ExplatStatus explat_auction(const struct ExplatRegistry *registry,
                                 const char *const *features,
                                 uint64_t n_features,
                                 const char *context,
                                 enum ExplatValence valence,
                                 enum ExplatPricing pricing,
                                 double reserve,
                                 struct ExplatAuctionResult *out_result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EXPLAT_H */
