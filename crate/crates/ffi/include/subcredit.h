#ifndef SUBCREDIT_H
#define SUBCREDIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum ScStatus {
  SC_STATUS_OK = 0,
  SC_STATUS_NULL_POINTER = 1,
  SC_STATUS_INVALID_ARGUMENT = 2,
  SC_STATUS_IO = 3,
  SC_STATUS_FORMAT = 4,
  SC_STATUS_SHAPE_MISMATCH = 5,
  SC_STATUS_TRAINING = 6,
  SC_STATUS_INTERNAL = 7,
} ScStatus;

/**
 * An EMB1 embedding table.
 */
typedef struct ScEmbeddingTable ScEmbeddingTable;

/**
 * A trained model loaded from an SCM1 file.
 */
typedef struct ScModel ScModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sc_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated
 * and NUL-terminated) and returns the full message length excluding the
 * terminator; 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t sc_last_error_message(char *buf, size_t len);

/**
 * Loads an SCM1 model file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum ScStatus sc_model_load(const char *path, struct ScModel **out);

/**
 * Releases a model; null is ignored.
 *
 * # Safety
 * `model` must come from [`sc_model_load`] and not be used afterwards.
 */
void sc_model_free(struct ScModel *model);

/**
 * Number of feature columns the model expects.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum ScStatus sc_model_input_width(const struct ScModel *model, size_t *out);

/**
 * Model family: 0 logistic, 1 boosted trees, 2 MLP.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum ScStatus sc_model_kind(const struct ScModel *model, uint8_t *out);

/**
 * Scores `rows` row-major feature rows of width `cols` into `out`.
 *
 * # Safety
 * `x` must hold `rows * cols` doubles and `out` room for `rows` doubles.
 */
enum ScStatus sc_model_predict(const struct ScModel *model,
                               const double *x,
                               size_t rows,
                               size_t cols,
                               double *out);

/**
 * Reads an EMB1 file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum ScStatus sc_embedding_table_read(const char *path, struct ScEmbeddingTable **out);

/**
 * Releases a table; null is ignored.
 *
 * # Safety
 * `table` must come from [`sc_embedding_table_read`] and not be used afterwards.
 */
void sc_embedding_table_free(struct ScEmbeddingTable *table);

/**
 * Vector width of the table.
 *
 * # Safety
 * `table` must be a live handle; `out` must be writable.
 */
enum ScStatus sc_embedding_table_dim(const struct ScEmbeddingTable *table, size_t *out);

/**
 * Number of keys in the table.
 *
 * # Safety
 * `table` must be a live handle; `out` must be writable.
 */
enum ScStatus sc_embedding_table_len(const struct ScEmbeddingTable *table, size_t *out);

/**
 * Copies the vector stored under `key` into `out`, which must hold exactly
 * the table's width. A missing key is `InvalidArgument`.
 *
 * # Safety
 * `key` must be NUL-terminated; `out` must point to `len` writable floats.
 */
enum ScStatus sc_embedding_table_get(const struct ScEmbeddingTable *table,
                                     const char *key,
                                     float *out,
                                     size_t len);

/**
 * Hash embedding of `text` into `out[0..dim]`.
 *
 * # Safety
 * `text` must be NUL-terminated; `out` must point to `dim` writable doubles.
 */
enum ScStatus sc_hash_embed(const char *text, size_t dim, uint64_t seed, double *out);

/**
 * Area under the precision-recall curve. Labels are 0/1 bytes.
 *
 * # Safety
 * `scores` and `labels` must each hold `n` elements; `out` must be writable.
 */
enum ScStatus sc_auc_pr(const double *scores, const uint8_t *labels, size_t n, double *out);

/**
 * Kolmogorov-Smirnov distance between the class score distributions.
 *
 * # Safety
 * `scores` and `labels` must each hold `n` elements; `out` must be writable.
 */
enum ScStatus sc_ks_statistic(const double *scores, const uint8_t *labels, size_t n, double *out);

/**
 * Spread-implied default scores, `clamp(spread / 0.10, 0, 1)`.
 *
 * # Safety
 * `spreads` and `out` must each hold `n` doubles.
 */
enum ScStatus sc_spread_baseline(const double *spreads, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBCREDIT_H */
