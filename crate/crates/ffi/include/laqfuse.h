#ifndef LAQFUSE_H
#define LAQFUSE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Values are stable.
 */
typedef enum LqfStatus {
  LQF_STATUS_OK = 0,
  LQF_STATUS_NULL_POINTER = 1,
  LQF_STATUS_INDEX = 2,
  LQF_STATUS_SHAPE = 3,
  LQF_STATUS_FORMAT = 4,
  LQF_STATUS_NAME = 5,
  LQF_STATUS_MAPPING = 6,
  LQF_STATUS_TYPE = 7,
  LQF_STATUS_DOMAIN = 8,
  LQF_STATUS_DUPLICATE_KEY = 9,
  LQF_STATUS_TREE = 10,
  LQF_STATUS_MODEL = 11,
  LQF_STATUS_CAPACITY = 12,
  LQF_STATUS_GEN = 13,
  LQF_STATUS_VERIFICATION = 14,
  LQF_STATUS_IO = 15,
  LQF_STATUS_UTF8 = 16,
  LQF_STATUS_PANIC = 17,
} LqfStatus;

/**
 * Linear model pre-fused with its dimension tables.
 */
typedef struct LqfFusedLinear LqfFusedLinear;

/**
 * Join result: matching `(left row, right row)` pairs.
 */
typedef struct LqfRowMatch LqfRowMatch;

/**
 * Compiled decision tree.
 */
typedef struct LqfTree LqfTree;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into this library from the same thread.
 */
const char *lqf_last_error(void);

/**
 * Equi-join of two key columns.
 *
 * # Safety
 * `left` and `right` must point to `n_left` and `n_right` keys; `out` must
 * be writable.
 */
enum LqfStatus lqf_mm_join(const int64_t *left,
                           size_t n_left,
                           const int64_t *right,
                           size_t n_right,
                           struct LqfRowMatch **out);

/**
 * Number of matching pairs, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t lqf_row_match_nnz(const struct LqfRowMatch *m);

/**
 * Copies up to `cap` pairs, in join output order, and stores the count in
 * `written`.
 *
 * # Safety
 * `left_rows` and `right_rows` must have room for `cap` entries.
 */
enum LqfStatus lqf_row_match_pairs(const struct LqfRowMatch *m,
                                   size_t *left_rows,
                                   size_t *right_rows,
                                   size_t cap,
                                   size_t *written);

/**
 * # Safety
 * `m` must be null or a handle not yet freed.
 */
void lqf_row_match_free(struct LqfRowMatch *m);

/**
 * Parses a tree in text form and compiles it for inputs of width `k`.
 *
 * # Safety
 * `text` must be a nul-terminated string.
 */
enum LqfStatus lqf_tree_compile(const char *text, size_t k, struct LqfTree **out);

/**
 * # Safety
 * `t` must be null or a live handle.
 */
size_t lqf_tree_leaf_count(const struct LqfTree *t);

/**
 * # Safety
 * `t` must be null or a live handle.
 */
size_t lqf_tree_input_width(const struct LqfTree *t);

/**
 * Predicts a leaf label for each of `rows` inputs of width `cols`.
 *
 * # Safety
 * `x` must hold `rows * cols` values and `labels` room for `rows`.
 */
enum LqfStatus lqf_tree_predict(const struct LqfTree *t,
                                const double *x,
                                size_t rows,
                                size_t cols,
                                int64_t *labels);

/**
 * # Safety
 * `t` must be null or a handle not yet freed.
 */
void lqf_tree_free(struct LqfTree *t);

/**
 * Pre-fuses a `k x l` weight matrix with `n_dims` dimension tables.
 * Column `c` of dimension `j` feeds model input `targets[j][c]`.
 *
 * # Safety
 * `weights` must hold `k * l` values. Each of `dim_data`, `dim_rows`,
 * `dim_cols` and `targets` must hold `n_dims` entries, with `dim_data[j]`
 * holding `dim_rows[j] * dim_cols[j]` values and `targets[j]` holding
 * `dim_cols[j]` positions.
 */
enum LqfStatus lqf_fused_linear_new(const double *weights,
                                    size_t k,
                                    size_t l,
                                    size_t n_dims,
                                    const double *const *dim_data,
                                    const size_t *dim_rows,
                                    const size_t *dim_cols,
                                    const size_t *const *targets,
                                    struct LqfFusedLinear **out);

/**
 * # Safety
 * `f` must be null or a live handle.
 */
size_t lqf_fused_linear_output_width(const struct LqfFusedLinear *f);

/**
 * Evaluates the fused model for `n` joined rows. `dim_row[j][t]` is the
 * row of dimension `j` matched by output row `t`. Writes `n * l` values.
 *
 * # Safety
 * `dim_row` must hold one array of `n` indices per dimension the handle
 * was built with; `out` must have room for `n * l` values.
 */
enum LqfStatus lqf_fused_linear_apply(const struct LqfFusedLinear *f,
                                      size_t n,
                                      const size_t *const *dim_row,
                                      double *out);

/**
 * # Safety
 * `f` must be null or a handle not yet freed.
 */
void lqf_fused_linear_free(struct LqfFusedLinear *f);

/**
 * Predicted non-fused / fused cost ratio for a linear model.
 *
 * # Safety
 * `r` must hold `n_r` dimension row counts; `out` must be writable.
 */
enum LqfStatus lqf_speedup_ratio_linear(double i,
                                        double k,
                                        double l,
                                        const double *r,
                                        size_t n_r,
                                        double *out);

/**
 * Same for a tree with `l` leaves and `p` internal nodes; `p <= 0` means
 * `p = k`.
 *
 * # Safety
 * As for [`lqf_speedup_ratio_linear`].
 */
enum LqfStatus lqf_speedup_ratio_tree(double i,
                                      double k,
                                      double l,
                                      double p,
                                      const double *r,
                                      size_t n_r,
                                      double *out);

/**
 * True when `ratio` exceeds `threshold`.
 */
bool lqf_decide_fusion(double ratio, double threshold);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAQFUSE_H */
