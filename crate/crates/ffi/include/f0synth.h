#ifndef F0SYNTH_H
#define F0SYNTH_H

/* Generated by cbindgen from crates/ffi/src; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum F0sStatus {
  F0S_STATUS_OK = 0,
  F0S_STATUS_NULL_POINTER = 1,
  F0S_STATUS_INVALID_ARGUMENT = 2,
  F0S_STATUS_IO = 3,
  F0S_STATUS_FORMAT = 4,
  F0S_STATUS_DIMENSION_MISMATCH = 5,
  F0S_STATUS_NON_FINITE = 6,
  /**
   * The requested ratio has an empty denominator.
   */
  F0S_STATUS_UNDEFINED = 7,
  F0S_STATUS_INSUFFICIENT_POOL = 8,
  F0S_STATUS_PANIC = 99,
} F0sStatus;

/**
 * Opaque trained model.
 */
typedef struct F0sModel F0sModel;

/**
 * Opaque speaker pool.
 */
typedef struct F0sPool F0sPool;

/**
 * Pooled frame counts behind the pitch metrics.
 */
typedef struct F0sPitchCounts {
  uint64_t tp;
  uint64_t fp;
  uint64_t tn;
  uint64_t fn_;
  uint64_t gross;
  uint64_t within_gross;
  uint64_t fine;
} F0sPitchCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *f0s_last_error(void);

/**
 * Loads a checkpoint file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum F0sStatus f0s_model_load(const char *path, struct F0sModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`f0s_model_load`] not yet freed.
 */
void f0s_model_free(struct F0sModel *model);

/**
 * Width of one raw input row (`d_xv + d_bn`), or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t f0s_model_input_dim(const struct F0sModel *model);

/**
 * Predicts a masked F0 contour (Hz, 0 = unvoiced) from `n_frames` raw rows
 * `[xvec ∥ bn]`, row-major. `out_pv` may be null.
 *
 * # Safety
 * `features` must hold `n_frames * input_dim` values; `out_f0` (and
 * `out_pv` when non-null) must hold `n_frames` values.
 */
enum F0sStatus f0s_model_predict(const struct F0sModel *model,
                                 const double *features,
                                 size_t n_frames,
                                 size_t input_dim,
                                 double *out_f0,
                                 double *out_pv);

/**
 * # Safety
 * `pred` and `truth` must hold `n` values; `out` must be writable.
 */
enum F0sStatus f0s_pitch_counts(const double *pred,
                                const double *truth,
                                size_t n,
                                struct F0sPitchCounts *out);

/**
 * Gross pitch error; `F0S_STATUS_UNDEFINED` when no frame is voiced in both.
 *
 * # Safety
 * `pred` and `truth` must hold `n` values; `out` must be writable.
 */
enum F0sStatus f0s_gpe(const double *pred, const double *truth, size_t n, double *out);

/**
 * Fine pitch error.
 *
 * # Safety
 * `pred` and `truth` must hold `n` values; `out` must be writable.
 */
enum F0sStatus f0s_fpe(const double *pred, const double *truth, size_t n, double *out);

/**
 * Fraction of accurately processed frames.
 *
 * # Safety
 * `pred` and `truth` must hold `n` values; `out` must be writable.
 */
enum F0sStatus f0s_accurately_processed(const double *pred,
                                        const double *truth,
                                        size_t n,
                                        double *out);

/**
 * Pearson correlation over frames voiced in both contours.
 *
 * # Safety
 * `a` and `b` must hold `n` values; `out` must be writable.
 */
enum F0sStatus f0s_pitch_correlation(const double *a, const double *b, size_t n, double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum F0sStatus f0s_cents_error(double pred_hz, double truth_hz, double *out);

/**
 * Shift-and-scale F0 modification. `log_domain != 0` selects the log mapping.
 *
 * # Safety
 * `f0` and `out` must hold `n` values.
 */
enum F0sStatus f0s_shift_scale(const double *f0,
                               size_t n,
                               double src_mean,
                               double src_std,
                               double tgt_mean,
                               double tgt_std,
                               int32_t log_domain,
                               double *out);

/**
 * Loads a pool CSV (`speaker_id,gender,xvec_path,f0_mean,f0_std`).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum F0sStatus f0s_pool_load(const char *path, struct F0sPool **out);

/**
 * # Safety
 * `pool` must be null or a handle from [`f0s_pool_load`] not yet freed.
 */
void f0s_pool_free(struct F0sPool *pool);

/**
 * Number of pool entries, or 0 for a null handle.
 *
 * # Safety
 * `pool` must be null or a live handle.
 */
size_t f0s_pool_len(const struct F0sPool *pool);

/**
 * Selects a pseudo speaker with cosine ranking. `source_gender` is `'F'` or
 * `'M'`; `opposite != 0` targets the other gender. Writes the averaged
 * x-vector (`dim` values) and the averaged F0 statistics.
 *
 * # Safety
 * `source_xvec` and `out_xvec` must hold `dim` values; `out_mean` and
 * `out_std` must be writable.
 */
enum F0sStatus f0s_pool_select(const struct F0sPool *pool,
                               const double *source_xvec,
                               size_t dim,
                               char source_gender,
                               int32_t opposite,
                               size_t n,
                               size_t k,
                               uint64_t seed,
                               double *out_xvec,
                               double *out_mean,
                               double *out_std);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* F0SYNTH_H */
