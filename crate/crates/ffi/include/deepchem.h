#ifndef DEEPCHEM_H
#define DEEPCHEM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum DcStatus {
  DC_STATUS_OK = 0,
  DC_STATUS_NULL_POINTER = 1,
  DC_STATUS_INVALID_ARGUMENT = 2,
  DC_STATUS_IO = 3,
  DC_STATUS_FORMAT = 4,
  DC_STATUS_COMPUTE = 5,
  DC_STATUS_BUFFER_TOO_SMALL = 6,
  DC_STATUS_PANIC = 7,
} DcStatus;

/**
 * A loaded network plus the archive's normalization constants.
 */
typedef struct DcGraph DcGraph;

/**
 * A fitted PLS1 model.
 */
typedef struct DcPlsModel DcPlsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *dc_version(void);

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library on the same
 * thread.
 */
const char *dc_last_error_message(void);

/**
 * Feature length of a tap name, or 0 for an unknown tap.
 *
 * # Safety
 * `tap` must be null or a valid NUL-terminated string.
 */
size_t dc_tap_len(const char *tap);

/**
 * Loads an `NNW1` archive and builds the network.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be writable.
 */
enum DcStatus dc_graph_load(const char *path, struct DcGraph **out);

/**
 * # Safety
 * `graph` must be null or a handle from [`dc_graph_load`] not yet freed.
 */
void dc_graph_free(struct DcGraph *graph);

/**
 * Resizes and normalizes an interleaved 8-bit RGB image, runs the network
 * to `tap` and writes the flattened activations into `out`.
 *
 * # Safety
 * `rgb` must hold `3 * width * height` bytes; `out` must hold `out_len`
 * floats; `tap` must be a NUL-terminated string.
 */
enum DcStatus dc_extract(const struct DcGraph *graph,
                         const uint8_t *rgb,
                         size_t width,
                         size_t height,
                         const char *tap,
                         float *out,
                         size_t out_len);

/**
 * Fits PLS1 on row-major `x` (n x p) and `y` (n).
 *
 * # Safety
 * `x` must hold `n * p` doubles, `y` must hold `n`; `out` must be writable.
 */
enum DcStatus dc_pls_fit(const double *x,
                         size_t n,
                         size_t p,
                         const double *y,
                         size_t n_lv,
                         struct DcPlsModel **out);

/**
 * Achieved number of latent variables, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t dc_pls_n_lv(const struct DcPlsModel *model);

/**
 * Predicts `n` rows of row-major `x` (n x p) into `out`.
 *
 * # Safety
 * `x` must hold `n * p` doubles; `out` must hold `out_len` doubles.
 */
enum DcStatus dc_pls_predict(const struct DcPlsModel *model,
                             const double *x,
                             size_t n,
                             size_t p,
                             double *out,
                             size_t out_len);

/**
 * Cross-validated RMSECV for orders `1..=a_max` into `rmsecv_out`.
 * `k = 0` selects leave-one-out; otherwise seeded k-fold.
 *
 * # Safety
 * `x` must hold `n * p` doubles, `y` must hold `n`; `rmsecv_out` must hold
 * `out_len` doubles.
 */
enum DcStatus dc_pls_cv(const double *x,
                        size_t n,
                        size_t p,
                        const double *y,
                        size_t a_max,
                        size_t k,
                        uint64_t seed,
                        double *rmsecv_out,
                        size_t out_len);

/**
 * Writes the model as a `PLS1` file.
 *
 * # Safety
 * `model` must be a live handle; `path` a NUL-terminated string.
 */
enum DcStatus dc_pls_save(const struct DcPlsModel *model, const char *path);

/**
 * Reads a `PLS1` file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DcStatus dc_pls_load(const char *path, struct DcPlsModel **out);

/**
 * # Safety
 * `model` must be null or a live handle not yet freed.
 */
void dc_pls_free(struct DcPlsModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEEPCHEM_H */
