#ifndef RRT_H
#define RRT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the non-zero values match the command line exit codes where they overlap.
 */
typedef enum RrtStatus {
  RRT_STATUS_OK = 0,
  RRT_STATUS_VALIDATION = 2,
  RRT_STATUS_IO = 3,
  RRT_STATUS_NUMERIC = 4,
  RRT_STATUS_NULL_POINTER = 6,
  RRT_STATUS_PANIC = 7,
} RrtStatus;

/**
 * Phantom of any family.
 */
typedef struct RrtPhantom RrtPhantom;

/**
 * Forward data of the tangent or equidistant family in container form.
 */
typedef struct RrtSinogram RrtSinogram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes of the last error message on this thread, excluding the terminator.
 */
size_t rrt_last_error_length(void);

/**
 * Copies the last error message into `buf` (NUL-terminated, truncated to `len`).
 * Returns the number of bytes written excluding the terminator.
 *
 * # Safety
 * `buf` must point to `len` writable bytes or be null.
 */
size_t rrt_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rrt_version(void);

/**
 * Parses a phantom JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum RrtStatus rrt_phantom_from_json(const char *json, struct RrtPhantom **out);

/**
 * Serializes a phantom to JSON; release the string with [`rrt_string_free`].
 *
 * # Safety
 * `phantom` must be a live handle; `out` must be writable.
 */
enum RrtStatus rrt_phantom_to_json(const struct RrtPhantom *phantom, char **out);

/**
 * 0 tangent, 1 equidistant, 2 pencil, -1 for a null handle.
 *
 * # Safety
 * `phantom` must be a live handle or null.
 */
int32_t rrt_phantom_family(const struct RrtPhantom *phantom);

/**
 * Evaluates the phantom at `x` (length `dim`: 3 for tangent and equidistant).
 *
 * # Safety
 * `x` must point to `dim` doubles; `re`, `im` must be writable.
 */
enum RrtStatus rrt_phantom_eval(const struct RrtPhantom *phantom,
                                const double *x,
                                size_t dim,
                                double *re,
                                double *im);

/**
 * Releases a phantom handle.
 *
 * # Safety
 * `phantom` must come from this library and not be used afterwards.
 */
void rrt_phantom_free(struct RrtPhantom *phantom);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void rrt_string_free(char *s);

/**
 * Tangent data on the Haar nodes of band limit `band_limit` at the given λ ≥ 1.
 *
 * # Safety
 * `lambdas` must point to `n_lambda` doubles; `out` must be writable.
 */
enum RrtStatus rrt_forward_tangent(const struct RrtPhantom *phantom,
                                   const double *lambdas,
                                   size_t n_lambda,
                                   size_t band_limit,
                                   struct RrtSinogram **out);

/**
 * Equidistant data on the standard geometric grid; `lambda_max <= 0` uses the
 * radial support bound.
 *
 * # Safety
 * `out` must be writable.
 */
enum RrtStatus rrt_forward_equidistant(const struct RrtPhantom *phantom,
                                       size_t n_lambda,
                                       size_t n_s,
                                       size_t n_phi,
                                       double lambda_max,
                                       struct RrtSinogram **out);

/**
 * Number of complex samples held by the sinogram, 0 for a null handle.
 *
 * # Safety
 * `sino` must be a live handle or null.
 */
size_t rrt_sinogram_len(const struct RrtSinogram *sino);

/**
 * Copies the samples as interleaved (re, im) pairs into `out` of `cap` doubles.
 *
 * # Safety
 * `out` must point to `cap` writable doubles.
 */
enum RrtStatus rrt_sinogram_values(const struct RrtSinogram *sino, double *out, size_t cap);

/**
 * Writes the sinogram container to `path`.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum RrtStatus rrt_sinogram_write(const struct RrtSinogram *sino, const char *path);

/**
 * Reads a tangent or equidistant sinogram container from `path`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum RrtStatus rrt_sinogram_read(const char *path, struct RrtSinogram **out);

/**
 * Releases a sinogram handle.
 *
 * # Safety
 * `sino` must come from this library and not be used afterwards.
 */
void rrt_sinogram_free(struct RrtSinogram *sino);

/**
 * Recovers the window coefficients of mode (m, k) from tangent data.
 * Writes up to `cap` indices and interleaved coefficient pairs; `count` receives
 * the number of coefficients available.
 *
 * # Safety
 * `indices` must hold `cap` int64 and `coeffs` `2 * cap` doubles; `count` must be writable.
 */
enum RrtStatus rrt_invert_tangent_mode(const struct RrtSinogram *sino,
                                       size_t m,
                                       int64_t k,
                                       int64_t *indices,
                                       double *coeffs,
                                       size_t cap,
                                       size_t *count);

/**
 * Runs a self-test suite; `passed` receives 1 when every check passes.
 *
 * # Safety
 * `suite` must be a NUL-terminated string; `passed` must be writable.
 */
enum RrtStatus rrt_selftest(const char *suite, int32_t *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RRT_H */
