#ifndef RATENET_H
#define RATENET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RatenetStatus {
  RATENET_STATUS_OK = 0,
  RATENET_STATUS_NULL_POINTER = 1,
  RATENET_STATUS_INVALID_INPUT = 2,
  RATENET_STATUS_RUNTIME = 3,
  RATENET_STATUS_BUFFER_TOO_SMALL = 4,
  RATENET_STATUS_PANIC = 5,
} RatenetStatus;

/**
 * Parsed configuration: model parameters, Λ and experiment settings.
 */
typedef struct RatenetConfig RatenetConfig;

/**
 * Solved limit law for one configuration.
 */
typedef struct RatenetLimitLaw RatenetLimitLaw;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message (NUL-terminated, truncated to `len - 1` bytes) and
 * returns the full message length in bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t ratenet_last_error(char *buf, size_t len);

/**
 * NUL-terminated library version; static storage.
 */
const char *ratenet_version(void);

/**
 * Parses a JSON configuration document.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string; `out` must be a valid pointer.
 */
enum RatenetStatus ratenet_config_from_json(const char *json, struct RatenetConfig **out);

/**
 * # Safety
 * `cfg` must be null or a handle from [`ratenet_config_from_json`] not yet freed.
 */
void ratenet_config_free(struct RatenetConfig *cfg);

/**
 * Time horizon T of the configuration, or 0 for a null handle.
 *
 * # Safety
 * `cfg` must be null or a live config handle.
 */
size_t ratenet_config_horizon(const struct RatenetConfig *cfg);

/**
 * Validates Λ on a `grid`×`grid` frequency grid and on the DFT grids of the
 * configured sizes. Writes 1/0 to `valid` and the smallest spectrum value seen.
 *
 * # Safety
 * `cfg` must be a live config handle; `valid` and `min_spectrum` valid pointers.
 */
enum RatenetStatus ratenet_validate_lambda(const struct RatenetConfig *cfg,
                                           size_t grid,
                                           int32_t *valid,
                                           double *min_spectrum);

/**
 * Draws an N×N weight matrix into `out` (row-major, row i = first index of J_ij,
 * indices centered from -n to n).
 *
 * # Safety
 * `cfg` must be a live config handle; `out` must point to `len` writable doubles.
 */
enum RatenetStatus ratenet_sample_weights(const struct RatenetConfig *cfg,
                                          size_t n,
                                          uint64_t seed,
                                          double *out,
                                          size_t len);

/**
 * Solves the limit-law recursion with the configured quadrature settings.
 *
 * # Safety
 * `cfg` must be a live config handle; `out` must be a valid pointer.
 */
enum RatenetStatus ratenet_solve_limit(const struct RatenetConfig *cfg,
                                       struct RatenetLimitLaw **out);

/**
 * # Safety
 * `law` must be null or a handle from [`ratenet_solve_limit`] not yet freed.
 */
void ratenet_limit_free(struct RatenetLimitLaw *law);

/**
 * Copies c_e (T doubles) into `out`.
 *
 * # Safety
 * `law` must be a live handle; `out` must point to `len` writable doubles.
 */
enum RatenetStatus ratenet_limit_mean(const struct RatenetLimitLaw *law, double *out, size_t len);

/**
 * Copies the lag-`lag` block of K_e (T×T, row-major) into `out`; zero outside
 * the support radius.
 *
 * # Safety
 * `law` must be a live handle; `out` must point to `len` writable doubles.
 */
enum RatenetStatus ratenet_limit_cov(const struct RatenetLimitLaw *law,
                                     int64_t lag,
                                     double *out,
                                     size_t len);

/**
 * Evaluates H at the limit law itself; the result should vanish up to quadrature error.
 *
 * # Safety
 * `cfg` and `law` must be live handles from the same configuration; `h` a valid pointer.
 */
enum RatenetStatus ratenet_rate_at_limit(const struct RatenetConfig *cfg,
                                         const struct RatenetLimitLaw *law,
                                         double *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RATENET_H */
