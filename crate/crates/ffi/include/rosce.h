#ifndef ROSCE_H
#define ROSCE_H

/* Generated with cbindgen:0.29.4 */

/* Generated from the rosce-ffi crate by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Fit the orthogonalized robust estimator (`method` argument value).
#define ROSCE_METHOD_ROBUST 0

// Fit the direct joint least-squares baseline (`method` argument value).
#define ROSCE_METHOD_DIRECT_LS 1

// Result of every fallible library call.
typedef enum {
  // The call succeeded.
  ROSCE_STATUS_OK = 0,
  // A pointer was null, a length was zero or mismatched, or an argument
  // value is outside its documented range.
  ROSCE_STATUS_INVALID_ARGUMENT = 1,
  // The configuration (basis, options) is invalid.
  ROSCE_STATUS_CONFIG = 2,
  // The data are invalid: non-finite entries, bad region labels,
  // too few rows.
  ROSCE_STATUS_DATA = 3,
  // A location lies outside the declared spatial domain.
  ROSCE_STATUS_OUT_OF_DOMAIN = 4,
  // No exposure variation is left, so no effect is identifiable.
  ROSCE_STATUS_DEGENERATE_EXPOSURE = 5,
  // Some discrete region has no observations.
  ROSCE_STATUS_MISSING_REGIONS = 6,
  // A numerical routine failed to produce a usable result.
  ROSCE_STATUS_NUMERICAL = 7,
  // An internal invariant was violated; the handle states are unchanged.
  ROSCE_STATUS_PANIC = 8,
} RosceStatus;

// A pointwise bootstrap confidence band on a query grid.
typedef struct RosceBand RosceBand;

// A spatial basis configuration.
typedef struct RosceBasis RosceBasis;

// A loaded outcome/exposure/location sample.
typedef struct RosceDataset RosceDataset;

// A fitted effect surface.
typedef struct RosceModel RosceModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// The library version as a static, nul-terminated string.
const char *rosce_version(void);

// Message describing the most recent failure on this thread, or an empty
// string after a success. The pointer stays valid until this thread's next
// library call.
const char *rosce_last_error_message(void);

// Build a dataset over continuous locations. `coords` holds `n * dim`
// values, row-major (all coordinates of point 0, then point 1, ...).
//
// # Safety
// `y` and `z` must point to `n` readable doubles, `coords` to `n * dim`;
// `out` must be a valid destination for one pointer.
RosceStatus rosce_dataset_new_continuous(const double *y,
                                         const double *z,
                                         const double *coords,
                                         size_t n,
                                         size_t dim,
                                         RosceDataset **out);

// Build a dataset over `d` discrete regions; `regions` holds `n` 1-based
// labels in `1..=d`.
//
// # Safety
// `y` and `z` must point to `n` readable doubles, `regions` to `n` readable
// `uint32_t`; `out` must be a valid destination for one pointer.
RosceStatus rosce_dataset_new_discrete(const double *y,
                                       const double *z,
                                       const uint32_t *regions,
                                       size_t n,
                                       uint32_t d,
                                       RosceDataset **out);

// Release a dataset handle. Null is a no-op.
//
// # Safety
// `dataset` must be null or a pointer obtained from a dataset constructor
// that has not been freed yet.
void rosce_dataset_free(RosceDataset *dataset);

// Build a multi-resolution spline basis over a continuous box domain.
// `lower`/`upper` hold `dim` bounds per axis; level `k` contributes
// `n_components[k]^dim` components whose supports span
// `support_fractions[k]` of each axis range.
//
// # Safety
// `lower` and `upper` must point to `dim` readable doubles,
// `n_components` and `support_fractions` to `n_levels` readable elements;
// `out` must be a valid destination for one pointer.
RosceStatus rosce_basis_new_continuous(const double *lower,
                                       const double *upper,
                                       size_t dim,
                                       const size_t *n_components,
                                       const double *support_fractions,
                                       size_t n_levels,
                                       RosceBasis **out);

// Build the indicator basis over `d` discrete regions.
//
// # Safety
// `out` must be a valid destination for one pointer.
RosceStatus rosce_basis_new_discrete(uint32_t d, RosceBasis **out);

// Release a basis handle. Null is a no-op.
//
// # Safety
// `basis` must be null or a pointer obtained from a basis constructor that
// has not been freed yet.
void rosce_basis_free(RosceBasis *basis);

// Fit an effect surface. `method` is one of the `ROSCE_METHOD_*` constants:
// the robust pipeline residualizes outcome and exposure against the basis
// before the penalized effect regression, while the direct baseline runs
// joint least squares on the raw data.
//
// # Safety
// `dataset` and `basis` must be live handles; `out` must be a valid
// destination for one pointer.
RosceStatus rosce_fit(const RosceDataset *dataset,
                      const RosceBasis *basis,
                      uint32_t method,
                      RosceModel **out);

// Evaluate a fitted effect at a continuous location with `dim` coordinates.
//
// # Safety
// `model` must be a live handle, `coords` must point to `dim` readable
// doubles, and `out` must be a valid destination for one double.
RosceStatus rosce_model_effect_at(const RosceModel *model,
                                  const double *coords,
                                  size_t dim,
                                  double *out);

// Evaluate a fitted effect in a 1-based discrete region.
//
// # Safety
// `model` must be a live handle and `out` a valid destination for one
// double.
RosceStatus rosce_model_effect_in_region(const RosceModel *model, uint32_t region, double *out);

// Copy the model's basis coefficients. With a null `buffer` the call only
// reports the coefficient count through `written`; otherwise `capacity`
// must be at least that count.
//
// # Safety
// `model` must be a live handle, `written` a valid destination for one
// `size_t`, and `buffer` null or pointing to `capacity` writable doubles.
RosceStatus rosce_model_coefficients(const RosceModel *model,
                                     double *buffer,
                                     size_t capacity,
                                     size_t *written);

// Release a model handle. Null is a no-op.
//
// # Safety
// `model` must be null or a pointer obtained from `rosce_fit` that has not
// been freed yet.
void rosce_model_free(RosceModel *model);

// Fit a pointwise pivotal bootstrap confidence band with `replicates`
// resamples (at least 100) at miscoverage `alpha`. On a continuous domain
// the band is evaluated on a regular grid with `grid_points_per_axis`
// points per axis over the basis domain; on a discrete domain it covers
// every region and `grid_points_per_axis` is ignored. `refit_nuisance`
// refits the residualization inside every replicate (nonzero) or reuses
// the full-sample nuisance coefficients (zero).
//
// # Safety
// `dataset` and `basis` must be live handles; `out` must be a valid
// destination for one pointer.
RosceStatus rosce_band_fit(const RosceDataset *dataset,
                           const RosceBasis *basis,
                           uint32_t method,
                           size_t replicates,
                           double alpha,
                           uint64_t seed,
                           bool refit_nuisance,
                           size_t grid_points_per_axis,
                           RosceBand **out);

// Number of grid points a band was evaluated on (zero for a null handle).
//
// # Safety
// `band` must be null or a live handle.
size_t rosce_band_len(const RosceBand *band);

// Values per grid point written by `rosce_band_grid`: the coordinate count
// on a continuous domain, 1 on a discrete one (zero for a null handle).
//
// # Safety
// `band` must be null or a live handle.
size_t rosce_band_grid_dim(const RosceBand *band);

// Copy the band's grid, row-major: continuous coordinates, or 1-based
// region labels as doubles. Requires `capacity >= len * grid_dim`.
//
// # Safety
// `band` must be a live handle and `buffer` must point to `capacity`
// writable doubles.
RosceStatus rosce_band_grid(const RosceBand *band, double *buffer, size_t capacity);

// Copy the band's point estimates and interval endpoints. Each non-null
// buffer receives `len` values; requires `capacity >= len`.
//
// # Safety
// `band` must be a live handle; each of `point`, `lower`, `upper` must be
// null or point to `capacity` writable doubles.
RosceStatus rosce_band_values(const RosceBand *band,
                              double *point,
                              double *lower,
                              double *upper,
                              size_t capacity);

// Release a band handle. Null is a no-op.
//
// # Safety
// `band` must be null or a pointer obtained from `rosce_band_fit` that has
// not been freed yet.
void rosce_band_free(RosceBand *band);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROSCE_H */
