#ifndef SOILMAP_H
#define SOILMAP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum SoilmapStatus {
  SOILMAP_STATUS_OK = 0,
  SOILMAP_STATUS_NULL_POINTER = 1,
  SOILMAP_STATUS_INVALID_ARGUMENT = 2,
  SOILMAP_STATUS_OUT_OF_BOUNDS = 3,
  SOILMAP_STATUS_INSUFFICIENT_DATA = 4,
  SOILMAP_STATUS_SINGULAR_MATRIX = 5,
  SOILMAP_STATUS_NEGATIVE_VARIANCE = 6,
  SOILMAP_STATUS_EXHAUSTED = 7,
  SOILMAP_STATUS_NUMERIC = 8,
  SOILMAP_STATUS_IO = 9,
  SOILMAP_STATUS_NOT_FOUND = 10,
  SOILMAP_STATUS_PARSE = 11,
  SOILMAP_STATUS_CONFIG = 12,
  SOILMAP_STATUS_BUFFER_TOO_SMALL = 13,
  SOILMAP_STATUS_PANIC = 14,
} SoilmapStatus;

/**
 * Field geometry and reachability mask.
 */
typedef struct SoilmapGrid SoilmapGrid;

/**
 * Ordinary kriging model for one layer.
 */
typedef struct SoilmapModel SoilmapModel;

/**
 * Completed exploration run.
 */
typedef struct SoilmapRun SoilmapRun;

/**
 * Bounded linear variogram: nugget (kPa²), range (m), sill (kPa²).
 */
typedef struct SoilmapVariogram {
  double nugget;
  double range;
  double sill;
} SoilmapVariogram;

/**
 * Headline numbers of a finished run.
 */
typedef struct SoilmapRunSummary {
  size_t steps;
  double final_rmse;
  double path_m;
  double final_kv;
} SoilmapRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library.
 */
const char *soilmap_last_error_message(void);

/**
 * Creates a grid with its origin at (0, 0). `mask` is `nx * ny` row-major
 * bytes (non-zero = reachable) or null for a fully reachable field.
 *
 * # Safety
 * `mask` must point to `mask_len` readable bytes when non-null; `out` must
 * be a valid pointer.
 */
enum SoilmapStatus soilmap_grid_new(double width_m,
                                    double height_m,
                                    double cell_size_m,
                                    const uint8_t *mask,
                                    size_t mask_len,
                                    struct SoilmapGrid **out_grid);

/**
 * # Safety
 * `grid` must come from [`soilmap_grid_new`] and not be used afterwards.
 */
void soilmap_grid_free(struct SoilmapGrid *grid);

/**
 * Writes the column and row counts and the number of reachable cells.
 *
 * # Safety
 * All pointers must be valid.
 */
enum SoilmapStatus soilmap_grid_dims(const struct SoilmapGrid *grid,
                                     size_t *nx,
                                     size_t *ny,
                                     size_t *reachable);

/**
 * Fits the bounded linear variogram to scattered values.
 *
 * # Safety
 * `xs`, `ys`, `values` must each hold `n` readable doubles.
 */
enum SoilmapStatus soilmap_fit_variogram(const double *xs,
                                         const double *ys,
                                         const double *values,
                                         size_t n,
                                         double bin_width_m,
                                         double max_lag_m,
                                         struct SoilmapVariogram *out_params);

/**
 * Builds an ordinary kriging model from `n` samples.
 *
 * # Safety
 * `xs`, `ys`, `values` must each hold `n` readable doubles; `out_model`
 * must be valid.
 */
enum SoilmapStatus soilmap_model_new(const double *xs,
                                     const double *ys,
                                     const double *values,
                                     size_t n,
                                     struct SoilmapVariogram params,
                                     struct SoilmapModel **out_model);

/**
 * # Safety
 * `model` must come from [`soilmap_model_new`] and not be used afterwards.
 */
void soilmap_model_free(struct SoilmapModel *model);

/**
 * Kriged estimate and variance at `m` target points.
 *
 * # Safety
 * `xs`, `ys` must hold `m` readable doubles; `estimates` and `variances`
 * must hold `m` writable doubles.
 */
enum SoilmapStatus soilmap_model_predict(const struct SoilmapModel *model,
                                         const double *xs,
                                         const double *ys,
                                         size_t m,
                                         double *estimates,
                                         double *variances);

/**
 * Runs one exploration strategy described by a TOML config file.
 * `strategy` is a key such as `"adaptive_greedy"`.
 *
 * # Safety
 * `config_path` and `strategy` must be NUL-terminated strings;
 * `out_run` must be valid.
 */
enum SoilmapStatus soilmap_run_explore(const char *config_path,
                                       const char *strategy,
                                       size_t budget,
                                       uint64_t seed,
                                       struct SoilmapRun **out_run);

/**
 * # Safety
 * `run` must come from [`soilmap_run_explore`] and not be used afterwards.
 */
void soilmap_run_free(struct SoilmapRun *run);

/**
 * # Safety
 * Both pointers must be valid.
 */
enum SoilmapStatus soilmap_run_summary(const struct SoilmapRun *run,
                                       struct SoilmapRunSummary *summary);

/**
 * Copies the visited cells' centre coordinates into `xs`/`ys`. Fails with
 * `BufferTooSmall` when `capacity` is below the step count, which is
 * written to `len` either way.
 *
 * # Safety
 * `xs` and `ys` must hold `capacity` writable doubles; `len` must be valid.
 */
enum SoilmapStatus soilmap_run_route(const struct SoilmapRun *run,
                                     double *xs,
                                     double *ys,
                                     size_t capacity,
                                     size_t *len);

/**
 * Writes the per-step `run.csv` table.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum SoilmapStatus soilmap_run_write_csv(const struct SoilmapRun *run, const char *path);

/**
 * Library version as a static NUL-terminated string.
 */
const char *soilmap_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOILMAP_H */
