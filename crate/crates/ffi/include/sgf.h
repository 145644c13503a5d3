#ifndef SGF_H
#define SGF_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SgfStatus {
  SGF_STATUS_OK = 0,
  SGF_STATUS_NULL_POINTER = 1,
  SGF_STATUS_CONFIG = 2,
  SGF_STATUS_GEOMETRY_MISMATCH = 3,
  SGF_STATUS_DOMAIN = 4,
  SGF_STATUS_RUNTIME = 5,
  SGF_STATUS_IO = 6,
  SGF_STATUS_PARSE = 7,
  SGF_STATUS_PANIC = 8,
} SgfStatus;

/**
 * Which field of a snapshot to fetch from a run.
 */
typedef enum SgfFieldKind {
  SGF_FIELD_KIND_RAW = 0,
  SGF_FIELD_KIND_SMOOTHED = 1,
  SGF_FIELD_KIND_REFERENCE = 2,
} SgfFieldKind;

/**
 * A Green's function sampled on a uniform grid.
 */
typedef struct SgfField SgfField;

/**
 * The result of an estimation run.
 */
typedef struct SgfRun SgfRun;

/**
 * Coefficients of the linearly accelerating groundwater model.
 */
typedef struct SgfGroundwaterParams {
  double d0;
  double v0;
  double a1;
  double a2;
  double b1;
  double b2;
  double psi1;
  double psi2;
  double gamma;
} SgfGroundwaterParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (nul-terminated,
 * truncated to `len`). Returns the full message length excluding the nul.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t sgf_last_error_message(char *buf, size_t len);

/**
 * Free-space Green's function of isotropic diffusion.
 *
 * # Safety
 * `result` must be null or writable.
 */
enum SgfStatus sgf_gf_free_space(double x,
                                 double y,
                                 double xp,
                                 double yp,
                                 double tau,
                                 double d0,
                                 double *result);

/**
 * Green's function of a rectangle `[x0, x1] x [y0, y1]` with absorbing walls.
 *
 * # Safety
 * `extents` must be null or point to 4 values; `result` must be null or writable.
 */
enum SgfStatus sgf_gf_rectangle_dirichlet(double x,
                                          double y,
                                          double xp,
                                          double yp,
                                          double tau,
                                          double d0,
                                          const double *extents,
                                          double *result);

/**
 * Green's function of a disk with an absorbing wall.
 *
 * # Safety
 * `result` must be null or writable.
 */
enum SgfStatus sgf_gf_disk_dirichlet(double x,
                                     double y,
                                     double xp,
                                     double yp,
                                     double tau,
                                     double d0,
                                     double cx,
                                     double cy,
                                     double radius,
                                     double *result);

/**
 * Groundwater Green's function, response at `(x, y, t)` to an impulse at `(xp, yp, tp)`.
 *
 * # Safety
 * `params` must be null or valid; `result` must be null or writable.
 */
enum SgfStatus sgf_gf_groundwater(double x,
                                  double y,
                                  double t,
                                  double xp,
                                  double yp,
                                  double tp,
                                  const struct SgfGroundwaterParams *params,
                                  double *result);

/**
 * Time step whose diffusion length covers one cell of area `da`.
 *
 * # Safety
 * `result` must be null or writable.
 */
enum SgfStatus sgf_recommended_dt(double da, double d0, double *result);

/**
 * # Safety
 * `result` must be null or writable.
 */
enum SgfStatus sgf_predicted_variation(double d0,
                                       double dt,
                                       double dx,
                                       double dy,
                                       uint64_t n_walkers,
                                       double *result);

/**
 * # Safety
 * `result` must be null or writable.
 */
enum SgfStatus sgf_walkers_for_variation(double target,
                                         double d0,
                                         double dt,
                                         double dx,
                                         double dy,
                                         uint64_t *result);

/**
 * Creates a field from `nx * ny` row-major values (rows bottom to top).
 *
 * # Safety
 * `extents` must point to 4 values, `values` to `nx * ny` values, `field` must be writable.
 */
enum SgfStatus sgf_field_new(const double *extents,
                             size_t nx,
                             size_t ny,
                             double time,
                             const double *values,
                             struct SgfField **field);

/**
 * Reads a field CSV.
 *
 * # Safety
 * `file` must be a nul-terminated path; `field` must be writable.
 */
enum SgfStatus sgf_field_read(const char *file, struct SgfField **field);

/**
 * Writes `<dir>/<name>.csv` and its JSON sidecar.
 *
 * # Safety
 * `field` must be a live handle; `dir` and `name` nul-terminated strings.
 */
enum SgfStatus sgf_field_write(const struct SgfField *field, const char *dir, const char *name);

/**
 * Releases a field handle. Null is ignored.
 *
 * # Safety
 * `field` must be null or a handle not yet freed.
 */
void sgf_field_free(struct SgfField *field);

/**
 * # Safety
 * `field` must be a live handle; outputs must be writable.
 */
enum SgfStatus sgf_field_dims(const struct SgfField *field, size_t *nx, size_t *ny, double *time);

/**
 * Copies the values (row-major, rows bottom to top) into `values`, which holds `len` entries.
 *
 * # Safety
 * `field` must be a live handle; `values` must point to `len` writable values.
 */
enum SgfStatus sgf_field_values(const struct SgfField *field, double *values, size_t len);

/**
 * Largest relative error over cells where `exact > floor_fraction * max(exact)`.
 *
 * # Safety
 * Handles must be live; `emax` must be writable, `masked_cells` may be null.
 */
enum SgfStatus sgf_emax(const struct SgfField *estimate,
                        const struct SgfField *exact,
                        double floor_fraction,
                        double *emax,
                        size_t *masked_cells);

/**
 * Mean absolute deviation between an estimate and a reference.
 *
 * # Safety
 * Handles must be live; `result` must be writable.
 */
enum SgfStatus sgf_sigma_g(const struct SgfField *estimate,
                           const struct SgfField *reference,
                           double *result);

/**
 * Runs the estimation described by a TOML config (or JSON manifest).
 *
 * # Safety
 * `config` must be a nul-terminated path; `run` must be writable.
 */
enum SgfStatus sgf_run_estimate(const char *config, struct SgfRun **run);

/**
 * # Safety
 * `run` must be a live handle; `count` writable.
 */
enum SgfStatus sgf_run_snapshot_count(const struct SgfRun *run, size_t *count);

/**
 * Copies one field of snapshot `index` into a new handle. Fields that were
 * not produced (no smoothing or no reference configured) give `SGF_STATUS_CONFIG`.
 *
 * # Safety
 * `run` must be a live handle; `field` writable.
 */
enum SgfStatus sgf_run_snapshot_field(const struct SgfRun *run,
                                      size_t index,
                                      enum SgfFieldKind kind,
                                      struct SgfField **field);

/**
 * Releases a run handle. Null is ignored.
 *
 * # Safety
 * `run` must be null or a handle not yet freed.
 */
void sgf_run_free(struct SgfRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SGF_H */
