#ifndef METRIC_GFF_H
#define METRIC_GFF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MgffStatus {
  MGFF_STATUS_OK = 0,
  MGFF_STATUS_IO = 1,
  MGFF_STATUS_CONFIG = 2,
  MGFF_STATUS_CAPACITY = 3,
  MGFF_STATUS_NUMERIC = 4,
  MGFF_STATUS_DOMAIN = 5,
  MGFF_STATUS_NULL_POINTER = 6,
  MGFF_STATUS_PANIC = 7,
} MgffStatus;

typedef enum MgffGreenMode {
  MGFF_GREEN_MODE_AUTO = 0,
  MGFF_GREEN_MODE_DENSE = 1,
  MGFF_GREEN_MODE_BANDED = 2,
} MgffGreenMode;

typedef enum MgffSampler {
  MGFF_SAMPLER_DIRICHLET = 0,
  MGFF_SAMPLER_INFINITE_RESTRICTED = 1,
  MGFF_SAMPLER_DIRICHLET_PROXY = 2,
} MgffSampler;

/**
 * Opaque field sample.
 */
typedef struct MgffField MgffField;

/**
 * Opaque Green's function table.
 */
typedef struct MgffGreenTable MgffGreenTable;

/**
 * Opaque metric level set.
 */
typedef struct MgffLevelSet MgffLevelSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *mgff_last_error(void);

/**
 * Green's function of the box `V_n` in `Z^d` killed on its boundary.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum MgffStatus mgff_green_dirichlet(size_t d,
                                     size_t n,
                                     enum MgffGreenMode mode,
                                     struct MgffGreenTable **out);

/**
 * `G(u, v)` for coordinate arrays of length `d`.
 *
 * # Safety
 * `table` must come from [`mgff_green_dirichlet`]; `u` and `v` must hold `d`
 * entries; `out` must be valid.
 */
enum MgffStatus mgff_green_get(const struct MgffGreenTable *table,
                               const int64_t *u,
                               const int64_t *v,
                               double *out);

/**
 * # Safety
 * `table` must come from [`mgff_green_dirichlet`] or be null.
 */
void mgff_green_free(struct MgffGreenTable *table);

/**
 * `G(0, x)` on `Z^d`, `d >= 3`.
 *
 * # Safety
 * `x` must hold `d` entries and `out` must be valid.
 */
enum MgffStatus mgff_green_infinite(size_t d, const int64_t *x, double *out);

/**
 * One field sample on `V_n` from replica stream `(seed, replica)`. `kappa` is
 * read only for the proxy sampler.
 *
 * # Safety
 * `out` must be valid.
 */
enum MgffStatus mgff_field_sample(size_t d,
                                  size_t n,
                                  enum MgffSampler sampler,
                                  double kappa,
                                  uint64_t seed,
                                  uint64_t replica,
                                  struct MgffField **out);

/**
 * Number of vertices of the field's box.
 *
 * # Safety
 * `field` must come from [`mgff_field_sample`].
 */
size_t mgff_field_len(const struct MgffField *field);

/**
 * Copies the field values in vertex index order into `buf`.
 *
 * # Safety
 * `buf` must hold `len` doubles, `len >= mgff_field_len(field)`.
 */
enum MgffStatus mgff_field_values(const struct MgffField *field, double *buf, size_t len);

/**
 * # Safety
 * `field` must come from [`mgff_field_sample`] or be null.
 */
void mgff_field_free(struct MgffField *field);

/**
 * Level set of `field` at `h` with bridge uniforms from stream `(seed, replica)`.
 *
 * # Safety
 * `field` must come from [`mgff_field_sample`]; `out` must be valid.
 */
enum MgffStatus mgff_level_set_new(const struct MgffField *field,
                                   double h,
                                   uint64_t seed,
                                   uint64_t replica,
                                   struct MgffLevelSet **out);

/**
 * Whether the origin connects to the box boundary.
 *
 * # Safety
 * `ls` must come from [`mgff_level_set_new`]; `out` must be valid.
 */
enum MgffStatus mgff_level_set_origin_connected(const struct MgffLevelSet *ls, bool *out);

/**
 * Hop distance between two vertices inside the level set, `-1` if they are
 * not connected.
 *
 * # Safety
 * `a` and `b` must hold `d` entries; `out` must be valid.
 */
enum MgffStatus mgff_level_set_chemical_distance(const struct MgffLevelSet *ls,
                                                 const int64_t *a,
                                                 const int64_t *b,
                                                 int64_t *out);

/**
 * # Safety
 * `ls` must come from [`mgff_level_set_new`] or be null.
 */
void mgff_level_set_free(struct MgffLevelSet *ls);

/**
 * `P(τ <= T)` for the first time Brownian motion meets `m t − b`.
 *
 * # Safety
 * `out` must be valid.
 */
enum MgffStatus mgff_drift_hit_cdf(double m, double b, double t, double *out);

/**
 * `f(x, y)`.
 *
 * # Safety
 * `out` must be valid.
 */
enum MgffStatus mgff_f_bound(double x, double y, double *out);

/**
 * `g(x, y)`.
 *
 * # Safety
 * `out` must be valid.
 */
enum MgffStatus mgff_g_bound(double x, double y, double *out);

/**
 * Supercritical limit at level `−h` for variance `sigma2`.
 *
 * # Safety
 * `out` must be valid.
 */
enum MgffStatus mgff_supercritical_limit(double h, double sigma2, double *out);

/**
 * `1 − exp(−(a−h)(b−h)/d)` when both endpoints exceed `h`, else `0`.
 */
double mgff_edge_open_prob(double a, double b, double h, size_t d);

/**
 * Runs a JSON experiment config and returns the CSV text in `out_csv`, to be
 * released with [`mgff_string_free`]. Wall times are left empty when
 * `wall_time` is false.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out_csv` must be valid.
 */
enum MgffStatus mgff_run_config(const char *config_json, bool wall_time, char **out_csv);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void mgff_string_free(char *s);

/**
 * JSON description of `σ_d²` and `c_d`, released with [`mgff_string_free`].
 *
 * # Safety
 * `out` must be valid.
 */
enum MgffStatus mgff_lattice_constants(size_t d, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* METRIC_GFF_H */
