#ifndef BMLAB_H
#define BMLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum BmStatus {
  BM_STATUS_OK = 0,
  BM_STATUS_INVALID_ARGUMENT = 1,
  BM_STATUS_DIMENSION_MISMATCH = 2,
  BM_STATUS_RESOURCE_GUARD = 3,
  BM_STATUS_CONSTRUCTION_FAILED = 4,
  BM_STATUS_UNSUPPORTED = 5,
  BM_STATUS_NON_CONVERGENCE = 6,
  BM_STATUS_VALIDATION = 7,
  BM_STATUS_IO = 8,
  BM_STATUS_JSON = 9,
  BM_STATUS_NULL_POINTER = 10,
  BM_STATUS_UTF8 = 11,
  BM_STATUS_PANIC = 12,
} BmStatus;

/**
 * Separated unitary family handle.
 */
typedef struct BmFamily BmFamily;

/**
 * Sign set handle.
 */
typedef struct BmSignSet BmSignSet;

/**
 * Normed space handle.
 */
typedef struct BmSpace BmSpace;

/**
 * Unitary tuple handle.
 */
typedef struct BmTuple BmTuple;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *bm_last_error(void);

void bm_clear_error(void);

/**
 * Library version as a static string.
 */
const char *bm_version(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void bm_string_free(char *s);

/**
 * `2 exp(−θ²n/2)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum BmStatus bm_hoeffding_tail(double theta, size_t n, double *out);

/**
 * Exact `P{|Σ ωⱼ| > θn}`.
 *
 * # Safety
 * `out` must be writable.
 */
enum BmStatus bm_exact_sign_tail(size_t n, double theta, double *out);

/**
 * Greedy θ-separated sign set: exhaustive when `samples` is 0, otherwise
 * over `samples` seeded candidates.
 *
 * # Safety
 * `out` must be writable; the handle is released with [`bm_signset_free`].
 */
enum BmStatus bm_signset_greedy(size_t n,
                                double theta,
                                size_t samples,
                                uint64_t seed,
                                struct BmSignSet **out);

/**
 * # Safety
 * `set` is NULL or a live handle.
 */
size_t bm_signset_len(const struct BmSignSet *set);

/**
 * # Safety
 * `set` is NULL or a live handle.
 */
size_t bm_signset_dim(const struct BmSignSet *set);

/**
 * Largest `|⟨s, t⟩|` over distinct members.
 *
 * # Safety
 * `set` is a live handle and `out` writable.
 */
enum BmStatus bm_signset_max_correlation(const struct BmSignSet *set, int64_t *out);

/**
 * Copies member `index` into `out[0..len]`; `len` must equal the dimension.
 *
 * # Safety
 * `set` is a live handle and `out` has room for `len` values.
 */
enum BmStatus bm_signset_vector(const struct BmSignSet *set, size_t index, int8_t *out, size_t len);

/**
 * # Safety
 * `set` is NULL or a handle not yet freed.
 */
void bm_signset_free(struct BmSignSet *set);

/**
 * # Safety
 * `out` must be writable.
 */
enum BmStatus bm_space_linf(size_t dim, struct BmSpace **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum BmStatus bm_space_l1(size_t dim, struct BmSpace **out);

/**
 * # Safety
 * `out` must be writable.
 */
enum BmStatus bm_space_l2(size_t dim, struct BmSpace **out);

/**
 * Norm `max_k |⟨f_k, a⟩|` over `count` functionals stored row-major in
 * `functionals` (`count * dim` values).
 *
 * # Safety
 * `functionals` holds `count * dim` readable values; `out` is writable.
 */
enum BmStatus bm_space_polytopal(size_t dim,
                                 const double *functionals,
                                 size_t count,
                                 struct BmSpace **out);

/**
 * `E_x` for the members of `set` listed in `x`.
 *
 * # Safety
 * `set` is a live handle, `x` holds `len` readable indices, `out` is writable.
 */
enum BmStatus bm_space_make_ex(const struct BmSignSet *set,
                               const size_t *x,
                               size_t len,
                               struct BmSpace **out);

/**
 * # Safety
 * `space` is NULL or a live handle.
 */
size_t bm_space_dim(const struct BmSpace *space);

/**
 * # Safety
 * `space` is a live handle, `a` holds `len` values, `out` is writable.
 */
enum BmStatus bm_space_norm(const struct BmSpace *space, const double *a, size_t len, double *out);

/**
 * # Safety
 * `space` is NULL or a handle not yet freed.
 */
void bm_space_free(struct BmSpace *space);

/**
 * Two-dimensional distance oracle: `lower ≤ d(E, F) ≤ value`. When `map`
 * is not NULL it receives the 2×2 map attaining `value`, row-major.
 *
 * # Safety
 * Handles are live, `value` and `lower` writable, `map` NULL or room for 4.
 */
enum BmStatus bm_distance_exact_2d(const struct BmSpace *e,
                                   const struct BmSpace *f,
                                   double tol,
                                   double *value,
                                   double *lower,
                                   double *map);

/**
 * Certified upper bound on `d(E, F)` from John positions and local search.
 *
 * # Safety
 * Handles are live and `value` writable.
 */
enum BmStatus bm_distance_upper(const struct BmSpace *e,
                                const struct BmSpace *f,
                                size_t effort,
                                uint64_t seed,
                                double *value);

/**
 * Haar-random tuple of `n` unitaries of size `big_n`.
 *
 * # Safety
 * `out` must be writable; release with [`bm_tuple_free`].
 */
enum BmStatus bm_tuple_haar(size_t n, size_t big_n, uint64_t seed, struct BmTuple **out);

/**
 * # Safety
 * `t` is NULL or a live handle.
 */
size_t bm_tuple_n(const struct BmTuple *t);

/**
 * # Safety
 * `t` is NULL or a live handle.
 */
size_t bm_tuple_big_n(const struct BmTuple *t);

/**
 * Expander defect in `[0, 1]`; `flagged` (may be NULL) reports whether the
 * two power-iteration starts disagreed.
 *
 * # Safety
 * `t` is live, `out` writable, `flagged` NULL or writable.
 */
enum BmStatus bm_tuple_defect(const struct BmTuple *t, double *out, bool *flagged);

/**
 * `‖Σ sⱼ ⊗ t̄ⱼ‖`.
 *
 * # Safety
 * Handles are live and `out` writable.
 */
enum BmStatus bm_tuple_overlap(const struct BmTuple *s, const struct BmTuple *t, double *out);

/**
 * Copies unitary `j` as `2·N²` interleaved values.
 *
 * # Safety
 * `t` is live and `out` has room for `len` values.
 */
enum BmStatus bm_tuple_matrix(const struct BmTuple *t, size_t j, double *out, size_t len);

/**
 * # Safety
 * `t` is NULL or a handle not yet freed.
 */
void bm_tuple_free(struct BmTuple *t);

/**
 * Greedy δ-separated family of tuples with defect at most ε.
 *
 * # Safety
 * `out` must be writable; release with [`bm_family_free`].
 */
enum BmStatus bm_family_sample(size_t n,
                               size_t big_n,
                               double epsilon,
                               double delta,
                               size_t max_samples,
                               uint64_t seed,
                               struct BmFamily **out);

/**
 * # Safety
 * `fam` is NULL or a live handle.
 */
size_t bm_family_len(const struct BmFamily *fam);

/**
 * New tuple handle holding a copy of member `index`.
 *
 * # Safety
 * `fam` is live and `out` writable.
 */
enum BmStatus bm_family_member(const struct BmFamily *fam, size_t index, struct BmTuple **out);

/**
 * Recomputes defects and overlaps and checks membership and separation.
 *
 * # Safety
 * `fam` is live and `ok` writable.
 */
enum BmStatus bm_family_verify(const struct BmFamily *fam, bool *ok);

/**
 * # Safety
 * `fam` is NULL or a handle not yet freed.
 */
void bm_family_free(struct BmFamily *fam);

/**
 * Whether the packing lower bound at `(n, θ, r)` reaches its target;
 * `ln_log_packing` (may be NULL) receives the log of the log packing bound.
 *
 * # Safety
 * `passes` writable, `ln_log_packing` NULL or writable.
 */
enum BmStatus bm_lower_chain(uint64_t n,
                             double theta,
                             double r,
                             bool *passes,
                             double *ln_log_packing);

/**
 * Runs an experiment config given as JSON and returns the report as JSON.
 *
 * # Safety
 * `config_json` is a NUL-terminated string; `report_json` and `all_passed`
 * are writable. Release the report with [`bm_string_free`].
 */
enum BmStatus bm_run_config_json(const char *config_json, char **report_json, bool *all_passed);

/**
 * Re-checks every certificate of a JSON report; failures are described by
 * [`bm_last_error`] even though the call itself succeeds.
 *
 * # Safety
 * `report_json` is a NUL-terminated string and `ok` writable.
 */
enum BmStatus bm_verify_report_json(const char *report_json, bool *ok);

/**
 * Built-in config `name` as JSON.
 *
 * # Safety
 * `name` is a NUL-terminated string and `out` writable.
 */
enum BmStatus bm_preset_json(const char *name, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BMLAB_H */
