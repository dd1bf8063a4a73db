/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef FICO_H
#define FICO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

enum FicoDirection
#ifdef __cplusplus
  : uint32_t
#endif // __cplusplus
 {
  FICO_DIRECTION_I2T = 0,
  FICO_DIRECTION_T2I = 1,
};
#ifndef __cplusplus
typedef uint32_t FicoDirection;
#endif // __cplusplus

enum FicoDtype
#ifdef __cplusplus
  : uint32_t
#endif // __cplusplus
 {
  FICO_DTYPE_F32 = 0,
  FICO_DTYPE_F64 = 1,
};
#ifndef __cplusplus
typedef uint32_t FicoDtype;
#endif // __cplusplus

// Values accepted wherever a `measure` argument is taken.
enum FicoMeasure
#ifdef __cplusplus
  : uint32_t
#endif // __cplusplus
 {
  FICO_MEASURE_HAMMING = 0,
  FICO_MEASURE_INNER_PRODUCT = 1,
  FICO_MEASURE_COSINE = 2,
  FICO_MEASURE_EUCLIDEAN = 3,
};
#ifndef __cplusplus
typedef uint32_t FicoMeasure;
#endif // __cplusplus

typedef enum FicoStatus {
  FICO_STATUS_OK = 0,
  FICO_STATUS_NULL_POINTER = 1,
  FICO_STATUS_INVALID_ARGUMENT = 2,
  FICO_STATUS_IO = 3,
  FICO_STATUS_FORMAT = 4,
  FICO_STATUS_VALIDATION = 5,
  FICO_STATUS_DIMENSION_MISMATCH = 6,
  FICO_STATUS_DIGEST_MISMATCH = 7,
  FICO_STATUS_PANIC = 8,
} FicoStatus;

typedef struct FicoCodes FicoCodes;

typedef struct FicoEmbeddings FicoEmbeddings;

typedef struct FicoGroups FicoGroups;

typedef struct FicoIndex FicoIndex;

typedef struct FicoLabels FicoLabels;

// Search results with the candidate IDs needed to resolve columns.
typedef struct FicoRanked FicoRanked;

typedef struct FicoReport FicoReport;

typedef struct FicoSim FicoSim;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer is
// valid until the next failing call on the same thread.
const char *fico_last_error(void);

// Library version as a static NUL-terminated string.
const char *fico_version(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must come from this library and not have been freed.
void fico_string_free(char *s);

// Copies `n * dim` row-major f32 values. `ids` may be NULL for 0..n.
//
// # Safety
// `ids` (if non-NULL) must hold `n` values and `values` `n * dim`.
enum FicoStatus fico_embeddings_new_f32(const uint64_t *ids,
                                        size_t n,
                                        size_t dim,
                                        const float *values,
                                        struct FicoEmbeddings **out);

// Reads an fvecs (`dtype` 0) or dvecs (`dtype` 1) file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum FicoStatus fico_embeddings_read(const char *path_,
                                     uint32_t dtype_,
                                     struct FicoEmbeddings **out);

// # Safety
// `e` must be a live handle or NULL; `n` and `dim` must be writable.
enum FicoStatus fico_embeddings_shape(const struct FicoEmbeddings *e, size_t *n, size_t *dim);

// # Safety
// `e` must be a live handle or NULL.
void fico_embeddings_free(struct FicoEmbeddings *e);

// Copies `n` codes of `bits` bits, each `ceil(bits / 64)` LSB-first words.
//
// # Safety
// `ids` (if non-NULL) must hold `n` values and `words` the packed codes.
enum FicoStatus fico_codes_new(const uint64_t *ids,
                               size_t n,
                               size_t bits,
                               const uint64_t *words,
                               struct FicoCodes **out);

// Reads a packed bvecs file of `bits`-bit codes.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum FicoStatus fico_codes_read(const char *path_, size_t bits, struct FicoCodes **out);

// # Safety
// `c` must be a live handle or NULL.
void fico_codes_free(struct FicoCodes *c);

// Hamming distance between two codes of `words` 64-bit words each.
//
// # Safety
// `a` and `b` must hold `words` values; `out` must be writable.
enum FicoStatus fico_hamming(const uint64_t *a, const uint64_t *b, size_t words, uint32_t *out);

// Dense query x candidate similarity under `measure` (a `FicoMeasure`).
//
// # Safety
// Handles must be live; `out` must be writable.
enum FicoStatus fico_pairwise_dense(const struct FicoEmbeddings *queries,
                                    const struct FicoEmbeddings *candidates,
                                    uint32_t measure_,
                                    struct FicoSim **out);

// Code similarity: Hamming, or a dense measure over the ±1 view.
//
// # Safety
// Handles must be live; `out` must be writable.
enum FicoStatus fico_pairwise_codes(const struct FicoCodes *queries,
                                    const struct FicoCodes *candidates,
                                    uint32_t measure_,
                                    struct FicoSim **out);

// Wraps `n_queries * n_candidates` row-major scores.
//
// # Safety
// ID arrays (if non-NULL) and `scores` must have the stated lengths.
enum FicoStatus fico_sim_new(const uint64_t *query_ids,
                             size_t n_queries,
                             const uint64_t *candidate_ids,
                             size_t n_candidates,
                             const float *scores,
                             struct FicoSim **out);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum FicoStatus fico_sim_read(const char *path_, struct FicoSim **out);

// # Safety
// `sim` must be live; `path` a NUL-terminated string.
enum FicoStatus fico_sim_write(const struct FicoSim *sim, const char *path_);

// Shape and a borrowed pointer to the row-major scores, valid while `sim` lives.
//
// # Safety
// `sim` must be live; out-pointers must be writable.
enum FicoStatus fico_sim_scores(const struct FicoSim *sim,
                                size_t *n_queries,
                                size_t *n_candidates,
                                const float **scores);

// # Safety
// `s` must be a live handle or NULL.
void fico_sim_free(struct FicoSim *s);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum FicoStatus fico_groups_read(const char *path_, struct FicoGroups **out);

// # Safety
// `g` must be a live handle or NULL.
void fico_groups_free(struct FicoGroups *g);

// Reads labels-jsonl; `num_categories` 0 infers it from the data.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum FicoStatus fico_labels_read(const char *path_,
                                 uint32_t num_categories,
                                 struct FicoLabels **out);

// # Safety
// `l` must be a live handle or NULL.
void fico_labels_free(struct FicoLabels *l);

// Instance-level recall at each of `ks`; `direction` is a `FicoDirection`.
//
// # Safety
// Handles must be live, `ks` must hold `n_ks` values, `out` writable.
enum FicoStatus fico_eval_instance(const struct FicoSim *sim,
                                   const struct FicoGroups *groups,
                                   uint32_t direction,
                                   const size_t *ks,
                                   size_t n_ks,
                                   struct FicoReport **out);

// Category-level mAP@k and P@k, optionally mAP@N and the 11-point curve.
//
// # Safety
// Handles must be live, `ks` must hold `n_ks` values, `out` writable.
enum FicoStatus fico_eval_category(const struct FicoSim *sim,
                                   const struct FicoLabels *query_labels,
                                   const struct FicoLabels *candidate_labels,
                                   const size_t *ks,
                                   size_t n_ks,
                                   bool include_n,
                                   bool pr_curve,
                                   struct FicoReport **out);

// Looks up a metric such as `R@10` or `mAP@N`.
//
// # Safety
// `report` must be live, `name` NUL-terminated, `out` writable.
enum FicoStatus fico_report_metric(const struct FicoReport *report, const char *name, double *out);

// Canonical JSON of the report; release with [`fico_string_free`].
//
// # Safety
// `report` must be live; `out` writable.
enum FicoStatus fico_report_json(const struct FicoReport *report, char **out);

// # Safety
// `report` must be live; `path` a NUL-terminated string.
enum FicoStatus fico_report_write(const struct FicoReport *report, const char *path_);

// # Safety
// `r` must be a live handle or NULL.
void fico_report_free(struct FicoReport *r);

// Exhaustive index; copies the data.
//
// # Safety
// `data` must be live; `out` writable.
enum FicoStatus fico_index_build_flat(const struct FicoEmbeddings *data,
                                      uint32_t measure_,
                                      struct FicoIndex **out);

// # Safety
// `data` must be live; `out` writable.
enum FicoStatus fico_index_build_hnsw(const struct FicoEmbeddings *data,
                                      uint32_t measure_,
                                      size_t m,
                                      size_t ef_construction,
                                      uint64_t seed,
                                      struct FicoIndex **out);

// # Safety
// `codes` must be live; `out` writable.
enum FicoStatus fico_index_build_binary_flat(const struct FicoCodes *codes, struct FicoIndex **out);

// # Safety
// `codes` must be live; `out` writable.
enum FicoStatus fico_index_build_binary_ivf(const struct FicoCodes *codes,
                                            size_t nlist,
                                            size_t iters,
                                            uint64_t seed,
                                            struct FicoIndex **out);

// Top-`k` search with dense queries (flat and HNSW indexes).
//
// # Safety
// Handles must be live; `out` writable.
enum FicoStatus fico_index_search_dense(const struct FicoIndex *index,
                                        const struct FicoEmbeddings *queries,
                                        size_t k,
                                        size_t ef_search,
                                        struct FicoRanked **out);

// Top-`k` search with code queries (binary flat and IVF indexes).
//
// # Safety
// Handles must be live; `out` writable.
enum FicoStatus fico_index_search_codes(const struct FicoIndex *index,
                                        const struct FicoCodes *queries,
                                        size_t k,
                                        size_t nprobe,
                                        struct FicoRanked **out);

// # Safety
// `index` must be live; `path` a NUL-terminated string.
enum FicoStatus fico_index_save(const struct FicoIndex *index, const char *path_);

// # Safety
// `path` must be a NUL-terminated string; `out` writable.
enum FicoStatus fico_index_load(const char *path_, struct FicoIndex **out);

// Estimated resident size of the index in bytes.
//
// # Safety
// `index` must be live; `out` writable.
enum FicoStatus fico_index_memory_bytes(const struct FicoIndex *index, uint64_t *out);

// # Safety
// `i` must be a live handle or NULL.
void fico_index_free(struct FicoIndex *i);

// # Safety
// `r` must be live; out-pointers writable.
enum FicoStatus fico_ranked_shape(const struct FicoRanked *r, size_t *n_queries, size_t *k);

// Copies `n_queries * k` candidate IDs and scores, best first per query.
// Unfilled slots get ID `UINT64_MAX` and score NaN. Either output may be NULL.
//
// # Safety
// `r` must be live; non-NULL outputs must hold `n_queries * k` values.
enum FicoStatus fico_ranked_copy(const struct FicoRanked *r, uint64_t *ids, float *scores);

// # Safety
// `r` must be a live handle or NULL.
void fico_ranked_free(struct FicoRanked *r);

// Exact bytes and GiB (two decimals) to store `n * dim` values of `dtype_bytes` each.
//
// # Safety
// Out-pointers must be writable.
enum FicoStatus fico_storage_cost(uint64_t n,
                                  uint64_t dim,
                                  uint64_t dtype_bytes,
                                  uint64_t *bytes,
                                  double *gib);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FICO_H */
