#ifndef ORDEMBED_H
#define ORDEMBED_H

/* This file is generated by cbindgen from ordembed-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes of every fallible call.
typedef enum OeStatus {
  OE_STATUS_OK = 0,
  OE_STATUS_NULL_POINTER = 1,
  OE_STATUS_INVALID_ARGUMENT = 2,
  OE_STATUS_IO_ERROR = 3,
  OE_STATUS_NUMERICAL_ERROR = 4,
  OE_STATUS_BUFFER_TOO_SMALL = 5,
  OE_STATUS_INTERNAL_ERROR = 6,
} OeStatus;

// Algorithm selector for `oe_train`.
typedef enum OeAlgorithm {
  OE_ALGORITHM_SOE = 0,
  OE_ALGORITHM_STE = 1,
  OE_ALGORITHM_TSTE = 2,
  OE_ALGORITHM_CKL = 3,
  OE_ALGORITHM_CKLX = 4,
  OE_ALGORITHM_GNMDS = 5,
  OE_ALGORITHM_FORTE = 6,
  OE_ALGORITHM_OENN = 7,
} OeAlgorithm;

// Opaque ground-truth dataset handle.
typedef struct OeDataset OeDataset;

// Opaque embedding handle (row-major `n x d` coordinates).
typedef struct OeEmbedding OeEmbedding;

// Opaque triplet set handle.
typedef struct OeTripletSet OeTripletSet;

// Training configuration passed by value; obtain defaults from
// `oe_train_options_default` and adjust fields as needed.
typedef struct OeTrainOptions {
  enum OeAlgorithm algorithm;
  double learning_rate;
  // Mini-batch cap; the effective batch is `min(batch_size, |T|)`.
  size_t batch_size;
  size_t max_epochs;
  uint64_t seed;
  // SOE hinge margin.
  double margin;
  // CKL/CKLx scale parameter.
  double mu;
  // t-STE degrees of freedom; values <= 0 select `max(d - 1, 1)`.
  double alpha;
  // GNMDS/CKL trace regularizer.
  double trace_reg;
  // FORTE backtracking factor.
  double rho;
  // FORTE Armijo constant.
  double c1;
  // OENN hidden width; 0 selects `max(120, ceil(2 d ln n))`.
  size_t oenn_width;
  // OENN input code length; 0 selects `ceil(log2 n)`.
  size_t oenn_encoding_length;
} OeTrainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the message of the most recent error on this thread into `buf`
// (NUL-terminated, truncated to `len`). Returns the full message length
// in bytes, excluding the terminator.
//
// # Safety
// `buf` must point to `len` writable bytes, or be null (query mode).
size_t oe_last_error(char *buf, size_t len);

// Generate `n` points uniform on `[0, 10]^dim` (unlabeled).
//
// # Safety
// `out` must be a valid pointer to receive the handle.
enum OeStatus oe_dataset_uniform(size_t n, size_t dim, uint64_t seed, struct OeDataset **out);

// Generate two separated unit-variance Gaussian blobs, labeled 0/1.
//
// # Safety
// `out` must be a valid pointer to receive the handle.
enum OeStatus oe_dataset_gmm2(size_t n, size_t dim, uint64_t seed, struct OeDataset **out);

// Read a dataset CSV (header `x0,x1,...[,label]`).
//
// # Safety
// `path` must be a NUL-terminated string; `out` valid.
enum OeStatus oe_dataset_read_csv(const char *path, struct OeDataset **out);

// Write a dataset as CSV.
//
// # Safety
// `ds` must be a live handle; `path` a NUL-terminated string.
enum OeStatus oe_dataset_write_csv(const struct OeDataset *ds, const char *path);

// Item count, or 0 for a null handle.
size_t oe_dataset_n(const struct OeDataset *ds);

// Input dimension, or 0 for a null handle.
size_t oe_dataset_dim(const struct OeDataset *ds);

// 1 when the dataset carries class labels.
int32_t oe_dataset_has_labels(const struct OeDataset *ds);

// Destroy a dataset handle (null is a no-op).
//
// # Safety
// `ds` must have been produced by this library and not freed before.
void oe_dataset_free(struct OeDataset *ds);

// `round(multiplier * n * d * ln n)`, at least 1: the canonical
// training-triplet budget (the benchmark default is `multiplier = 2`).
size_t oe_default_triplet_count(size_t n, size_t d, double multiplier);

// Sample `count` ground-truth-consistent triplets.
//
// # Safety
// `ds` must be a live handle; `out` valid.
enum OeStatus oe_triplets_generate(const struct OeDataset *ds,
                                   size_t count,
                                   uint64_t seed,
                                   struct OeTripletSet **out);

// Sample the standard 10,000 held-out test triplets (stream disjoint
// from the training stream of the same seed).
//
// # Safety
// `ds` must be a live handle; `out` valid.
enum OeStatus oe_triplets_test_sample(const struct OeDataset *ds,
                                      uint64_t seed,
                                      struct OeTripletSet **out);

// Read a triplet file (`n=<N>` header, `i,j,k` lines).
//
// # Safety
// `path` must be a NUL-terminated string; `out` valid.
enum OeStatus oe_triplets_read(const char *path, struct OeTripletSet **out);

// Write a triplet file.
//
// # Safety
// `ts` must be a live handle; `path` a NUL-terminated string.
enum OeStatus oe_triplets_write(const struct OeTripletSet *ts, const char *path);

// Number of triplets, or 0 for a null handle.
size_t oe_triplets_len(const struct OeTripletSet *ts);

// Item count the triplets index, or 0 for a null handle.
size_t oe_triplets_n(const struct OeTripletSet *ts);

// Destroy a triplet-set handle (null is a no-op).
//
// # Safety
// `ts` must have been produced by this library and not freed before.
void oe_triplets_free(struct OeTripletSet *ts);

// Per-algorithm default hyperparameters.
struct OeTrainOptions oe_train_options_default(enum OeAlgorithm algorithm, uint64_t seed);

// Train an embedding of dimension `d` from a triplet set.
//
// # Safety
// `ts` and `options` must be live pointers; `out` valid.
enum OeStatus oe_train(const struct OeTripletSet *ts,
                       size_t d,
                       const struct OeTrainOptions *options,
                       struct OeEmbedding **out);

// Row count, or 0 for a null handle.
size_t oe_embedding_rows(const struct OeEmbedding *emb);

// Column count, or 0 for a null handle.
size_t oe_embedding_cols(const struct OeEmbedding *emb);

// Copy the coordinates row-major into `buf` (`len` must be at least
// `rows * cols`).
//
// # Safety
// `emb` must be a live handle; `buf` must point to `len` writable
// doubles.
enum OeStatus oe_embedding_copy_coords(const struct OeEmbedding *emb, double *buf, size_t len);

// Write an embedding as CSV (dataset format without labels).
//
// # Safety
// `emb` must be a live handle; `path` a NUL-terminated string.
enum OeStatus oe_embedding_write_csv(const struct OeEmbedding *emb, const char *path);

// Read an embedding from CSV.
//
// # Safety
// `path` must be a NUL-terminated string; `out` valid.
enum OeStatus oe_embedding_read_csv(const char *path, struct OeEmbedding **out);

// Destroy an embedding handle (null is a no-op).
//
// # Safety
// `emb` must have been produced by this library and not freed before.
void oe_embedding_free(struct OeEmbedding *emb);

// Fraction of triplets the embedding violates (ties satisfied).
//
// # Safety
// `emb` and `ts` must be live handles; `out` must point to a double.
enum OeStatus oe_triplet_error(const struct OeEmbedding *emb,
                               const struct OeTripletSet *ts,
                               double *out);

// Standardized Procrustes disparity between an embedding and the
// dataset's ground-truth coordinates.
//
// # Safety
// `emb` and `ds` must be live handles; `out` must point to a double.
enum OeStatus oe_procrustes_disparity(const struct OeEmbedding *emb,
                                      const struct OeDataset *ds,
                                      double *out);

// kNN misclassification rate on a seeded 70/30 split with
// `k = max(1, floor(ln n))`. Fails on unlabeled datasets.
//
// # Safety
// `emb` and `ds` must be live handles; `out` must point to a double.
enum OeStatus oe_knn_error(const struct OeEmbedding *emb,
                           const struct OeDataset *ds,
                           uint64_t seed,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ORDEMBED_H */
