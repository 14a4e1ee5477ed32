#ifndef MVSEQ_H
#define MVSEQ_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MvseqStatus {
  MVSEQ_STATUS_OK = 0,
  MVSEQ_STATUS_NULL_POINTER = 1,
  MVSEQ_STATUS_INVALID_ARGUMENT = 2,
  MVSEQ_STATUS_IO = 3,
  MVSEQ_STATUS_FORMAT = 4,
  MVSEQ_STATUS_DIMENSION_MISMATCH = 5,
  MVSEQ_STATUS_DATA = 6,
  MVSEQ_STATUS_PANIC = 7,
} MvseqStatus;

/**
 * Read-only corpus directory.
 */
typedef struct MvseqCorpus MvseqCorpus;

/**
 * Corpus-level document frequencies for IDF scoring.
 */
typedef struct MvseqIdfTable MvseqIdfTable;

/**
 * Dense row-major `f32` matrix.
 */
typedef struct MvseqMatrix MvseqMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next mvseq call on the same thread.
 */
const char *mvseq_last_error(void);

/**
 * Number of vectors kept for `len` tokens at keep ratio `ratio`, or 0 when
 * the ratio is outside (0, 1].
 */
size_t mvseq_budget(size_t len, double ratio);

/**
 * Copies `rows * dim` floats from `data` into a new matrix.
 *
 * # Safety
 * `data` must point to `rows * dim` readable floats; `out` must be writable.
 */
enum MvseqStatus mvseq_matrix_new(const float *data,
                                  size_t rows,
                                  size_t dim,
                                  struct MvseqMatrix **out);

/**
 * # Safety
 * `matrix` must be null or a handle from this library that was not freed.
 */
void mvseq_matrix_free(struct MvseqMatrix *matrix);

/**
 * # Safety
 * `matrix` must be a live handle.
 */
size_t mvseq_matrix_rows(const struct MvseqMatrix *matrix);

/**
 * # Safety
 * `matrix` must be a live handle.
 */
size_t mvseq_matrix_dim(const struct MvseqMatrix *matrix);

/**
 * Row-major values, `rows * dim` long, owned by the handle.
 *
 * # Safety
 * `matrix` must be a live handle.
 */
const float *mvseq_matrix_data(const struct MvseqMatrix *matrix);

/**
 * `Σ_i max_j <q_i, d_j>` in double precision.
 *
 * # Safety
 * `query` and `doc` must be live handles; `out` must be writable.
 */
enum MvseqStatus mvseq_maxsim(const struct MvseqMatrix *query,
                              const struct MvseqMatrix *doc,
                              double *out);

/**
 * Compresses one document. `method` is a method name such as
 * `"pool_hierarchical"`. `attention` (length = rows) and `token_ids` with
 * `idf` are optional and only read by the methods that need them. The
 * result is unit-normalized with row 0 kept as is.
 *
 * # Safety
 * Pointer arguments must be null or valid for the stated lengths.
 */
enum MvseqStatus mvseq_compress(const struct MvseqMatrix *embeddings,
                                const float *attention,
                                const uint32_t *token_ids,
                                const struct MvseqIdfTable *idf,
                                const char *method,
                                double ratio,
                                uint64_t seed,
                                struct MvseqMatrix **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum MvseqStatus mvseq_corpus_open(const char *path, struct MvseqCorpus **out);

/**
 * # Safety
 * `corpus` must be null or a live handle.
 */
void mvseq_corpus_free(struct MvseqCorpus *corpus);

/**
 * # Safety
 * `corpus` must be a live handle.
 */
size_t mvseq_corpus_len(const struct MvseqCorpus *corpus);

/**
 * # Safety
 * `corpus` must be a live handle.
 */
size_t mvseq_corpus_dim(const struct MvseqCorpus *corpus);

/**
 * Reads the embeddings of the document at manifest position `index`.
 *
 * # Safety
 * `corpus` must be a live handle; `out` must be writable.
 */
enum MvseqStatus mvseq_corpus_embeddings(const struct MvseqCorpus *corpus,
                                         size_t index,
                                         struct MvseqMatrix **out);

/**
 * Compresses every document of the corpus at `input` into a new corpus
 * directory `output`. IDF methods build their table from the input.
 *
 * # Safety
 * `input`, `output` and `method` must be NUL-terminated strings.
 */
enum MvseqStatus mvseq_compress_corpus(const char *input,
                                       const char *output,
                                       const char *method,
                                       double ratio,
                                       uint64_t seed);

/**
 * Builds the IDF table of an opened corpus.
 *
 * # Safety
 * `corpus` must be a live handle; `out` must be writable.
 */
enum MvseqStatus mvseq_idf_build(const struct MvseqCorpus *corpus, struct MvseqIdfTable **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum MvseqStatus mvseq_idf_load(const char *path, struct MvseqIdfTable **out);

/**
 * # Safety
 * `table` must be null or a live handle.
 */
void mvseq_idf_free(struct MvseqIdfTable *table);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MVSEQ_H */
