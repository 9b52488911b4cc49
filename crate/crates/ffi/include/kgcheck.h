/* SPDX-License-Identifier: Apache-2.0 */

#ifndef KGCHECK_H
#define KGCHECK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum KgStatus {
  KG_STATUS_OK = 0,
  KG_STATUS_NULL_ARGUMENT = 1,
  KG_STATUS_INVALID_UTF8 = 2,
  KG_STATUS_IO = 3,
  KG_STATUS_PARSE = 4,
  KG_STATUS_UNKNOWN_NAME = 5,
  KG_STATUS_INVALID_ARGUMENT = 6,
  KG_STATUS_CHECKPOINT = 7,
  KG_STATUS_CONFIG = 8,
  KG_STATUS_INTERNAL = 9,
  KG_STATUS_PANIC = 10,
} KgStatus;

// A trained model with the embeddings and matrix it scores with.
typedef struct KgChecker KgChecker;

// A loaded knowledge graph.
typedef struct KgGraph KgGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *kg_last_error_message(void);

// Library version, static.
const char *kg_version(void);

// Loads triples (`format` "tsv", "nt" or null for tsv) and an optional
// schema file.
//
// # Safety
// String arguments are null or NUL-terminated; `out` is writable.
enum KgStatus kg_graph_load(const char *triples_path,
                            const char *schema_path,
                            const char *format,
                            struct KgGraph **out);

// # Safety
// `graph` is null or came from [`kg_graph_load`] and was not freed.
void kg_graph_free(struct KgGraph *graph);

// Entity, predicate and (non-type) triple counts.
//
// # Safety
// `graph` is live; outputs are writable.
enum KgStatus kg_graph_counts(const struct KgGraph *graph,
                              size_t *entities,
                              size_t *predicates,
                              size_t *triples);

// Loads a checkpoint with its embedding table and relatedness matrix.
// Evidence settings come from the checkpoint. The checker keeps its own
// reference to the graph, which may be freed afterwards.
//
// # Safety
// `graph` is live; strings are NUL-terminated; `out` is writable.
enum KgStatus kg_checker_load(const struct KgGraph *graph,
                              const char *model_path,
                              const char *embeddings_path,
                              const char *matrix_path,
                              struct KgChecker **out);

// # Safety
// `checker` is null or came from [`kg_checker_load`] and was not freed.
void kg_checker_free(struct KgChecker *checker);

// Scores `(subject, predicate, object)`; `label` is 1 when the score
// exceeds 0.5.
//
// # Safety
// `checker` is live; strings are NUL-terminated; outputs are writable.
enum KgStatus kg_checker_score(const struct KgChecker *checker,
                               const char *subject,
                               const char *predicate,
                               const char *object,
                               double *score,
                               int32_t *label);

// ROC AUC of `n` scores against 0/1 labels, ties counting one half.
//
// # Safety
// `scores` and `labels` point to `n` elements; `out` is writable.
enum KgStatus kg_auc(const double *scores, const int32_t *labels, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KGCHECK_H */
