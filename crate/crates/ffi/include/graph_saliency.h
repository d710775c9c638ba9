#ifndef GRAPH_SALIENCY_H
#define GRAPH_SALIENCY_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every call.
 */
typedef enum GsStatus {
  GS_STATUS_OK = 0,
  GS_STATUS_NULL_POINTER = 1,
  GS_STATUS_INVALID_ARGUMENT = 2,
  GS_STATUS_IO = 3,
  GS_STATUS_FORMAT = 4,
  GS_STATUS_NOT_FOUND = 5,
  GS_STATUS_DIMENSION = 6,
  GS_STATUS_NUMERIC = 7,
  GS_STATUS_PANIC = 8,
} GsStatus;

typedef struct GsGraph GsGraph;

typedef struct GsModel GsModel;

typedef struct GsSaliency GsSaliency;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or NULL if none.
 Valid until the next failing call on the same thread.
 */
const char *gs_last_error_message(void);

/*
 Loads a model JSON file.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum GsStatus gs_model_load(const char *path, struct GsModel **out);

/*
 # Safety
 `model` must come from [`gs_model_load`] or be NULL.
 */
void gs_model_free(struct GsModel *model);

/*
 # Safety
 `model` must be a live handle; `out` must be writable.
 */
enum GsStatus gs_model_num_classes(const struct GsModel *model, size_t *out);

/*
 # Safety
 `model` must be a live handle; `out` must be writable.
 */
enum GsStatus gs_model_input_dim(const struct GsModel *model, size_t *out);

/*
 Builds a graph from row-major `features` (`num_nodes * num_features`) and
 a binary row-major `adjacency` (`num_nodes * num_nodes`).

 # Safety
 Both arrays must hold the stated number of doubles; `out` must be writable.
 */
enum GsStatus gs_graph_new(size_t num_nodes,
                           size_t num_features,
                           const double *features,
                           const double *adjacency,
                           struct GsGraph **out);

/*
 Loads the record with `graph_id` from a JSON-lines dataset.

 # Safety
 Strings must be NUL-terminated; `out` must be writable.
 */
enum GsStatus gs_graph_load(const char *dataset_path, const char *graph_id, struct GsGraph **out);

/*
 # Safety
 `graph` must come from a `gs_graph_*` constructor or be NULL.
 */
void gs_graph_free(struct GsGraph *graph);

/*
 # Safety
 `graph` must be a live handle; `out` must be writable.
 */
enum GsStatus gs_graph_num_nodes(const struct GsGraph *graph, size_t *out);

/*
 Runs the classifier. `logits` must hold exactly `num_classes` doubles;
 `class_out` may be NULL.

 # Safety
 Handles must be live; buffers must be writable for the stated lengths.
 */
enum GsStatus gs_forward(const struct GsModel *model,
                         const struct GsGraph *graph,
                         double *logits,
                         size_t logits_len,
                         size_t *class_out);

/*
 Computes a saliency map for `target_class`, or the predicted class when
 it is negative. `workers == 0` uses every available core; the result does
 not depend on the worker count.

 # Safety
 Handles must be live; `out` must be writable.
 */
enum GsStatus gs_explain(const struct GsModel *model,
                         const struct GsGraph *graph,
                         int64_t target_class,
                         size_t workers,
                         struct GsSaliency **out);

/*
 # Safety
 `saliency` must come from [`gs_explain`] or be NULL.
 */
void gs_saliency_free(struct GsSaliency *saliency);

/*
 # Safety
 `saliency` must be a live handle; `out` must be writable.
 */
enum GsStatus gs_saliency_num_nodes(const struct GsSaliency *saliency, size_t *out);

/*
 # Safety
 `saliency` must be a live handle; `out` must be writable.
 */
enum GsStatus gs_saliency_num_channels(const struct GsSaliency *saliency, size_t *out);

/*
 # Safety
 `saliency` must be a live handle; `out` must be writable.
 */
enum GsStatus gs_saliency_class(const struct GsSaliency *saliency, size_t *out);

/*
 Copies the per-node saliency into `buf`, which must hold exactly
 `num_nodes` doubles.

 # Safety
 `saliency` must be a live handle; `buf` must be writable for `len` doubles.
 */
enum GsStatus gs_saliency_values(const struct GsSaliency *saliency, double *buf, size_t len);

/*
 Copies the channel weights into `buf`, which must hold exactly
 `num_channels` doubles.

 # Safety
 `saliency` must be a live handle; `buf` must be writable for `len` doubles.
 */
enum GsStatus gs_saliency_channel_weights(const struct GsSaliency *saliency,
                                          double *buf,
                                          size_t len);

/*
 Writes the saliency JSON file.

 # Safety
 `saliency` must be a live handle; `path` must be NUL-terminated.
 */
enum GsStatus gs_saliency_save(const struct GsSaliency *saliency, const char *path);

/*
 Sparsity of a saliency vector, in `[0, 1]`.

 # Safety
 `values` must hold `len` doubles; `out` must be writable.
 */
enum GsStatus gs_sparsity(const double *values, size_t len, double *out);

/*
 Monte-Carlo infidelity of `saliency` for `graph` under `model`.

 # Safety
 Handles must be live; `out` must be writable.
 */
enum GsStatus gs_infidelity(const struct GsModel *model,
                            const struct GsGraph *graph,
                            const struct GsSaliency *saliency,
                            double sigma,
                            size_t num_samples,
                            uint64_t seed,
                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAPH_SALIENCY_H */
