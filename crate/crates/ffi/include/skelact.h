#ifndef SKELACT_H
#define SKELACT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SkStatus {
  SK_STATUS_OK = 0,
  // A required pointer argument was null.
  SK_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  SK_STATUS_INVALID_UTF8 = 2,
  // Malformed pose JSON.
  SK_STATUS_SCHEMA = 3,
  // Well-formed input the pipeline cannot process (too few frames, no person, ...).
  SK_STATUS_DATA = 4,
  SK_STATUS_IO = 5,
  SK_STATUS_CONFIG = 6,
  // Corrupt or unsupported checkpoint.
  SK_STATUS_CHECKPOINT = 7,
  // An output buffer is shorter than required.
  SK_STATUS_BUFFER_TOO_SMALL = 8,
  SK_STATUS_INTERNAL = 9,
} SkStatus;

typedef enum SkSampling {
  SK_SAMPLING_INFORMATIVE = 0,
  SK_SAMPLING_UNIFORM = 1,
} SkSampling;

typedef enum SkStreams {
  SK_STREAMS_HP = 1,
  SK_STREAMS_HP_OHP = 2,
} SkStreams;

// A parsed pose clip.
typedef struct SkClip SkClip;

// A trained two-stream model with the pipeline settings it was trained under.
typedef struct SkModel SkModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *sk_last_error(void);

// Library version as a static NUL-terminated string.
const char *sk_version(void);

// Parses pose JSON of `len` bytes into a new clip handle.
//
// # Safety
// `json` must point to `len` readable bytes and `out` to writable storage.
enum SkStatus sk_clip_parse(const uint8_t *json, size_t len, struct SkClip **out);

// Number of frames in the clip; 0 for a null handle.
//
// # Safety
// `clip` must be null or a live handle from `sk_clip_parse`.
size_t sk_clip_num_frames(const struct SkClip *clip);

// # Safety
// `clip` must be null or a handle from `sk_clip_parse` not yet freed.
void sk_clip_free(struct SkClip *clip);

// Picks `segments` frames of the clip's actor. Writes their positions in the
// clip (ascending) to `positions`, which must hold at least `segments` entries.
//
// # Safety
// `clip` must be a live handle; `positions` must point to `capacity` writable entries.
enum SkStatus sk_clip_sample(const struct SkClip *clip,
                             size_t segments,
                             enum SkSampling mode,
                             size_t *positions,
                             size_t capacity);

// Loads a trained model directory (`run.cfg`, `hp.ckpt`, optional `ohp.ckpt`).
//
// # Safety
// `dir` must be a NUL-terminated string and `out` writable.
enum SkStatus sk_model_load(const char *dir, struct SkModel **out);

// Number of classes the model predicts; 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle from `sk_model_load`.
size_t sk_model_num_classes(const struct SkModel *model);

// # Safety
// `model` must be null or a handle from `sk_model_load` not yet freed.
void sk_model_free(struct SkModel *model);

// Classifies a clip. Writes `sk_model_num_classes` probabilities; the
// predicted class and stream set are written when their pointers are non-null.
//
// # Safety
// Handles must be live; `probabilities` must point to `capacity` writable entries.
enum SkStatus sk_model_infer(const struct SkModel *model,
                             const struct SkClip *clip,
                             double *probabilities,
                             size_t capacity,
                             size_t *predicted_class,
                             enum SkStreams *streams_used);

// Minimum-cost assignment on a row-major `rows` x `cols` matrix. Writes the
// matched column of each row to `row_to_col` (-1 when unmatched) and the total
// cost to `total` when non-null.
//
// # Safety
// `cost` must point to `rows * cols` readable values and `row_to_col` to `rows` writable entries.
enum SkStatus sk_hungarian(const double *cost,
                           size_t rows,
                           size_t cols,
                           ptrdiff_t *row_to_col,
                           double *total);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKELACT_H */
