/* C interface to the its summarizer. */

#ifndef ITS_H
#define ITS_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum ItsStatus {
  ITS_STATUS_OK = 0,
  ITS_STATUS_NULL_POINTER = 1,
  ITS_STATUS_INVALID_UTF8 = 2,
  ITS_STATUS_INVALID_ARGUMENT = 3,
  ITS_STATUS_IO = 4,
  ITS_STATUS_DATA = 5,
  ITS_STATUS_NUMERICAL = 6,
  /**
   * The output buffer is too small; the required length was written.
   */
  ITS_STATUS_BUFFER_TOO_SMALL = 7,
  ITS_STATUS_PANIC = 8,
} ItsStatus;

/**
 * Opaque handle to a loaded model and its vocabulary.
 */
typedef struct ItsModel ItsModel;

typedef struct ItsRouge {
  double precision;
  double recall;
  double f1;
} ItsRouge;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *its_version(void);

/**
 * Message of the last failed call on this thread, or null.
 *
 * The pointer stays valid until the next call on the same thread.
 */
const char *its_last_error(void);

/**
 * Loads a checkpoint file. The handle must be released with [`its_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ItsStatus its_model_load(const char *path, struct ItsModel **out);

/**
 * # Safety
 * `model` must come from [`its_model_load`] and not be used afterwards. Null is ignored.
 */
void its_model_free(struct ItsModel *model);

/**
 * Number of iterations K of the loaded model.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum ItsStatus its_model_iterations(const struct ItsModel *model, size_t *out);

/**
 * Writes one salience score per sentence of `document_json` into `scores`.
 *
 * `len` always receives the sentence count. When it exceeds `capacity`
 * nothing is written and `ITS_STATUS_BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * `scores` must point to `capacity` doubles (it may be null when `capacity` is 0).
 */
enum ItsStatus its_model_score(const struct ItsModel *model,
                               const char *document_json,
                               double *scores,
                               size_t capacity,
                               size_t *len);

/**
 * Extracts a three-sentence summary and returns it as a JSON object with
 * `id`, `indices`, `scores` and `sentences`. Free `out_json` with [`its_string_free`].
 *
 * # Safety
 * `document_json` must be a NUL-terminated string and `out_json` a valid pointer.
 */
enum ItsStatus its_model_summarize(const struct ItsModel *model,
                                   const char *document_json,
                                   bool document_order,
                                   char **out_json);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is ignored.
 */
void its_string_free(char *s);

/**
 * ROUGE-N of two whitespace-tokenized texts.
 *
 * # Safety
 * Both texts must be NUL-terminated strings and `out` a valid pointer.
 */
enum ItsStatus its_rouge_n(const char *candidate,
                           const char *reference,
                           size_t n,
                           struct ItsRouge *out);

/**
 * ROUGE-L of two whitespace-tokenized texts.
 *
 * # Safety
 * Both texts must be NUL-terminated strings and `out` a valid pointer.
 */
enum ItsStatus its_rouge_l(const char *candidate, const char *reference, struct ItsRouge *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ITS_H */
