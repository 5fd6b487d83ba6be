#ifndef SCREENLOOP_H
#define SCREENLOOP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SlStatus {
  SL_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  SL_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  SL_STATUS_INVALID_UTF8 = 2,
  /**
   * The dataset bytes could not be parsed.
   */
  SL_STATUS_PARSE_ERROR = 3,
  /**
   * Settings, priors or another argument were rejected.
   */
  SL_STATUS_INVALID_ARGUMENT = 4,
  SL_STATUS_UNKNOWN_ROW = 5,
  SL_STATUS_ALREADY_LABELED = 6,
  /**
   * Every record has been labeled.
   */
  SL_STATUS_EXHAUSTED = 7,
  /**
   * The stopping rule has fired.
   */
  SL_STATUS_STOPPED = 8,
  /**
   * A saved state could not be loaded.
   */
  SL_STATUS_CORRUPT_STATE = 9,
  /**
   * Training failed or the library panicked.
   */
  SL_STATUS_INTERNAL = 10,
} SlStatus;

/**
 * Dataset format selector. `Auto` sniffs the bytes.
 */
typedef enum SlFormat {
  SL_FORMAT_AUTO = 0,
  SL_FORMAT_RIS = 1,
  SL_FORMAT_CSV = 2,
} SlFormat;

typedef struct SlDataset SlDataset;

typedef struct SlProject SlProject;

/**
 * Snapshot of screening progress.
 */
typedef struct SlProgress {
  size_t n_labeled;
  size_t n_relevant;
  size_t n_irrelevant;
  size_t n_total;
  uint64_t model_version;
} SlProgress;

/**
 * Byte buffer owned by the library.
 */
typedef struct SlBuffer {
  uint8_t *data;
  size_t len;
} SlBuffer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread, or NULL. The
 * pointer stays valid until the next call into the library on this thread.
 */
const char *sl_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sl_version(void);

/**
 * Parses a RIS or CSV file held in memory.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `out` must be writable.
 */
enum SlStatus sl_dataset_parse(const uint8_t *data,
                               size_t len,
                               enum SlFormat format,
                               struct SlDataset **out);

/**
 * # Safety
 * `dataset` must be NULL or a handle from [`sl_dataset_parse`] not yet freed.
 */
void sl_dataset_free(struct SlDataset *dataset);

/**
 * Number of records, or 0 for NULL.
 *
 * # Safety
 * `dataset` must be NULL or a live handle.
 */
size_t sl_dataset_len(const struct SlDataset *dataset);

/**
 * Hex content fingerprint of the dataset. Free with [`sl_string_free`].
 *
 * # Safety
 * `dataset` must be a live handle and `out` writable.
 */
enum SlStatus sl_dataset_fingerprint(const struct SlDataset *dataset, char **out);

/**
 * Starts a project on `dataset` with the given prior labels and trains the
 * first model. `settings_json` may be NULL for defaults.
 *
 * # Safety
 * `dataset` must be a live handle, `settings_json` NULL or a NUL-terminated
 * string, the id arrays readable for their lengths, and `out` writable.
 */
enum SlStatus sl_project_new(const struct SlDataset *dataset,
                             const char *settings_json,
                             const size_t *included,
                             size_t n_included,
                             const size_t *excluded,
                             size_t n_excluded,
                             struct SlProject **out);

/**
 * # Safety
 * `project` must be NULL or a handle not yet freed.
 */
void sl_project_free(struct SlProject *project);

/**
 * Row id of the record to screen next.
 *
 * # Safety
 * `project` must be a live handle and `row_id` writable.
 */
enum SlStatus sl_project_next(struct SlProject *project, size_t *row_id);

/**
 * Records a decision and retrains.
 *
 * # Safety
 * `project` must be a live handle.
 */
enum SlStatus sl_project_label(struct SlProject *project, size_t row_id, bool relevant);

/**
 * # Safety
 * `project` must be a live handle and `out` writable.
 */
enum SlStatus sl_project_progress(const struct SlProject *project, struct SlProgress *out);

/**
 * Serializes the project state. Free the buffer with [`sl_buffer_free`].
 *
 * # Safety
 * `project` must be a live handle and `out` writable.
 */
enum SlStatus sl_project_save(const struct SlProject *project, struct SlBuffer *out);

/**
 * Restores a project saved with [`sl_project_save`] against the same dataset.
 *
 * # Safety
 * `dataset` must be a live handle, `data` readable for `len` bytes, and
 * `out` writable.
 */
enum SlStatus sl_project_load(const struct SlDataset *dataset,
                              const uint8_t *data,
                              size_t len,
                              struct SlProject **out);

/**
 * Exports labeled records followed by the current ranking. `format` must be
 * `SL_FORMAT_RIS` or `SL_FORMAT_CSV`.
 *
 * # Safety
 * `project` must be a live handle and `out` writable.
 */
enum SlStatus sl_project_export(const struct SlProject *project,
                                enum SlFormat format,
                                struct SlBuffer *out);

/**
 * # Safety
 * `buffer` must come from this library and not have been freed.
 */
void sl_buffer_free(struct SlBuffer buffer);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void sl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCREENLOOP_H */
