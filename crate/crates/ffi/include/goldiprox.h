#ifndef GOLDIPROX_H
#define GOLDIPROX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a call. Zero is success.
 */
typedef enum GpxStatus {
  GPX_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  GPX_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  GPX_STATUS_INVALID_UTF8 = 2,
  /**
   * Config file unreadable, malformed or inconsistent.
   */
  GPX_STATUS_CONFIG = 3,
  GPX_STATUS_IO = 4,
  /**
   * Sequence bytes are malformed.
   */
  GPX_STATUS_SEQUENCE = 5,
  /**
   * Sequence and dataset fingerprints differ.
   */
  GPX_STATUS_FINGERPRINT_MISMATCH = 6,
  /**
   * Sequence is well formed but was not recorded by the configured run.
   */
  GPX_STATUS_SEQUENCE_MISMATCH = 7,
  /**
   * Bad numeric input, e.g. lengths or constant score lists.
   */
  GPX_STATUS_INVALID_INPUT = 8,
  /**
   * Index past the end of a result.
   */
  GPX_STATUS_OUT_OF_RANGE = 9,
  /**
   * Caller buffer too small; the needed length is reported.
   */
  GPX_STATUS_BUFFER_TOO_SMALL = 10,
  GPX_STATUS_INTERNAL = 11,
  GPX_STATUS_PANIC = 12,
} GpxStatus;

/**
 * Parsed experiment config.
 */
typedef struct GpxConfig GpxConfig;

/**
 * Outcome of a run or replay: metric rows and the final weight fingerprint.
 */
typedef struct GpxRun GpxRun;

/**
 * Decoded sequence file.
 */
typedef struct GpxSequence GpxSequence;

/**
 * One evaluation row. Score fields are NaN for replays.
 */
typedef struct GpxMetricsRow {
  uint64_t step;
  double test_accuracy;
  double corrupted_frac;
  double whitenoise_frac;
  double mean_score;
  double max_score;
} GpxMetricsRow;

typedef struct GpxSequenceHeader {
  uint32_t format_version;
  uint64_t dataset_fingerprint;
  uint32_t batch_size;
  uint32_t num_batches;
  /**
   * 0 uniform, 1 high_loss, 2 neg_irreducible, 3 reducible, 4 bald.
   */
  uint8_t kind;
  uint64_t seed;
} GpxSequenceHeader;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. Valid until
 * the next call into this library from the same thread.
 */
const char *gpx_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gpx_version(void);

/**
 * Reads and validates a TOML experiment config.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum GpxStatus gpx_config_load(const char *path, struct GpxConfig **out);

/**
 * Overrides the run seed.
 *
 * # Safety
 * `cfg` must come from [`gpx_config_load`] and not be freed.
 */
enum GpxStatus gpx_config_set_seed(struct GpxConfig *cfg, uint64_t seed);

/**
 * # Safety
 * `cfg` must be null or come from [`gpx_config_load`], and is freed once.
 */
void gpx_config_free(struct GpxConfig *cfg);

/**
 * Selection run; writes the sequence, metrics and manifest under `out_dir`.
 *
 * # Safety
 * Pointers must be valid as documented on [`gpx_config_load`].
 */
enum GpxStatus gpx_run(const struct GpxConfig *cfg, const char *out_dir, struct GpxRun **out);

/**
 * Trains the config's replay model on a sequence recorded with the same config.
 *
 * # Safety
 * Pointers must be valid as documented on [`gpx_config_load`].
 */
enum GpxStatus gpx_replay(const struct GpxConfig *cfg,
                          const char *sequence_path,
                          const char *out_dir,
                          struct GpxRun **out);

/**
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum GpxStatus gpx_run_fingerprint(const struct GpxRun *run, uint64_t *out);

/**
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum GpxStatus gpx_run_num_rows(const struct GpxRun *run, size_t *out);

/**
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum GpxStatus gpx_run_row(const struct GpxRun *run, size_t index, struct GpxMetricsRow *out);

/**
 * # Safety
 * `run` must be null or a live handle, and is freed once.
 */
void gpx_run_free(struct GpxRun *run);

/**
 * Decodes sequence bytes.
 *
 * # Safety
 * `bytes` must point to `len` readable bytes (it may be null when `len` is 0).
 */
enum GpxStatus gpx_sequence_decode(const uint8_t *bytes, size_t len, struct GpxSequence **out);

/**
 * Reads and decodes a sequence file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum GpxStatus gpx_sequence_read(const char *path, struct GpxSequence **out);

/**
 * # Safety
 * `seq` must be a live handle; `out` must be writable.
 */
enum GpxStatus gpx_sequence_header(const struct GpxSequence *seq, struct GpxSequenceHeader *out);

/**
 * Copies batch `index` into `ids`. With `capacity` below the batch size
 * nothing is copied, `*len` is set to the size needed and
 * `GPX_STATUS_BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * `ids` must have room for `capacity` values (or be null when `capacity` is 0).
 */
enum GpxStatus gpx_sequence_batch(const struct GpxSequence *seq,
                                  size_t index,
                                  uint32_t *ids,
                                  size_t capacity,
                                  size_t *len);

/**
 * # Safety
 * `seq` must be null or a live handle, and is freed once.
 */
void gpx_sequence_free(struct GpxSequence *seq);

/**
 * Spearman rank correlation with average ranks for ties.
 *
 * # Safety
 * `a` and `b` must each point to `n` readable doubles; `out` must be writable.
 */
enum GpxStatus gpx_spearman(const double *a, const double *b, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GOLDIPROX_H */
