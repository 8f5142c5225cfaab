#ifndef REENACT_H
#define REENACT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ReStatus {
  RE_STATUS_OK = 0,
  RE_STATUS_NULL_ARGUMENT = 1,
  RE_STATUS_INVALID_UTF8 = 2,
  RE_STATUS_IO = 3,
  RE_STATUS_PARSE = 4,
  RE_STATUS_AUDIO = 5,
  /**
   * Strict build refused because validation raised diagnostics.
   */
  RE_STATUS_STRICT = 6,
  RE_STATUS_INVALID_ARGUMENT = 7,
  RE_STATUS_BUFFER_TOO_SMALL = 8,
  RE_STATUS_PANIC = 9,
} ReStatus;

typedef struct ReDocument ReDocument;

typedef struct ReRelease ReRelease;

typedef struct ReWav ReWav;

typedef struct ReCounts {
  size_t recordings;
  size_t long_clips;
  size_t short_clips;
  size_t concatenations;
  size_t fragment_tables;
  size_t diagnostics;
} ReCounts;

typedef struct ReStats {
  size_t conversations;
  size_t participants;
  size_t long_pairs;
  double mean_long_duration_s;
  size_t short_pairs;
  double mean_short_duration_s;
} ReStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into the library from the same thread.
 */
const char *re_last_error(void);

/**
 * # Safety
 * `data` and `len` must come from a library call that returned bytes.
 */
void re_bytes_free(uint8_t *data, size_t len);

/**
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be writable.
 */
enum ReStatus re_eaf_parse(const uint8_t *data, size_t len, struct ReDocument **out);

/**
 * # Safety
 * `doc` must be a live handle; `out` and `out_len` must be writable.
 */
enum ReStatus re_eaf_serialize(const struct ReDocument *doc, uint8_t **out, size_t *out_len);

/**
 * Number of tiers, 0 for a null handle.
 *
 * # Safety
 * `doc` must be null or a live handle.
 */
size_t re_eaf_tier_count(const struct ReDocument *doc);

/**
 * Number of annotations on the named tier, or -1 if there is no such tier.
 *
 * # Safety
 * `doc` must be a live handle and `tier` a NUL-terminated string.
 */
int64_t re_eaf_annotation_count(const struct ReDocument *doc, const char *tier);

/**
 * # Safety
 * `doc` must be null or a handle not yet freed.
 */
void re_eaf_free(struct ReDocument *doc);

/**
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be writable.
 */
enum ReStatus re_wav_read(const uint8_t *data, size_t len, struct ReWav **out);

/**
 * # Safety
 * `wav` must be a live handle; `out` and `out_len` must be writable.
 */
enum ReStatus re_wav_write(const struct ReWav *wav, uint8_t **out, size_t *out_len);

/**
 * # Safety
 * `wav` must be null or a live handle.
 */
uint32_t re_wav_sample_rate(const struct ReWav *wav);

/**
 * # Safety
 * `wav` must be null or a live handle.
 */
uint16_t re_wav_channels(const struct ReWav *wav);

/**
 * # Safety
 * `wav` must be null or a live handle.
 */
uint64_t re_wav_frames(const struct ReWav *wav);

/**
 * Cut `[start_ms, end_ms)` into a new handle.
 *
 * # Safety
 * `wav` must be a live handle; `out` must be writable.
 */
enum ReStatus re_wav_cut(const struct ReWav *wav,
                         uint64_t start_ms,
                         uint64_t end_ms,
                         struct ReWav **out);

/**
 * # Safety
 * `wav` must be null or a handle not yet freed.
 */
void re_wav_free(struct ReWav *wav);

uint64_t re_ms_to_sample(uint64_t ms, uint32_t rate);

/**
 * Write `mm:ss.mmm` and a NUL into `buf`.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes.
 */
enum ReStatus re_format_duration(uint64_t ms, char *buf, size_t cap);

/**
 * # Safety
 * `text` must be NUL-terminated; `out` must be writable.
 */
enum ReStatus re_parse_duration(const char *text, uint64_t *out);

/**
 * Build a release. `report` may be null. On `ReStatus::Strict` nothing is
 * written and `*out` is left untouched.
 *
 * # Safety
 * `input` and `output` must be NUL-terminated; `report` null or
 * NUL-terminated; `out` writable.
 */
enum ReStatus re_build_release(const char *input,
                               const char *output,
                               bool strict,
                               const char *report,
                               struct ReRelease **out);

/**
 * # Safety
 * `release` must be a live handle; `out` must be writable.
 */
enum ReStatus re_release_counts(const struct ReRelease *release, struct ReCounts *out);

/**
 * # Safety
 * `release` must be null or a handle not yet freed.
 */
void re_release_free(struct ReRelease *release);

/**
 * # Safety
 * `release_dir` must be NUL-terminated; `out` must be writable.
 */
enum ReStatus re_compute_stats(const char *release_dir, struct ReStats *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REENACT_H */
