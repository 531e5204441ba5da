#ifndef STATION_H
#define STATION_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum StationStatus {
  STATION_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  STATION_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  STATION_STATUS_INVALID_UTF8 = 2,
  /**
   * The manifest could not be parsed or failed validation.
   */
  STATION_STATUS_INVALID_MANIFEST = 3,
  /**
   * A backend could not be set up, or a slot names an unknown backend.
   */
  STATION_STATUS_BACKEND = 4,
  STATION_STATUS_IO = 5,
  /**
   * The run reached its tick limit.
   */
  STATION_STATUS_HALTED = 6,
  STATION_STATUS_INVARIANT = 7,
  STATION_STATUS_CORRUPT_SNAPSHOT = 8,
  STATION_STATUS_VERSION_MISMATCH = 9,
  /**
   * An argument was out of range (for example an unknown view name).
   */
  STATION_STATUS_INVALID_ARGUMENT = 10,
  STATION_STATUS_PANIC = 11,
} StationStatus;

/**
 * Opaque run handle.
 */
typedef struct StationHandle StationHandle;

/**
 * Summary of one completed tick.
 */
typedef struct StationTickInfo {
  uint64_t tick;
  uint64_t wall;
  /**
   * Steps the clock was held for overdue evaluations.
   */
  uint32_t pause_steps;
  /**
   * Evaluation results delivered at the start of the tick.
   */
  uint32_t deliveries;
  /**
   * Turns that got no response from the backend.
   */
  uint32_t degraded_turns;
  /**
   * Departures plus spawns.
   */
  uint32_t lifecycle_events;
} StationTickInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a run from TOML manifest text. `transcript_dir` may be null to
 * keep transcripts in memory (hash chain only).
 *
 * # Safety
 * `manifest_toml` must be a valid NUL-terminated string; `transcript_dir`
 * must be null or a valid NUL-terminated string; `out` must be a valid
 * pointer to writable storage for one handle pointer.
 */
enum StationStatus station_new(const char *manifest_toml,
                               const char *transcript_dir,
                               struct StationHandle **out);

/**
 * Restores a run from a snapshot directory (or the newest snapshot under
 * it), continuing the transcript in `transcript_dir` (may be null).
 *
 * # Safety
 * As for [`station_new`].
 */
enum StationStatus station_restore(const char *snapshot_dir,
                                   const char *transcript_dir,
                                   struct StationHandle **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `handle` must be null or a pointer returned by [`station_new`] or
 * [`station_restore`] that has not been freed.
 */
void station_free(struct StationHandle *handle);

/**
 * Runs one tick. `info` may be null.
 *
 * # Safety
 * `handle` must be a live handle; `info` must be null or writable.
 */
enum StationStatus station_advance_tick(struct StationHandle *handle, struct StationTickInfo *info);

/**
 * Completed ticks so far, or 0 for a null handle.
 *
 * # Safety
 * `handle` must be null or a live handle.
 */
uint64_t station_tick(const struct StationHandle *handle);

/**
 * Whether the next tick begins by holding the clock for an evaluation.
 *
 * # Safety
 * `handle` must be null or a live handle.
 */
bool station_gate_pending(const struct StationHandle *handle);

/**
 * Hex digest of the full world state; null on a null handle.
 * Release with [`station_string_free`].
 *
 * # Safety
 * `handle` must be null or a live handle.
 */
char *station_digest(const struct StationHandle *handle);

/**
 * Hex head of the transcript hash chain; null on a null handle.
 * Release with [`station_string_free`].
 *
 * # Safety
 * `handle` must be null or a live handle.
 */
char *station_transcript_head(const struct StationHandle *handle);

/**
 * Writes a snapshot of the current state into `dir`.
 *
 * # Safety
 * `handle` must be a live handle and `dir` a valid NUL-terminated string.
 */
enum StationStatus station_snapshot(const struct StationHandle *handle, const char *dir);

/**
 * Renders an operator view: `"status"`, `"agents"`, `"leaderboard"`, or
 * `"capsules:<private|public|archive|mail>"`. The text is stored in `*out`
 * and must be released with [`station_string_free`].
 *
 * # Safety
 * `handle` must be a live handle, `view` a valid NUL-terminated string, and
 * `out` writable.
 */
enum StationStatus station_inspect(const struct StationHandle *handle,
                                   const char *view,
                                   char **out);

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library on this thread.
 */
const char *station_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void station_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STATION_H */
