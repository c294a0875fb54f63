#ifndef FRAGEX_H
#define FRAGEX_H

/* Generated by cbindgen from crates/ffi. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum FragexStatus {
  FRAGEX_STATUS_OK = 0,
  FRAGEX_STATUS_NULL_ARGUMENT = 1,
  FRAGEX_STATUS_INVALID_UTF8 = 2,
  FRAGEX_STATUS_INVALID_ARGUMENT = 3,
  FRAGEX_STATUS_INGEST_FAILED = 4,
  FRAGEX_STATUS_EMPTY_SCOPE = 5,
  FRAGEX_STATUS_UNKNOWN_RELEASE = 6,
  FRAGEX_STATUS_GIT_FAILED = 7,
  FRAGEX_STATUS_PERSISTENCE_FAILED = 8,
  FRAGEX_STATUS_IO = 9,
  FRAGEX_STATUS_PANIC = 10,
} FragexStatus;

typedef enum FragexClusterMode {
  FRAGEX_CLUSTER_MODE_SIMILARITY = 0,
  FRAGEX_CLUSTER_MODE_RELEASE = 1,
} FragexClusterMode;

typedef enum FragexFormat {
  FRAGEX_FORMAT_JSON = 0,
  FRAGEX_FORMAT_CSV = 1,
} FragexFormat;

/**
 * A loaded repository and its stem.
 */
typedef struct FragexRepo FragexRepo;

/**
 * A materialised scope bound to the repository it was resolved on.
 */
typedef struct FragexScope FragexScope;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next fragex call on the same thread.
 */
const char *fragex_last_error(void);

/**
 * Static name of a status code.
 */
const char *fragex_status_name(enum FragexStatus status);

/**
 * Opens a canonical dump file, or a git repository when `path` is a directory.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` is writable.
 */
enum FragexStatus fragex_repo_open(const char *path, struct FragexRepo **out);

/**
 * Parses an in-memory canonical dump.
 *
 * # Safety
 * `dump` is a NUL-terminated string; `out` is writable.
 */
enum FragexStatus fragex_repo_from_dump(const char *dump, struct FragexRepo **out);

/**
 * # Safety
 * `repo` is null or a handle from `fragex_repo_open`/`fragex_repo_from_dump`
 * that has not been freed.
 */
void fragex_repo_free(struct FragexRepo *repo);

/**
 * Number of stem nodes; 0 for a null handle.
 *
 * # Safety
 * `repo` is null or a live handle.
 */
size_t fragex_repo_node_count(const struct FragexRepo *repo);

/**
 * Number of commits on the stem (leads plus squashed); 0 for a null handle.
 *
 * # Safety
 * `repo` is null or a live handle.
 */
size_t fragex_repo_commit_count(const struct FragexRepo *repo);

/**
 * Resolves a scope. `filter_json` is NULL (whole stem) or a JSON object with
 * the scope filter fields.
 *
 * # Safety
 * `repo` is a live handle, `filter_json` is null or NUL-terminated, `out` is
 * writable.
 */
enum FragexStatus fragex_scope_new(const struct FragexRepo *repo,
                                   const char *filter_json,
                                   double granularity,
                                   enum FragexClusterMode mode,
                                   struct FragexScope **out);

/**
 * Re-cuts the scope's clusters at a new granularity in place.
 *
 * # Safety
 * `scope` is a live handle.
 */
enum FragexStatus fragex_scope_set_granularity(struct FragexScope *scope, double granularity);

/**
 * # Safety
 * `scope` is null or a live handle.
 */
size_t fragex_scope_cluster_count(const struct FragexScope *scope);

/**
 * Writes the scope's JSON description (id, range, clusters) to `out`.
 *
 * # Safety
 * `scope` is a live handle; `out` is writable.
 */
enum FragexStatus fragex_scope_json(const struct FragexScope *scope, char **out);

/**
 * # Safety
 * `scope` is null or a handle from `fragex_scope_new` that has not been freed.
 */
void fragex_scope_free(struct FragexScope *scope);

/**
 * Dimension value table of the scope as JSON or CSV. `dims` is NULL for all
 * dimensions or a comma-separated list.
 *
 * # Safety
 * `scope` is a live handle, `dims` is null or NUL-terminated, `out` is writable.
 */
enum FragexStatus fragex_scope_table(const struct FragexScope *scope,
                                     size_t k,
                                     const char *dims,
                                     enum FragexFormat format,
                                     char **out);

/**
 * Inspection matrix as JSON. `fragments_json` is an array of
 * `{"dimension": ..., "value": ...}` objects.
 *
 * # Safety
 * `scope` is a live handle, `fragments_json` is NUL-terminated, `out` is writable.
 */
enum FragexStatus fragex_scope_inspect(const struct FragexScope *scope,
                                       const char *fragments_json,
                                       char **out);

/**
 * Stem-wide history of a `dimension=value` fragment as JSON. `scope` may be
 * NULL; when given, occurrences inside it are flagged.
 *
 * # Safety
 * `repo` is a live handle, `fragment` is NUL-terminated, `scope` is null or a
 * live handle, `out` is writable.
 */
enum FragexStatus fragex_history(const struct FragexRepo *repo,
                                 const char *fragment,
                                 const struct FragexScope *scope,
                                 char **out);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` is null or a string from this library that has not been freed.
 */
void fragex_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRAGEX_H */
