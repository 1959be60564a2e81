#ifndef UXEVAL_H
#define UXEVAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum UxevalStatus {
  UXEVAL_STATUS_OK = 0,
  UXEVAL_STATUS_NULL_ARGUMENT = 1,
  UXEVAL_STATUS_INVALID_UTF8 = 2,
  UXEVAL_STATUS_INVALID_JSON = 3,
  UXEVAL_STATUS_VALIDATION = 4,
  UXEVAL_STATUS_NOT_FOUND = 5,
  UXEVAL_STATUS_CONFLICT = 6,
  UXEVAL_STATUS_LLM = 7,
  UXEVAL_STATUS_PIPELINE = 8,
  UXEVAL_STATUS_STORAGE = 9,
  UXEVAL_STATUS_CONFIG = 10,
  UXEVAL_STATUS_PANIC = 11,
} UxevalStatus;

typedef enum UxevalExportFormat {
  UXEVAL_EXPORT_FORMAT_JSON = 0,
  UXEVAL_EXPORT_FORMAT_MARKDOWN = 1,
} UxevalExportFormat;

/**
 * Opaque handle to a project service.
 */
typedef struct UxevalService UxevalService;

/**
 * Paired t-test result; `p` is two-sided.
 */
typedef struct UxevalTTest {
  double t;
  double p;
  size_t df;
} UxevalTTest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static nul-terminated string.
 */
const char *uxeval_version(void);

/**
 * Message of the last failed call on this thread, or null after a
 * success. Valid until the next call on the same thread.
 */
const char *uxeval_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void uxeval_string_free(char *s);

/**
 * Opens a service from a TOML config file. Environment overrides apply.
 *
 * # Safety
 * `config_path` must be a nul-terminated string and `out` valid for writes.
 */
enum UxevalStatus uxeval_service_open(const char *config_path, struct UxevalService **out);

/**
 * Closes a service. Null is ignored.
 *
 * # Safety
 * `svc` must be null or a handle from [`uxeval_service_open`], freed once.
 */
void uxeval_service_free(struct UxevalService *svc);

/**
 * Creates a project from `ProjectInputs` JSON; writes the session JSON.
 *
 * # Safety
 * Pointer arguments must be valid; `out_json` must be writable.
 */
enum UxevalStatus uxeval_project_create(const struct UxevalService *svc,
                                        const char *inputs_json,
                                        char **out_json);

/**
 * Writes the session JSON for `id`.
 *
 * # Safety
 * Pointer arguments must be valid; `out_json` must be writable.
 */
enum UxevalStatus uxeval_project_get(const struct UxevalService *svc,
                                     const char *id,
                                     char **out_json);

/**
 * Reruns the recommendation. `indexes_json` may be null to keep the
 * current indexes. Writes `{recommendation, diff, revision}`.
 *
 * # Safety
 * Pointer arguments must be valid; `out_json` must be writable.
 */
enum UxevalStatus uxeval_project_regenerate(const struct UxevalService *svc,
                                            const char *id,
                                            const char *indexes_json,
                                            char **out_json);

/**
 * Adds a metric to the cart; writes the updated session JSON.
 *
 * # Safety
 * Pointer arguments must be valid; `out_json` must be writable.
 */
enum UxevalStatus uxeval_cart_add(const struct UxevalService *svc,
                                  const char *id,
                                  const char *metric,
                                  char **out_json);

/**
 * Removes a metric from the cart; writes the updated session JSON.
 *
 * # Safety
 * Pointer arguments must be valid; `out_json` must be writable.
 */
enum UxevalStatus uxeval_cart_remove(const struct UxevalService *svc,
                                     const char *id,
                                     const char *metric,
                                     char **out_json);

/**
 * Generates the plan and UX outcome for the cart; writes their JSON.
 *
 * # Safety
 * Pointer arguments must be valid; `out_json` must be writable.
 */
enum UxevalStatus uxeval_project_generate(const struct UxevalService *svc,
                                          const char *id,
                                          char **out_json);

/**
 * Writes the export artifact in `format`.
 *
 * # Safety
 * Pointer arguments must be valid; `out` must be writable.
 */
enum UxevalStatus uxeval_project_export(const struct UxevalService *svc,
                                        const char *id,
                                        enum UxevalExportFormat format,
                                        char **out);

/**
 * Paired t-test of `a[i] - b[i]` over `n` pairs.
 *
 * # Safety
 * `a` and `b` must point to `n` readable doubles; `out` must be writable.
 */
enum UxevalStatus uxeval_paired_t_test(const double *a,
                                       const double *b,
                                       size_t n,
                                       struct UxevalTTest *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UXEVAL_H */
