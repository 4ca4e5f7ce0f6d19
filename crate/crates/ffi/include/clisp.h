#ifndef CLISP_H
#define CLISP_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * What a resolver callback found.
 */
typedef enum ClispResolveResult {
  /**
   * `*out` holds the value as JSON text.
   */
  CLISP_RESOLVE_RESULT_FOUND = 0,
  /**
   * The name is not defined. `*out` is ignored.
   */
  CLISP_RESOLVE_RESULT_NOT_FOUND = 1,
  /**
   * The macro failed. `*out` may hold a message.
   */
  CLISP_RESOLVE_RESULT_ERROR = 2,
} ClispResolveResult;

/**
 * Result of every `clisp_*` call. Codes 1 to 5 match the CLI exit codes.
 */
typedef enum ClispStatus {
  CLISP_STATUS_OK = 0,
  CLISP_STATUS_USAGE = 1,
  CLISP_STATUS_PARSE = 2,
  CLISP_STATUS_MACRO = 3,
  CLISP_STATUS_TYPE = 4,
  CLISP_STATUS_TOOL = 5,
  CLISP_STATUS_NULL_ARGUMENT = 6,
  CLISP_STATUS_INVALID_UTF8 = 7,
  CLISP_STATUS_INTERNAL = 8,
} ClispStatus;

/**
 * Opaque session state.
 */
typedef struct ClispContext ClispContext;

/**
 * Looks up one macro. `args_json` is NULL for a variable and a JSON array
 * for a call. Text written to `*out` is released with `free_text`.
 */
typedef enum ClispResolveResult (*ClispResolveFn)(void *user_data,
                                                  const char *name,
                                                  const char *args_json,
                                                  char **out);

typedef void (*ClispFreeFn)(void *user_data, char *text);

/**
 * Macro definitions supplied by the caller.
 */
typedef struct ClispResolver {
  void *user_data;
  ClispResolveFn resolve;
  ClispFreeFn free_text;
} ClispResolver;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a context. Never returns NULL.
 */
struct ClispContext *clisp_context_new(void);

/**
 * # Safety
 * `ctx` must come from `clisp_context_new` and not be used afterwards.
 */
void clisp_context_free(struct ClispContext *ctx);

/**
 * Message for the last failed call on `ctx`, or NULL. Valid until the next
 * call on `ctx`.
 *
 * # Safety
 * `ctx` must be a live context or NULL.
 */
const char *clisp_last_error(const struct ClispContext *ctx);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, freed once.
 */
void clisp_string_free(char *s);

/**
 * C compiler used by the `include` macro. NULL restores the default
 * lookup (`CLISP_CC`, then `clang`).
 *
 * # Safety
 * `ctx` must be live; `path` NULL or a NUL-terminated string.
 */
enum ClispStatus clisp_context_set_c_frontend(struct ClispContext *ctx, const char *path);

/**
 * S-expression source to the JSON form array.
 *
 * # Safety
 * `ctx` must be live, `source` NUL-terminated, `out` writable.
 */
enum ClispStatus clisp_s2json(struct ClispContext *ctx, const char *source, char **out);

/**
 * JSON form array to S-expression source, one form per line.
 *
 * # Safety
 * As for `clisp_s2json`.
 */
enum ClispStatus clisp_json2s(struct ClispContext *ctx, const char *json, char **out);

/**
 * Expands macros in a JSON form array. `include` is always available;
 * other names go to `resolver`, which may be NULL.
 *
 * # Safety
 * As for `clisp_s2json`; `resolver` must be NULL or point to a valid
 * `ClispResolver` whose callbacks stay valid for the call.
 */
enum ClispStatus clisp_expand(struct ClispContext *ctx,
                              const char *json,
                              const struct ClispResolver *resolver,
                              char **out);

/**
 * Compiles S-expression source to textual LLVM IR. When `entry` is not
 * NULL a `main` calling it is appended.
 *
 * # Safety
 * As for `clisp_s2json`; `entry` NULL or NUL-terminated.
 */
enum ClispStatus clisp_compile(struct ClispContext *ctx,
                               const char *source,
                               const char *entry,
                               char **out);

/**
 * `clisp_compile` for a JSON form array.
 *
 * # Safety
 * As for `clisp_compile`.
 */
enum ClispStatus clisp_compile_json(struct ClispContext *ctx,
                                    const char *json,
                                    const char *entry,
                                    char **out);

/**
 * Library version, static storage.
 */
const char *clisp_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLISP_H */
