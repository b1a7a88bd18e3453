#ifndef SPANPARSER_H
#define SPANPARSER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by all fallible entry points.
typedef enum SpStatus {
  SP_STATUS_OK = 0,
  SP_STATUS_NULL_ARGUMENT = 1,
  SP_STATUS_INVALID_UTF8 = 2,
  // Malformed trees, tagged text, traces or mismatched inputs.
  SP_STATUS_DATA = 3,
  // The model file is missing, unreadable or not a model bundle.
  SP_STATUS_MODEL = 4,
  // Scoring produced a non-finite value.
  SP_STATUS_NUMERIC = 5,
  SP_STATUS_PANIC = 6,
} SpStatus;

// A loaded parser model. Opaque to C callers.
typedef struct SpModel SpModel;

// Bracket counts and scores for a set of predicted trees against gold.
typedef struct SpF1Report {
  uintptr_t matched;
  uintptr_t predicted;
  uintptr_t gold;
  double recall;
  double precision;
  double f1;
} SpF1Report;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Loads a model bundle from `path` into `*out`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum SpStatus sp_model_load(const char *path, struct SpModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must be null or come from [`sp_model_load`] and not be freed twice.
void sp_model_free(struct SpModel *model);

// Parses one sentence of `word_TAG` tokens and writes its bracketed tree.
//
// # Safety
// `model` must come from [`sp_model_load`]; `tagged` must be a
// NUL-terminated string; `out` must be writable.
enum SpStatus sp_parse_tagged(const struct SpModel *model, const char *tagged, char **out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string handed out by this library, freed once.
void sp_string_free(char *s);

// Scores predicted trees against gold trees, both given as bracketed text
// with one tree per line. Trees are normalized before scoring.
//
// # Safety
// `predicted` and `gold` must be NUL-terminated strings; `out` writable.
enum SpStatus sp_eval_trees(const char *predicted, const char *gold, struct SpF1Report *out);

// Writes the static-oracle action trace for a gold tree, one action per line.
//
// # Safety
// `tree` must be a NUL-terminated string; `out` writable.
enum SpStatus sp_static_oracle(const char *tree, char **out);

// Replays `prefix` (one action per line, possibly empty) from the initial
// configuration and writes the set of optimal next actions for the gold
// tree, one per line.
//
// # Safety
// `tree` and `prefix` must be NUL-terminated strings; `out` writable.
enum SpStatus sp_dynamic_oracle(const char *tree, const char *prefix, char **out);

// The message for the last failure on this thread, or null after a
// success. The pointer stays valid until the next call on this thread.
const char *sp_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPANPARSER_H */
