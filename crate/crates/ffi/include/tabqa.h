/* SPDX-License-Identifier: Apache-2.0 */

#ifndef TABQA_H
#define TABQA_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Program language accepted by [`tq_execute`].
typedef enum TqDialect {
  TQ_DIALECT_HOST = 0,
  TQ_DIALECT_SQL = 1,
} TqDialect;

// Classification of one program execution.
typedef enum TqExecStatus {
  TQ_EXEC_STATUS_OK = 0,
  TQ_EXEC_STATUS_RUNTIME_ERROR = 1,
  TQ_EXEC_STATUS_TIMEOUT = 2,
  TQ_EXEC_STATUS_SANDBOX_VIOLATION = 3,
  TQ_EXEC_STATUS_EMPTY_RESULT = 4,
} TqExecStatus;

// Result code of every `tq_*` call.
typedef enum TqStatus {
  TQ_STATUS_OK = 0,
  TQ_STATUS_NULL_ARGUMENT = 1,
  TQ_STATUS_INVALID_UTF8 = 2,
  TQ_STATUS_INVALID_ARGUMENT = 3,
  TQ_STATUS_FORMAT = 4,
  TQ_STATUS_IO = 5,
  TQ_STATUS_PANIC = 6,
} TqStatus;

// Outcome of [`tq_execute`].
typedef struct TqResult TqResult;

// A parsed multi-index table.
typedef struct TqTable TqTable;

// An ordered set of uniquely named tables.
typedef struct TqTableSet TqTableSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next `tq_*` call on the same thread.
const char *tq_last_error(void);

// Library version as a static string.
const char *tq_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void tq_string_free(char *s);

// Loads and parses a table file (`.json`, `.csv` or `.tsv`). Header band
// sizes apply to CSV and TSV only.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum TqStatus tq_table_load(const char *path,
                            uintptr_t header_rows,
                            uintptr_t left_cols,
                            struct TqTable **out);

// Parses a tab-separated grid (rows split on newlines) with the given
// header band sizes.
//
// # Safety
// `name` and `tsv` must be NUL-terminated strings and `out` a writable pointer.
enum TqStatus tq_table_from_tsv(const char *name,
                                const char *tsv,
                                uintptr_t top_header_depth,
                                uintptr_t left_header_width,
                                struct TqTable **out);

// # Safety
// `t` must be null or a live table handle.
void tq_table_free(struct TqTable *t);

// Row count, column count, row index depth and column index depth.
//
// # Safety
// `t` must be a live table handle; the out pointers may be null.
enum TqStatus tq_table_shape(const struct TqTable *t,
                             uintptr_t *n_rows,
                             uintptr_t *n_cols,
                             uintptr_t *row_depth,
                             uintptr_t *col_depth);

// Prompt rendering of the table with the first `preview_rows` rows.
//
// # Safety
// `t` must be a live table handle and `out` a writable pointer.
enum TqStatus tq_table_serialize(const struct TqTable *t, uintptr_t preview_rows, char **out);

// # Safety
// `out` must be a writable pointer.
enum TqStatus tq_tableset_new(struct TqTableSet **out);

// Adds a copy of `t`. Names must be unique within the set.
//
// # Safety
// `set` and `t` must be live handles.
enum TqStatus tq_tableset_add(struct TqTableSet *set, const struct TqTable *t);

// # Safety
// `set` must be null or a live table set handle.
void tq_tableset_free(struct TqTableSet *set);

// Runs one program against the tables. The operation APIs are available
// to host programs. A `timeout_ms` of zero uses the default budget.
//
// # Safety
// `set` must be a live table set, `program` a NUL-terminated string and
// `out` a writable pointer.
enum TqStatus tq_execute(const struct TqTableSet *set,
                         enum TqDialect dialect,
                         const char *program,
                         uint64_t timeout_ms,
                         struct TqResult **out);

// # Safety
// `r` must be a live result handle.
enum TqStatus tq_result_status(const struct TqResult *r, enum TqExecStatus *out);

// Normalized answer text. Fails with `InvalidArgument` when the program
// produced no answer.
//
// # Safety
// `r` must be a live result handle and `out` a writable pointer.
enum TqStatus tq_result_answer(const struct TqResult *r, char **out);

// Error detail of a failed execution, or an empty string.
//
// # Safety
// `r` must be a live result handle and `out` a writable pointer.
enum TqStatus tq_result_error(const struct TqResult *r, char **out);

// True when the result's answer matches one of the `n_gold` gold strings
// (or, for list answers, the gold list as a multiset). A result without an
// answer never matches.
//
// # Safety
// `r` must be a live result handle, `gold` an array of `n_gold`
// NUL-terminated strings and `out` a writable pointer.
enum TqStatus tq_result_matches(const struct TqResult *r,
                                const char *const *gold,
                                uintptr_t n_gold,
                                bool *out);

// # Safety
// `r` must be null or a live result handle.
void tq_result_free(struct TqResult *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TABQA_H */
