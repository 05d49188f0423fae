#ifndef GRIDCASCADE_H
#define GRIDCASCADE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GcStatus {
  GC_STATUS_OK = 0,
  GC_STATUS_NULL_POINTER = 1,
  GC_STATUS_INVALID_UTF8 = 2,
  GC_STATUS_PARSE = 3,
  GC_STATUS_VALIDATION = 4,
  GC_STATUS_SOLVER = 5,
  GC_STATUS_INTEGRATION = 6,
  GC_STATUS_IO = 7,
  GC_STATUS_OUT_OF_RANGE = 8,
  GC_STATUS_PANIC = 9,
} GcStatus;

typedef enum GcControlMode {
  GC_CONTROL_MODE_OFF = 0,
  GC_CONTROL_MODE_FULL = 1,
  GC_CONTROL_MODE_PINNING = 2,
} GcControlMode;

typedef enum GcOutcome {
  GC_OUTCOME_SETTLED = 0,
  GC_OUTCOME_HORIZON_EXHAUSTED = 1,
  GC_OUTCOME_ISLANDED_UNBALANCED = 2,
} GcOutcome;

/*
 Opaque grid case.
 */
typedef struct GcCase GcCase;

/*
 Opaque cascade result; keeps the labels of the case it came from.
 */
typedef struct GcReport GcReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *gc_version(void);

/*
 Message for the last failed call on this thread; empty after a success.
 Valid until the next call on the same thread.
 */
const char *gc_last_error_message(void);

/*
 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum GcStatus gc_case_builtin_five_node(struct GcCase **out);

/*
 Parses a case in the native TOML format.

 # Safety
 `text` must be NUL-terminated; `out` must be writable.
 */
enum GcStatus gc_case_from_native(const char *text_ptr, struct GcCase **out);

/*
 Parses an IEEE common-format file with default options (K = 1/x, swing
 bus absorbs the imbalance, I = 1, γ = 0.1, α = 0.6).

 # Safety
 `text` must be NUL-terminated; `out` must be writable.
 */
enum GcStatus gc_case_from_cdf(const char *text_ptr, struct GcCase **out);

/*
 Applies a parameter overrides document in place.

 # Safety
 `case` must be a live handle; `text` must be NUL-terminated.
 */
enum GcStatus gc_case_apply_overrides(struct GcCase *case_, const char *text_ptr);

/*
 # Safety
 `case` must be null or a handle not yet freed.
 */
void gc_case_free(struct GcCase *case_);

/*
 # Safety
 `case` must be a live handle.
 */
size_t gc_case_node_count(const struct GcCase *case_);

/*
 # Safety
 `case` must be a live handle.
 */
size_t gc_case_line_count(const struct GcCase *case_);

/*
 Endpoints of line `index` in the case's sorted line order.

 # Safety
 `case` must be a live handle; `from` and `to` must be writable.
 */
enum GcStatus gc_case_line(const struct GcCase *case_, size_t index, uint32_t *from, uint32_t *to);

/*
 Runs the dynamic cascade started by removing line `(from, to)`.
 `pinned` lists node labels and is read only in pinning mode.

 # Safety
 `case` must be a live handle; `pinned` must point to `pinned_len` values
 (or be null when `pinned_len` is 0); `out` must be writable.
 */
enum GcStatus gc_simulate(const struct GcCase *case_,
                          uint32_t from,
                          uint32_t to,
                          enum GcControlMode mode,
                          double gain,
                          const uint32_t *pinned,
                          size_t pinned_len,
                          struct GcReport **out);

/*
 Critical full-control gain of the grid with line `(from, to)` removed.

 # Safety
 `case` must be a live handle; `value` must be writable.
 */
enum GcStatus gc_critical_gain(const struct GcCase *case_,
                               uint32_t from,
                               uint32_t to,
                               double *value);

/*
 # Safety
 `report` must be null or a handle not yet freed.
 */
void gc_report_free(struct GcReport *report);

/*
 Number of lines that failed after the initial fault.

 # Safety
 `report` must be a live handle.
 */
size_t gc_report_n_c(const struct GcReport *report);

/*
 # Safety
 `report` must be a live handle.
 */
enum GcOutcome gc_report_outcome(const struct GcReport *report);

/*
 Time at which the run settled; `OutOfRange` when it never did.

 # Safety
 `report` must be a live handle; `time` must be writable.
 */
enum GcStatus gc_report_settle_time(const struct GcReport *report, double *time);

/*
 Trip `index` in trip order: endpoints and trip time.

 # Safety
 `report` must be a live handle; the output pointers must be writable.
 */
enum GcStatus gc_report_trip(const struct GcReport *report,
                             size_t index,
                             uint32_t *from,
                             uint32_t *to,
                             double *time);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRIDCASCADE_H */
