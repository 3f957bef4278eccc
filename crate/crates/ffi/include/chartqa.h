#ifndef CHARTQA_H
#define CHARTQA_H

#include <stdbool.h>
#include <stddef.h>

typedef enum CqStatus {
  CQ_STATUS_OK = 0,
  CQ_STATUS_NULL_POINTER = 1,
  CQ_STATUS_INVALID_UTF8 = 2,
  CQ_STATUS_INVALID_ARGUMENT = 3,
  CQ_STATUS_PARSE = 4,
  CQ_STATUS_EXTRACTION = 5,
  CQ_STATUS_EXECUTION = 6,
  CQ_STATUS_IO = 7,
  CQ_STATUS_MODEL = 8,
  CQ_STATUS_PANIC = 9,
} CqStatus;

/**
 * Parsed chart description.
 */
typedef struct CqChart CqChart;

/**
 * Trained model with its vocabulary.
 */
typedef struct CqModel CqModel;

/**
 * Data table with row labels and column headers.
 */
typedef struct CqTable CqTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into this library on the same thread.
 */
const char *cq_last_error(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void cq_string_free(char *s);

/**
 * Parses ChartSpec JSON into a new chart handle.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum CqStatus cq_chart_parse(const char *json, struct CqChart **out);

/**
 * # Safety
 * `chart` must come from [`cq_chart_parse`] and not have been freed.
 */
void cq_chart_free(struct CqChart *chart);

/**
 * Reconstructs the chart's data table. Diagnostics are written as JSON
 * lines to `diagnostics` when it is not NULL (free with
 * [`cq_string_free`]).
 *
 * # Safety
 * `chart` must be a live handle; `out` must be writable; `diagnostics` may
 * be NULL.
 */
enum CqStatus cq_extract_table(const struct CqChart *chart,
                               struct CqTable **out,
                               char **diagnostics);

/**
 * Reads a table from CSV text (header row with an empty first cell).
 *
 * # Safety
 * `csv` must be a NUL-terminated string; `out` must be writable.
 */
enum CqStatus cq_table_from_csv(const char *csv, struct CqTable **out);

/**
 * # Safety
 * `table` must be a live handle; `out` must be writable.
 */
enum CqStatus cq_table_to_csv(const struct CqTable *table, char **out);

/**
 * # Safety
 * `table` must be a live handle; `rows` and `cols` must be writable.
 */
enum CqStatus cq_table_shape(const struct CqTable *table, size_t *rows, size_t *cols);

/**
 * Cell value; `present` is false for an empty cell.
 *
 * # Safety
 * `table` must be a live handle; `value` and `present` must be writable.
 */
enum CqStatus cq_table_cell(const struct CqTable *table,
                            size_t row,
                            size_t col,
                            double *value,
                            bool *present);

/**
 * # Safety
 * `table` must come from this library and not have been freed.
 */
void cq_table_free(struct CqTable *table);

/**
 * Runs `op` (NONE, COUNT, SUM, AVERAGE, DIFFERENCE, RATIO, YES, NO) over
 * the `n` cells `(rows[i], cols[i])` and returns the answer text.
 *
 * # Safety
 * `rows` and `cols` must point to `n` readable values (may be NULL when
 * `n` is 0); `op` must be a NUL-terminated string; `out` must be writable.
 */
enum CqStatus cq_execute(const struct CqTable *table,
                         const char *op,
                         const size_t *rows,
                         const size_t *cols,
                         size_t n,
                         char **out);

/**
 * Relaxed answer match at relative tolerance `tol`.
 *
 * # Safety
 * `pred` and `gold` must be NUL-terminated strings; `correct` must be
 * writable.
 */
enum CqStatus cq_relaxed_match(const char *pred, const char *gold, double tol, bool *correct);

/**
 * Loads a checkpoint file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CqStatus cq_model_load(const char *path, struct CqModel **out);

/**
 * Answers `question` about `chart` using `table` (for instance the
 * extracted one) and returns the answer text.
 *
 * # Safety
 * All handles must be live; `question` must be a NUL-terminated string;
 * `out` must be writable.
 */
enum CqStatus cq_model_answer(const struct CqModel *model,
                              const struct CqChart *chart,
                              const struct CqTable *table,
                              const char *question,
                              char **out);

/**
 * # Safety
 * `model` must come from [`cq_model_load`] and not have been freed.
 */
void cq_model_free(struct CqModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHARTQA_H */
