#ifndef VOA_H
#define VOA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VoaSchedule {
  VOA_SCHEDULE_RANDOM_REFERENCE = 0,
  VOA_SCHEDULE_EXPONENTIAL_CLOCK = 1,
  VOA_SCHEDULE_DETERMINISTIC_CLOCK = 2,
} VoaSchedule;

/**
 * Result codes.
 */
typedef enum VoaStatus {
  VOA_STATUS_OK = 0,
  VOA_STATUS_NULL_POINTER = 1,
  VOA_STATUS_DOMAIN = 2,
  VOA_STATUS_CONVERGENCE = 3,
  VOA_STATUS_PARSE = 4,
  VOA_STATUS_INVALID_DATA = 5,
  VOA_STATUS_IO = 6,
  VOA_STATUS_INVALID_UTF8 = 7,
  VOA_STATUS_PANIC = 8,
} VoaStatus;

/**
 * Opaque impression log grouped into per-user snapshots.
 */
typedef struct VoaImpressionLog VoaImpressionLog;

/**
 * Opaque post trace, sorted by creation time.
 */
typedef struct VoaTrace VoaTrace;

typedef struct VoaOptimalRate {
  double mu_star;
  double utility_at_star;
  bool clamped;
} VoaOptimalRate;

typedef struct VoaRoundStats {
  double mean;
  double std;
  double standard_error;
  size_t rounds;
} VoaRoundStats;

typedef struct VoaTraceMeta {
  size_t post_count;
  size_t publisher_count;
  double time_span_hours;
  double estimated_lambda;
} VoaTraceMeta;

typedef struct VoaSimConfig {
  size_t k;
  double sample_interval_hours;
  double period_hours;
  size_t rounds;
  uint64_t seed;
  enum VoaSchedule schedule;
} VoaSimConfig;

typedef struct VoaOverlapTable {
  uint64_t both;
  uint64_t only_x;
  uint64_t only_y;
  uint64_t neither;
  uint64_t universe_size;
} VoaOverlapTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread; empty after a success.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *voa_last_error(void);

/**
 * Closed-form VoA for exponential inter-access times. `out_fill` may be NULL.
 *
 * # Safety
 * `out_mean` must be valid for writes; `out_fill` must be NULL or valid.
 */
enum VoaStatus voa_exponential(double lambda,
                               double mu,
                               double k,
                               double *out_mean,
                               double *out_fill);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum VoaStatus voa_summation_oracle(double lambda, double mu, double k, double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum VoaStatus voa_quadrature_oracle(double lambda, double mu, double k, double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum VoaStatus voa_deterministic(double lambda, double tau, uint64_t k, double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum VoaStatus voa_poisson_k(double lambda, double mu, double alpha, double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum VoaStatus voa_average_k(double lambda, double mu, double alpha, double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum VoaStatus voa_utility(double lambda, double mu, double k, double cost, double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum VoaStatus voa_utility_gradient(double lambda, double mu, double k, double cost, double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum VoaStatus voa_optimal_access_rate(double lambda,
                                       uint32_t k,
                                       double cost,
                                       struct VoaOptimalRate *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum VoaStatus voa_optimal_access_rate_numeric(double lambda,
                                               uint32_t k,
                                               double cost,
                                               double search_upper,
                                               double *out);

/**
 * Monte Carlo VoA with Poisson arrivals and a clock access schedule.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum VoaStatus voa_simulate_synthetic(double lambda,
                                      double mu,
                                      uint64_t k,
                                      size_t accesses_per_round,
                                      size_t rounds,
                                      uint64_t seed,
                                      enum VoaSchedule schedule,
                                      struct VoaRoundStats *out);

/**
 * Reads a post trace (`.csv` or JSON lines) from `path`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum VoaStatus voa_trace_read_file(const char *path, struct VoaTrace **out);

/**
 * Parses a post trace from an in-memory buffer.
 *
 * # Safety
 * `data` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum VoaStatus voa_trace_parse(const char *data, bool csv, struct VoaTrace **out);

/**
 * Number of posts in the trace; 0 for NULL.
 *
 * # Safety
 * `trace` must be NULL or a live handle.
 */
size_t voa_trace_len(const struct VoaTrace *trace);

/**
 * # Safety
 * `trace` must be a live handle; `out` must be valid for writes.
 */
enum VoaStatus voa_trace_meta(const struct VoaTrace *trace, struct VoaTraceMeta *out);

/**
 * Trace-driven FIFO simulation.
 *
 * # Safety
 * `trace` must be a live handle; `config` must point to a valid config and
 * `out` must be valid for writes.
 */
enum VoaStatus voa_trace_simulate(const struct VoaTrace *trace,
                                  const struct VoaSimConfig *config,
                                  struct VoaRoundStats *out);

/**
 * # Safety
 * `trace` must be NULL or a handle not yet freed.
 */
void voa_trace_free(struct VoaTrace *trace);

/**
 * Reads an impression log (`.csv` or JSON lines) from `path`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum VoaStatus voa_impressions_read_file(const char *path, struct VoaImpressionLog **out);

/**
 * # Safety
 * `data` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum VoaStatus voa_impressions_parse(const char *data, bool csv, struct VoaImpressionLog **out);

/**
 * Number of distinct users; 0 for NULL.
 *
 * # Safety
 * `log` must be NULL or a live handle.
 */
size_t voa_impressions_user_count(const struct VoaImpressionLog *log);

/**
 * Mean novel impressions per snapshot for `user`. `truncate_k == 0` keeps
 * every position.
 *
 * # Safety
 * `log` must be a live handle, `user` a NUL-terminated string and `out_mean`
 * valid for writes.
 */
enum VoaStatus voa_impressions_snapshot_voa(const struct VoaImpressionLog *log,
                                            const char *user,
                                            size_t truncate_k,
                                            bool fifo_reorder,
                                            double *out_mean);

/**
 * Overlap table of posts seen by users `x` and `y`, over the union of posts
 * seen by every user in the log.
 *
 * # Safety
 * `log` must be a live handle, `x` and `y` NUL-terminated strings and `out`
 * valid for writes.
 */
enum VoaStatus voa_impressions_overlap(const struct VoaImpressionLog *log,
                                       const char *x,
                                       const char *y,
                                       size_t truncate_k,
                                       struct VoaOverlapTable *out);

/**
 * # Safety
 * `log` must be NULL or a handle not yet freed.
 */
void voa_impressions_free(struct VoaImpressionLog *log);

/**
 * `both / (both + only_y)`.
 *
 * # Safety
 * `table` must point to a valid table; `out` must be valid for writes.
 */
enum VoaStatus voa_coverage_fraction(const struct VoaOverlapTable *table, double *out);

/**
 * Larger of the two directional coverage fractions.
 *
 * # Safety
 * `table` must point to a valid table; `out` must be valid for writes.
 */
enum VoaStatus voa_pairwise_overlap(const struct VoaOverlapTable *table, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VOA_H */
