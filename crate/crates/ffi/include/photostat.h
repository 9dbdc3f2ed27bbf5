#ifndef PHOTOSTAT_H
#define PHOTOSTAT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_PARAMETER = 2,
  PS_STATUS_CONFIG = 3,
  PS_STATUS_INVERSION = 4,
  PS_STATUS_FORMAT = 5,
  PS_STATUS_OUT_OF_ORDER = 6,
  PS_STATUS_IO = 7,
  PS_STATUS_FIT = 8,
  PS_STATUS_DEGENERATE_INPUT = 9,
  PS_STATUS_BUFFER_TOO_SMALL = 10,
  PS_STATUS_PANIC = 11,
} PsStatus;

// Opaque per-pulse count table.
typedef struct PsSeries PsSeries;

// Opaque timetag record with its header.
typedef struct PsTimetags PsTimetags;

// Flat simulation configuration. Times in seconds, energies in pJ.
typedef struct PsRunConfig {
  double pulse_energy;
  double sat_energy;
  double pulse_duration;
  double rad_lifetime;
  double rep_period;
  double max_rate;
  double isc_prob;
  double triplet_lifetime;
  double bleach_prob;
  double emission_prob;
  double dead_time;
  double dark_rate;
  double split_ratio;
  double reject_window_mult;
  double efficiency;
  double background_mean;
  uint64_t n_pulses;
  uint64_t seed;
} PsRunConfig;

// Blinking-model fit output.
typedef struct PsQCurveFit {
  double isc_prob;
  double isc_prob_stderr;
  double triplet_lifetime;
  double triplet_lifetime_stderr;
  double residual_norm;
  bool limiting_regime;
} PsQCurveFit;

// Saturation fit output.
typedef struct PsSaturationFit {
  double max_rate;
  double max_rate_stderr;
  double sat_energy;
  double sat_energy_stderr;
  double residual_norm;
  size_t n_rejected;
} PsSaturationFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread; empty after a success.
// The pointer stays valid until the next call on this thread.
const char *ps_last_error(void);

// Library version as a static NUL-terminated string.
const char *ps_version(void);

// Excited-state population σ for a pulse energy (pJ).
//
// # Safety
// `out` must be a valid pointer.
enum PsStatus ps_saturation_law(double pulse_energy,
                                double sat_energy,
                                double duration_ratio,
                                double *out_sigma);

// P(0), P(1), P(2) and the mean count of a coherent pulse of mean `alpha`
// split onto two dead-time-limited detectors.
//
// # Safety
// All output pointers must be valid.
enum PsStatus ps_coherent_deadtime_pn(double alpha,
                                      double *p0,
                                      double *p1,
                                      double *p2,
                                      double *mean);

// Solves for overall efficiency and background mean from measured P(1), P(2).
//
// # Safety
// Output pointers must be valid.
enum PsStatus ps_invert_background(double p1,
                                   double p2,
                                   double *efficiency,
                                   double *background_mean);

// Source-level Mandel parameter of the blinking model for a `k`-pulse window.
//
// # Safety
// `out_q` must be valid.
enum PsStatus ps_qs_model(uint64_t k,
                          double isc_prob,
                          double triplet_lifetime,
                          double rep_period,
                          double *out_q);

// Fills `config` with the single-molecule reference preset.
//
// # Safety
// `config` must be valid.
enum PsStatus ps_run_config_reference(uint64_t seed, struct PsRunConfig *config);

// Runs the Monte Carlo simulation.
//
// # Safety
// `config` and `result` must be valid; free the result with `ps_timetags_free`.
enum PsStatus ps_simulate(const struct PsRunConfig *config, struct PsTimetags **result);

// Reads a binary or CSV timetag file.
//
// # Safety
// `path` must be a NUL-terminated string and `result` valid.
enum PsStatus ps_timetags_read(const char *path, struct PsTimetags **result);

// Writes a timetag file; a `.csv` extension selects the text format.
//
// # Safety
// `tags` must be a live handle and `path` NUL-terminated.
enum PsStatus ps_timetags_write(const struct PsTimetags *tags, const char *path);

// Number of timetags; 0 for a null handle.
//
// # Safety
// `tags` must be null or a live handle.
size_t ps_timetags_len(const struct PsTimetags *tags);

// Timetag `index` as picoseconds and channel (0 or 1).
//
// # Safety
// `tags` must be a live handle and the outputs valid.
enum PsStatus ps_timetags_get(const struct PsTimetags *tags,
                              size_t index,
                              uint64_t *time_ps,
                              uint8_t *channel);

// # Safety
// `tags` must be null or a handle not yet freed.
void ps_timetags_free(struct PsTimetags *tags);

// Wraps a count table.
//
// # Safety
// `counts` must hold `len` values and `result` be valid.
enum PsStatus ps_series_from_counts(const uint32_t *counts,
                                    size_t len,
                                    double rep_period,
                                    struct PsSeries **result);

// Bins timetags to pulses using the record's repetition period and pulse
// count. Clicks later than `reject_window_ps` after their pulse are dropped.
//
// # Safety
// `tags` must be a live handle and `result` valid.
enum PsStatus ps_series_from_timetags(const struct PsTimetags *tags,
                                      uint64_t reject_window_ps,
                                      struct PsSeries **result);

// # Safety
// `series` must be null or a live handle.
size_t ps_series_len(const struct PsSeries *series);

// # Safety
// `series` must be null or a handle not yet freed.
void ps_series_free(struct PsSeries *series);

// Photocount distribution. `probabilities` receives P(0..n_probabilities);
// entries past the largest observed count are zero. `q` is NaN when the
// series holds no counts.
//
// # Safety
// `probabilities` must hold `n_probabilities` values; other outputs valid.
enum PsStatus ps_estimate_pn(const struct PsSeries *series,
                             double *probabilities,
                             size_t n_probabilities,
                             double *mean,
                             double *q);

// Q(kτ_rep) for strictly increasing `ks`. No-signal points give NaN.
//
// # Safety
// `ks`, `q` and `stderr` must hold `len` values.
enum PsStatus ps_mandel_q_curve(const struct PsSeries *series,
                                const uint64_t *ks,
                                size_t len,
                                double *q,
                                double *stderr);

// Sliding V_W trace; `v_w` must hold `series_len - window + 1` values.
//
// # Safety
// `v_w` must hold `capacity` values.
enum PsStatus ps_sliding_variance(const struct PsSeries *series,
                                  size_t window,
                                  double *v_w,
                                  size_t capacity);

// Fits a measured Q(T) curve at fixed overall efficiency.
//
// # Safety
// `ks`, `q` and `stderr` must hold `len` values; `result` valid.
enum PsStatus ps_fit_qcurve(const uint64_t *ks,
                            const double *q,
                            const double *stderr,
                            size_t len,
                            double rep_period,
                            double efficiency,
                            struct PsQCurveFit *result);

// Two-step saturation fit. `rejected`, if non-null, receives 1 for each
// point excluded from the final fit and 0 otherwise.
//
// # Safety
// Input arrays and `rejected` (if non-null) must hold `len` values.
enum PsStatus ps_fit_saturation(const double *pulse_energy,
                                const double *rate,
                                const double *integration_time,
                                size_t len,
                                double duration_ratio,
                                struct PsSaturationFit *result,
                                uint8_t *rejected);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHOTOSTAT_H */
