#ifndef RINGFORGE_H
#define RINGFORGE_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RfStatus {
  RF_STATUS_OK = 0,
  RF_STATUS_NULL_POINTER = 1,
  RF_STATUS_INVALID_INPUT = 2,
  RF_STATUS_PARSE = 3,
  RF_STATUS_INSUFFICIENT_DATA = 4,
  RF_STATUS_NO_RESONANCE = 5,
  RF_STATUS_NON_CONVERGENCE = 6,
  RF_STATUS_IO = 7,
  RF_STATUS_OTHER = 8,
  RF_STATUS_PANIC = 9,
} RfStatus;

typedef enum RfNoiseModel {
  RF_NOISE_MODEL_WHITE = 0,
  RF_NOISE_MODEL_POWER_LAW = 1,
  RF_NOISE_MODEL_LORENTZIAN = 2,
} RfNoiseModel;

/**
 * Opaque optimizer result.
 */
typedef struct RfOptimization RfOptimization;

/**
 * Opaque reflection trace.
 */
typedef struct RfTrace RfTrace;

typedef struct RfCircuit {
  /**
   * µm
   */
  double trace_length;
  double squares;
  /**
   * µH
   */
  double inductance;
  /**
   * fF
   */
  double capacitance;
  /**
   * GHz
   */
  double f0;
  /**
   * kΩ
   */
  double impedance;
} RfCircuit;

typedef struct RfResonanceFit {
  /**
   * Hz
   */
  double f0;
  double q_l;
  double q_c;
  double q_i;
  /**
   * Q_i band; the upper edge is infinite for a band admitting Q_i → ∞.
   */
  double q_i_lo;
  double q_i_hi;
  /**
   * rad
   */
  double phi;
  double amplitude;
  /**
   * rad
   */
  double phase;
  /**
   * s
   */
  double delay;
  double f0_err;
  double q_l_err;
  double q_c_err;
  double q_i_err;
  double residual_rms;
} RfResonanceFit;

typedef struct RfConstraints {
  /**
   * GHz
   */
  double f_min;
  double f_max;
  /**
   * nm
   */
  double w_min;
  double p_min;
  double t_min;
  /**
   * µΩ·cm
   */
  double resistivity_max;
  /**
   * pH/sq; NaN for no cap.
   */
  double sheet_inductance_max;
  /**
   * µm
   */
  double r_in_min;
  double r_in_max;
  bool suspended;
} RfConstraints;

typedef struct RfDesign {
  /**
   * µm
   */
  double r_in;
  /**
   * nm
   */
  double w;
  double p;
  double t;
  /**
   * µm
   */
  double trace_length;
  /**
   * pH/sq
   */
  double sheet_inductance;
  /**
   * µΩ·cm
   */
  double resistivity;
  struct RfCircuit circuit;
  /**
   * kΩ; NaN unless suspended.
   */
  double suspended_impedance;
} RfDesign;

typedef struct RfNoiseFit {
  enum RfNoiseModel model;
  /**
   * Hz²/Hz
   */
  double s0;
  double s1;
  double alpha;
  /**
   * NaN unless the Lorentzian model was selected.
   */
  double lorentz_a;
  /**
   * Hz
   */
  double f_c;
  double alpha_err;
  /**
   * Model ASD at `asd_freq`, Hz/√Hz.
   */
  double asd;
  /**
   * ∫ PSD df, Hz².
   */
  double integrated_power;
} RfNoiseFit;

typedef struct RfKerrFit {
  /**
   * Hz/photon
   */
  double k11;
  double k11_err;
  /**
   * Hz
   */
  double intercept;
  double window_lo;
  double window_hi;
  /**
   * 1 detected, 0 absent, -1 undecided.
   */
  int32_t anomalous;
  /**
   * Hz; NaN when no saturating fit was made.
   */
  double anomalous_amplitude;
  /**
   * photons
   */
  double anomalous_n_c;
} RfKerrFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *rf_last_error_message(void);

const char *rf_version(void);

/**
 * Sheet inductance (pH/sq) of a film with resistivity `rho` (µΩ·cm),
 * thickness `t` (nm) and critical temperature `tc` (K).
 *
 * # Safety
 * `out_lsq` must be null or valid for writes.
 */
enum RfStatus rf_sheet_inductance(double rho, double t, double tc, double *out_lsq);

/**
 * Resistivity (µΩ·cm) giving sheet inductance `lsq` (pH/sq).
 *
 * # Safety
 * `out_rho` must be null or valid for writes.
 */
enum RfStatus rf_resistivity_from_sheet_inductance(double lsq,
                                                   double t,
                                                   double tc,
                                                   double *out_rho);

/**
 * Forward model of one ring. `length` (µm) is estimated from `r_in` and
 * `p` when NaN; `k_c` (fF/µm) falls back to the default when NaN.
 *
 * # Safety
 * `out_circuit` must be null or valid for writes.
 */
enum RfStatus rf_ring_predict(double r_in,
                              double w,
                              double p,
                              double t,
                              double length,
                              double lsq,
                              double k_c,
                              struct RfCircuit *out_circuit);

/**
 * Builds a trace from `n` frequencies (Hz) and S11 real/imaginary parts.
 *
 * # Safety
 * The arrays must hold `n` values; `out_trace` must be valid for writes.
 */
enum RfStatus rf_trace_new(const double *freq_hz,
                           const double *re,
                           const double *im,
                           size_t n,
                           struct RfTrace **out_trace);

/**
 * Reads a `freq_hz,re,im` CSV or `.s1p` file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out_trace` valid for writes.
 */
enum RfStatus rf_trace_read(const char *path, struct RfTrace **out_trace);

/**
 * # Safety
 * `trace` must be null or a handle from `rf_trace_new`/`rf_trace_read`
 * that has not been freed.
 */
void rf_trace_free(struct RfTrace *trace);

/**
 * # Safety
 * `trace` must be a live handle or null.
 */
size_t rf_trace_len(const struct RfTrace *trace);

/**
 * # Safety
 * `trace` must be a live handle; `out_fit` valid for writes.
 */
enum RfStatus rf_fit_reflection(const struct RfTrace *trace, struct RfResonanceFit *out_fit);

/**
 * Average intracavity photon number at drive power `p_dbm`.
 *
 * # Safety
 * `out_n` must be null or valid for writes.
 */
enum RfStatus rf_photon_number(double q_c, double f0_hz, double p_dbm, double *out_n);

/**
 * Fills `out_constraints` with the default profile, or the relaxed one
 * when `relaxed` is set.
 *
 * # Safety
 * `out_constraints` must be null or valid for writes.
 */
enum RfStatus rf_constraints_default(bool relaxed, struct RfConstraints *out_constraints);

/**
 * Optimizes one design per film of sheet inductance `lsq[i]` (pH/sq) at
 * thickness `t` (nm). `k_c` falls back to the default when NaN.
 *
 * # Safety
 * `lsq` must hold `n` values; `out_result` must be valid for writes.
 */
enum RfStatus rf_optimize(const struct RfConstraints *constraints,
                          double k_c,
                          const double *lsq,
                          size_t n,
                          double t,
                          double tc,
                          struct RfOptimization **out_result);

/**
 * Number of feasible designs, best first.
 *
 * # Safety
 * `result` must be a live handle or null.
 */
size_t rf_optimization_len(const struct RfOptimization *result);

/**
 * Number of films for which no design satisfied the constraints.
 *
 * # Safety
 * `result` must be a live handle or null.
 */
size_t rf_optimization_infeasible(const struct RfOptimization *result);

/**
 * # Safety
 * `result` must be a live handle; `out_design` valid for writes.
 */
enum RfStatus rf_optimization_get(const struct RfOptimization *result,
                                  size_t index,
                                  struct RfDesign *out_design);

/**
 * # Safety
 * `result` must be null or a handle from `rf_optimize` not yet freed.
 */
void rf_optimization_free(struct RfOptimization *result);

/**
 * Bartlett PSD of `n` samples spaced `dt` seconds, followed by model
 * selection; the model ASD is reported at `asd_freq` Hz.
 *
 * # Safety
 * `values` must hold `n` samples; `out_fit` must be valid for writes.
 */
enum RfStatus rf_fit_noise(const double *values,
                           size_t n,
                           double dt,
                           size_t segments,
                           bool include_lorentzian,
                           double asd_freq,
                           struct RfNoiseFit *out_fit);

/**
 * Self-Kerr fit of a shift curve; `threshold` bounds the linear window
 * and is chosen automatically when NaN.
 *
 * # Safety
 * `n_bar` and `df_hz` must hold `n` values; `out_fit` valid for writes.
 */
enum RfStatus rf_fit_kerr(const double *n_bar,
                          const double *df_hz,
                          size_t n,
                          double threshold,
                          struct RfKerrFit *out_fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RINGFORGE_H */
