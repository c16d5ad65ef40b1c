#ifndef TWINPHOTON_H
#define TWINPHOTON_H

/* Generated by cbindgen from twinphoton-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum {
  TP_STATUS_OK = 0,
  TP_STATUS_INVALID_PARAMETER = 1,
  TP_STATUS_PRECONDITION = 2,
  TP_STATUS_RESOLUTION = 3,
  TP_STATUS_COMPLEX_BRANCH = 4,
  TP_STATUS_DIVIDE_BY_ZERO = 5,
  TP_STATUS_FIT_FAILURE = 6,
  TP_STATUS_INFEASIBLE_DATA = 7,
  TP_STATUS_INSUFFICIENT_DATA = 8,
  TP_STATUS_ACCURACY = 9,
  TP_STATUS_IO = 10,
  TP_STATUS_FORMAT = 11,
  TP_STATUS_NULL_POINTER = 12,
  TP_STATUS_PANIC = 13,
} TpStatus;

/**
 * Correlation kinds selectable through the ABI.
 */
typedef enum {
  /**
   * Biexciton photon starts, exciton photon stops ("XX-X").
   */
  TP_G2_KIND_XX_THEN_X = 0,
  /**
   * Exciton starts, biexciton stops ("X-XX").
   */
  TP_G2_KIND_X_THEN_XX = 1,
  /**
   * Exciton auto-correlation ("X-X").
   */
  TP_G2_KIND_X_THEN_X = 2,
  /**
   * Biexciton auto-correlation ("XX-XX").
   */
  TP_G2_KIND_XX_THEN_XX = 3,
} TpG2Kind;

/**
 * Opaque handle to a correlation curve on a delay grid.
 */
typedef struct TpG2Curve TpG2Curve;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string of the underlying crate; static storage, do not free.
 */
const char *tp_version(void);

/**
 * Diagnostic text for the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread; do not free.
 */
const char *tp_last_error_message(void);

/**
 * Stationary occupations [G, H, V, B] of the four-level model.
 *
 * # Safety
 * `out_occupations` must point to at least 4 writable doubles.
 */
TpStatus tp_steady_state(double gamma_b,
                         double gamma_x,
                         double pump_b,
                         double pump_x,
                         double *out_occupations);

/**
 * Second-order correlation from the regression construction (the normative
 * model curve), on a delay grid in ps.
 *
 * # Safety
 * `tau_ps` must point to `len` doubles; `out` receives an owned handle.
 */
TpStatus tp_g2_numeric(TpG2Kind kind,
                       double gamma_b,
                       double gamma_x,
                       double pump_b,
                       double pump_x,
                       const double *tau_ps,
                       size_t len,
                       TpG2Curve **out);

/**
 * Literal transcription of the published closed-form expressions (equal
 * pumps; kept for cross-checks, see crate docs for the known discrepancies).
 *
 * # Safety
 * As for [`tp_g2_numeric`].
 */
TpStatus tp_g2_closed_paper(TpG2Kind kind,
                            double gamma_b,
                            double gamma_x,
                            double pump,
                            const double *tau_ps,
                            size_t len,
                            TpG2Curve **out);

/**
 * Cross and equal-weight auto composites on a signed delay grid.
 *
 * # Safety
 * As for [`tp_g2_numeric`]; both handles are owned by the caller.
 */
TpStatus tp_g2_composites(double gamma_b,
                          double gamma_x,
                          double pump_b,
                          double pump_x,
                          const double *tau_ps,
                          size_t len,
                          TpG2Curve **out_cross,
                          TpG2Curve **out_auto);

/**
 * Convolve a curve with a Gaussian instrument response of the given FWHM,
 * producing a new handle.
 *
 * # Safety
 * `curve` must be a live handle from this library.
 */
TpStatus tp_g2_curve_convolve_irf(const TpG2Curve *curve, double fwhm_ps, TpG2Curve **out);

/**
 * Number of grid points in a curve.
 *
 * # Safety
 * `curve` must be a live handle from this library.
 */
size_t tp_g2_curve_len(const TpG2Curve *curve);

/**
 * Copy a curve's grid and values into caller-owned arrays (each of length
 * [`tp_g2_curve_len`]); either destination may be null to skip it.
 *
 * # Safety
 * Non-null destinations must hold at least `tp_g2_curve_len` doubles.
 */
TpStatus tp_g2_curve_read(const TpG2Curve *curve, double *out_tau_ps, double *out_values);

/**
 * Release a curve handle. Null is a no-op.
 *
 * # Safety
 * `curve` must be a handle from this library, released at most once.
 */
void tp_g2_curve_free(TpG2Curve *curve);

/**
 * Twin fraction alpha = g2_auto(0) / g2_cross(0).
 *
 * # Safety
 * `out_alpha` must be a writable double.
 */
TpStatus tp_alpha_ratio(double g_auto_0, double g_cross_0, double *out_alpha);

/**
 * CW twin-photon rate: n_spcm/(eps eta) * alpha/(2-alpha) * eta².
 * `out_twin_detect_fraction` may be null.
 *
 * # Safety
 * `out_tpr_hz` must be a writable double.
 */
TpStatus tp_twin_rate_cw(double n_spcm_hz,
                         double eps_setup,
                         double eta_lens,
                         double alpha,
                         double *out_tpr_hz,
                         double *out_twin_detect_fraction);

/**
 * Pulsed twin-photon rate f * p_twin * eta².
 *
 * # Safety
 * `out_tpr_hz` must be a writable double.
 */
TpStatus tp_twin_rate_pulsed(double rep_rate_hz,
                             double p_twin,
                             double eta_lens,
                             double *out_tpr_hz);

/**
 * Two-photon interference visibility V = 2 (1 - g_par/g_perp).
 *
 * # Safety
 * `out_visibility` must be a writable double.
 */
TpStatus tp_visibility(double g_par_0, double g_perp_0, double *out_visibility);

/**
 * Squared temporal overlap of the exciton/biexciton envelopes, optionally
 * averaged over the cascade emission-time jitter.
 *
 * # Safety
 * `out_overlap` must be a writable double.
 */
TpStatus tp_temporal_overlap(double tau_x_ns,
                             double tau_xx_ns,
                             bool include_jitter,
                             double *out_overlap);

/**
 * Binomial loss q_k = sum_n p_n C(n,k) s^k (1-s)^(n-k) over photon numbers
 * 0..3.
 *
 * # Safety
 * `source_probs` and `out_detector_probs` must each hold 4 doubles.
 */
TpStatus tp_pnr_thin_binomial(const double *source_probs, double s, double *out_detector_probs);

/**
 * Invert the binomial loss model on support {0, 1, 2} from the measured
 * ratios "2/1" and "1/0"; writes p0, p1, p2.
 *
 * # Safety
 * `out_probs` must hold 3 writable doubles.
 */
TpStatus tp_pnr_reconstruct(double twin_to_single,
                            double single_to_vacuum,
                            double s,
                            double *out_probs);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TWINPHOTON_H */
