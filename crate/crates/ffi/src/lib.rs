//! C ABI over the twinphoton core: model curves and the scalar analysis
//! operations, exposed through opaque handles and status codes so other
//! languages can bind against `libtwinphoton_ffi`.
//!
//! Conventions: every fallible entry point returns a [`TpStatus`]; outputs
//! are written through pointers only on `TP_STATUS_OK`. A textual diagnostic
//! for the most recent failure on the calling thread is available from
//! [`tp_last_error_message`]. Curve handles must be released with
//! [`tp_g2_curve_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use twinphoton::correlator::{alpha_ratio, twin_rate_cw, twin_rate_pulsed};
use twinphoton::hom::{temporal_overlap, visibility};
use twinphoton::model::{
    convolve_irf, g2_closed_paper, g2_composites, g2_numeric, steady_state, G2Curve, G2Kind,
    InstrumentResponse, RateSet,
};
use twinphoton::pnr::{
    reconstruct_from_ratios, thin_binomial, MeasuredRatios, PhotonNumberDist, Plane,
};
use twinphoton::Error;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpStatus {
    Ok = 0,
    InvalidParameter = 1,
    Precondition = 2,
    Resolution = 3,
    ComplexBranch = 4,
    DivideByZero = 5,
    FitFailure = 6,
    InfeasibleData = 7,
    InsufficientData = 8,
    Accuracy = 9,
    Io = 10,
    Format = 11,
    NullPointer = 12,
    Panic = 13,
}

/// Correlation kinds selectable through the ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TpG2Kind {
    /// Biexciton photon starts, exciton photon stops ("XX-X").
    XxThenX = 0,
    /// Exciton starts, biexciton stops ("X-XX").
    XThenXx = 1,
    /// Exciton auto-correlation ("X-X").
    XThenX = 2,
    /// Biexciton auto-correlation ("XX-XX").
    XxThenXx = 3,
}

impl From<TpG2Kind> for G2Kind {
    fn from(kind: TpG2Kind) -> Self {
        match kind {
            TpG2Kind::XxThenX => G2Kind::XxThenX,
            TpG2Kind::XThenXx => G2Kind::XThenXx,
            TpG2Kind::XThenX => G2Kind::XThenX,
            TpG2Kind::XxThenXx => G2Kind::XxThenXx,
        }
    }
}

/// Opaque handle to a correlation curve on a delay grid.
pub struct TpG2Curve {
    inner: G2Curve,
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> TpStatus {
    match err {
        Error::InvalidParameter(_) => TpStatus::InvalidParameter,
        Error::Precondition(_) => TpStatus::Precondition,
        Error::Resolution(_) => TpStatus::Resolution,
        Error::ComplexBranch(_) => TpStatus::ComplexBranch,
        Error::DivideByZero(_) => TpStatus::DivideByZero,
        Error::FitFailure { .. } => TpStatus::FitFailure,
        Error::InfeasibleData(_) => TpStatus::InfeasibleData,
        Error::InsufficientData(_) => TpStatus::InsufficientData,
        Error::Accuracy(_) => TpStatus::Accuracy,
        Error::Io(_) => TpStatus::Io,
        Error::Format(_) => TpStatus::Format,
    }
}

fn guard(body: impl FnOnce() -> TpStatus + std::panic::UnwindSafe) -> TpStatus {
    match catch_unwind(body) {
        Ok(status) => status,
        Err(_) => {
            set_error("panic crossed the FFI boundary");
            TpStatus::Panic
        }
    }
}

fn complete<T>(result: Result<T, Error>, sink: impl FnOnce(T)) -> TpStatus {
    match result {
        Ok(value) => {
            sink(value);
            TpStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

/// Version string of the underlying crate; static storage, do not free.
#[no_mangle]
pub extern "C" fn tp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Diagnostic text for the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn tp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Stationary occupations [G, H, V, B] of the four-level model.
///
/// # Safety
/// `out_occupations` must point to at least 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tp_steady_state(
    gamma_b: f64,
    gamma_x: f64,
    pump_b: f64,
    pump_x: f64,
    out_occupations: *mut f64,
) -> TpStatus {
    if out_occupations.is_null() {
        return TpStatus::NullPointer;
    }
    guard(AssertUnwindSafe(|| {
        complete(
            RateSet::new(gamma_b, gamma_x, pump_b, pump_x).and_then(|r| steady_state(&r)),
            |ss| {
                let out = std::slice::from_raw_parts_mut(out_occupations, 4);
                out.copy_from_slice(&[ss.ground, ss.exciton_h, ss.exciton_v, ss.biexciton]);
            },
        )
    }))
}

unsafe fn curve_request(
    tau_ps: *const f64,
    len: usize,
    out: *mut *mut TpG2Curve,
) -> Result<Vec<f64>, TpStatus> {
    if tau_ps.is_null() || out.is_null() || len == 0 {
        return Err(TpStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts(tau_ps, len).to_vec())
}

/// Second-order correlation from the regression construction (the normative
/// model curve), on a delay grid in ps.
///
/// # Safety
/// `tau_ps` must point to `len` doubles; `out` receives an owned handle.
#[no_mangle]
pub unsafe extern "C" fn tp_g2_numeric(
    kind: TpG2Kind,
    gamma_b: f64,
    gamma_x: f64,
    pump_b: f64,
    pump_x: f64,
    tau_ps: *const f64,
    len: usize,
    out: *mut *mut TpG2Curve,
) -> TpStatus {
    let grid = match curve_request(tau_ps, len, out) {
        Ok(g) => g,
        Err(s) => return s,
    };
    guard(AssertUnwindSafe(|| {
        complete(
            RateSet::new(gamma_b, gamma_x, pump_b, pump_x)
                .and_then(|r| g2_numeric(kind.into(), &r, &grid)),
            |curve| {
                *out = Box::into_raw(Box::new(TpG2Curve { inner: curve }));
            },
        )
    }))
}

/// Literal transcription of the published closed-form expressions (equal
/// pumps; kept for cross-checks, see crate docs for the known discrepancies).
///
/// # Safety
/// As for [`tp_g2_numeric`].
#[no_mangle]
pub unsafe extern "C" fn tp_g2_closed_paper(
    kind: TpG2Kind,
    gamma_b: f64,
    gamma_x: f64,
    pump: f64,
    tau_ps: *const f64,
    len: usize,
    out: *mut *mut TpG2Curve,
) -> TpStatus {
    let grid = match curve_request(tau_ps, len, out) {
        Ok(g) => g,
        Err(s) => return s,
    };
    guard(AssertUnwindSafe(|| {
        complete(
            RateSet::with_equal_pump(gamma_b, gamma_x, pump)
                .and_then(|r| g2_closed_paper(kind.into(), &r, &grid)),
            |curve| {
                *out = Box::into_raw(Box::new(TpG2Curve { inner: curve }));
            },
        )
    }))
}

/// Cross and equal-weight auto composites on a signed delay grid.
///
/// # Safety
/// As for [`tp_g2_numeric`]; both handles are owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn tp_g2_composites(
    gamma_b: f64,
    gamma_x: f64,
    pump_b: f64,
    pump_x: f64,
    tau_ps: *const f64,
    len: usize,
    out_cross: *mut *mut TpG2Curve,
    out_auto: *mut *mut TpG2Curve,
) -> TpStatus {
    if out_auto.is_null() {
        return TpStatus::NullPointer;
    }
    let grid = match curve_request(tau_ps, len, out_cross) {
        Ok(g) => g,
        Err(s) => return s,
    };
    guard(AssertUnwindSafe(|| {
        complete(
            RateSet::new(gamma_b, gamma_x, pump_b, pump_x).and_then(|r| g2_composites(&r, &grid)),
            |(cross, auto)| {
                *out_cross = Box::into_raw(Box::new(TpG2Curve { inner: cross }));
                *out_auto = Box::into_raw(Box::new(TpG2Curve { inner: auto }));
            },
        )
    }))
}

/// Convolve a curve with a Gaussian instrument response of the given FWHM,
/// producing a new handle.
///
/// # Safety
/// `curve` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn tp_g2_curve_convolve_irf(
    curve: *const TpG2Curve,
    fwhm_ps: f64,
    out: *mut *mut TpG2Curve,
) -> TpStatus {
    if curve.is_null() || out.is_null() {
        return TpStatus::NullPointer;
    }
    guard(AssertUnwindSafe(|| {
        complete(
            InstrumentResponse::new(fwhm_ps).and_then(|irf| convolve_irf(&(*curve).inner, &irf)),
            |smeared| {
                *out = Box::into_raw(Box::new(TpG2Curve { inner: smeared }));
            },
        )
    }))
}

/// Number of grid points in a curve.
///
/// # Safety
/// `curve` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn tp_g2_curve_len(curve: *const TpG2Curve) -> usize {
    if curve.is_null() {
        return 0;
    }
    (*curve).inner.len()
}

/// Copy a curve's grid and values into caller-owned arrays (each of length
/// [`tp_g2_curve_len`]); either destination may be null to skip it.
///
/// # Safety
/// Non-null destinations must hold at least `tp_g2_curve_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tp_g2_curve_read(
    curve: *const TpG2Curve,
    out_tau_ps: *mut f64,
    out_values: *mut f64,
) -> TpStatus {
    if curve.is_null() {
        return TpStatus::NullPointer;
    }
    let inner = &(*curve).inner;
    if !out_tau_ps.is_null() {
        std::slice::from_raw_parts_mut(out_tau_ps, inner.len()).copy_from_slice(&inner.tau_ps);
    }
    if !out_values.is_null() {
        std::slice::from_raw_parts_mut(out_values, inner.len()).copy_from_slice(&inner.values);
    }
    TpStatus::Ok
}

/// Release a curve handle. Null is a no-op.
///
/// # Safety
/// `curve` must be a handle from this library, released at most once.
#[no_mangle]
pub unsafe extern "C" fn tp_g2_curve_free(curve: *mut TpG2Curve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Twin fraction alpha = g2_auto(0) / g2_cross(0).
///
/// # Safety
/// `out_alpha` must be a writable double.
#[no_mangle]
pub unsafe extern "C" fn tp_alpha_ratio(
    g_auto_0: f64,
    g_cross_0: f64,
    out_alpha: *mut f64,
) -> TpStatus {
    if out_alpha.is_null() {
        return TpStatus::NullPointer;
    }
    guard(AssertUnwindSafe(|| {
        complete(alpha_ratio(g_auto_0, g_cross_0), |a| *out_alpha = a)
    }))
}

/// CW twin-photon rate: n_spcm/(eps eta) * alpha/(2-alpha) * eta².
/// `out_twin_detect_fraction` may be null.
///
/// # Safety
/// `out_tpr_hz` must be a writable double.
#[no_mangle]
pub unsafe extern "C" fn tp_twin_rate_cw(
    n_spcm_hz: f64,
    eps_setup: f64,
    eta_lens: f64,
    alpha: f64,
    out_tpr_hz: *mut f64,
    out_twin_detect_fraction: *mut f64,
) -> TpStatus {
    if out_tpr_hz.is_null() {
        return TpStatus::NullPointer;
    }
    guard(AssertUnwindSafe(|| {
        complete(twin_rate_cw(n_spcm_hz, eps_setup, eta_lens, alpha), |b| {
            *out_tpr_hz = b.tpr_hz;
            if !out_twin_detect_fraction.is_null() {
                *out_twin_detect_fraction = b.twin_detect_fraction;
            }
        })
    }))
}

/// Pulsed twin-photon rate f * p_twin * eta².
///
/// # Safety
/// `out_tpr_hz` must be a writable double.
#[no_mangle]
pub unsafe extern "C" fn tp_twin_rate_pulsed(
    rep_rate_hz: f64,
    p_twin: f64,
    eta_lens: f64,
    out_tpr_hz: *mut f64,
) -> TpStatus {
    if out_tpr_hz.is_null() {
        return TpStatus::NullPointer;
    }
    guard(AssertUnwindSafe(|| {
        complete(twin_rate_pulsed(rep_rate_hz, p_twin, eta_lens), |t| {
            *out_tpr_hz = t
        })
    }))
}

/// Two-photon interference visibility V = 2 (1 - g_par/g_perp).
///
/// # Safety
/// `out_visibility` must be a writable double.
#[no_mangle]
pub unsafe extern "C" fn tp_visibility(
    g_par_0: f64,
    g_perp_0: f64,
    out_visibility: *mut f64,
) -> TpStatus {
    if out_visibility.is_null() {
        return TpStatus::NullPointer;
    }
    guard(AssertUnwindSafe(|| {
        complete(visibility(g_par_0, g_perp_0), |r| {
            *out_visibility = r.visibility
        })
    }))
}

/// Squared temporal overlap of the exciton/biexciton envelopes, optionally
/// averaged over the cascade emission-time jitter.
///
/// # Safety
/// `out_overlap` must be a writable double.
#[no_mangle]
pub unsafe extern "C" fn tp_temporal_overlap(
    tau_x_ns: f64,
    tau_xx_ns: f64,
    include_jitter: bool,
    out_overlap: *mut f64,
) -> TpStatus {
    if out_overlap.is_null() {
        return TpStatus::NullPointer;
    }
    guard(AssertUnwindSafe(|| {
        complete(temporal_overlap(tau_x_ns, tau_xx_ns, include_jitter), |m| {
            *out_overlap = m
        })
    }))
}

/// Binomial loss q_k = sum_n p_n C(n,k) s^k (1-s)^(n-k) over photon numbers
/// 0..3.
///
/// # Safety
/// `source_probs` and `out_detector_probs` must each hold 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn tp_pnr_thin_binomial(
    source_probs: *const f64,
    s: f64,
    out_detector_probs: *mut f64,
) -> TpStatus {
    if source_probs.is_null() || out_detector_probs.is_null() {
        return TpStatus::NullPointer;
    }
    let mut probs = [0.0; 4];
    probs.copy_from_slice(std::slice::from_raw_parts(source_probs, 4));
    guard(AssertUnwindSafe(|| {
        complete(
            PhotonNumberDist::new(Plane::Source, probs).and_then(|p| thin_binomial(&p, s)),
            |q| {
                std::slice::from_raw_parts_mut(out_detector_probs, 4)
                    .copy_from_slice(&q.probabilities);
            },
        )
    }))
}

/// Invert the binomial loss model on support {0, 1, 2} from the measured
/// ratios "2/1" and "1/0"; writes p0, p1, p2.
///
/// # Safety
/// `out_probs` must hold 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tp_pnr_reconstruct(
    twin_to_single: f64,
    single_to_vacuum: f64,
    s: f64,
    out_probs: *mut f64,
) -> TpStatus {
    if out_probs.is_null() {
        return TpStatus::NullPointer;
    }
    guard(AssertUnwindSafe(|| {
        complete(
            reconstruct_from_ratios(
                &MeasuredRatios {
                    twin_to_single,
                    single_to_vacuum,
                },
                s,
                2,
            ),
            |d| {
                std::slice::from_raw_parts_mut(out_probs, 3).copy_from_slice(&d.probabilities[..3]);
            },
        )
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steady_state_through_abi() {
        let mut out = [0.0; 4];
        let status = unsafe { tp_steady_state(1.0, 1.0, 1.0, 1.0, out.as_mut_ptr()) };
        assert_eq!(status, TpStatus::Ok);
        for p in out {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_rates_set_error_message() {
        let mut out = [0.0; 4];
        let status = unsafe { tp_steady_state(-1.0, 1.0, 1.0, 1.0, out.as_mut_ptr()) };
        assert_eq!(status, TpStatus::InvalidParameter);
        let msg = unsafe { std::ffi::CStr::from_ptr(tp_last_error_message()) };
        assert!(!msg.to_bytes().is_empty());
    }

    #[test]
    fn curve_lifecycle() {
        let tau: Vec<f64> = (0..=1000).map(|k| k as f64 * 10.0).collect();
        let mut handle: *mut TpG2Curve = std::ptr::null_mut();
        let status = unsafe {
            tp_g2_numeric(
                TpG2Kind::XxThenX,
                1.0,
                1.0,
                1.0,
                1.0,
                tau.as_ptr(),
                tau.len(),
                &mut handle,
            )
        };
        assert_eq!(status, TpStatus::Ok);
        assert_eq!(unsafe { tp_g2_curve_len(handle) }, tau.len());
        let mut values = vec![0.0; tau.len()];
        let status = unsafe { tp_g2_curve_read(handle, std::ptr::null_mut(), values.as_mut_ptr()) };
        assert_eq!(status, TpStatus::Ok);
        assert!((values[0] - 4.0).abs() < 1e-9);
        // convolve and check the handle chain
        let mut smeared: *mut TpG2Curve = std::ptr::null_mut();
        let status = unsafe { tp_g2_curve_convolve_irf(handle, 350.0, &mut smeared) };
        assert_eq!(status, TpStatus::Ok);
        unsafe {
            tp_g2_curve_free(handle);
            tp_g2_curve_free(smeared);
            tp_g2_curve_free(std::ptr::null_mut());
        }
    }

    #[test]
    fn composites_and_alpha() {
        let tau = [0.0f64];
        let mut cross: *mut TpG2Curve = std::ptr::null_mut();
        let mut auto: *mut TpG2Curve = std::ptr::null_mut();
        let status =
            unsafe { tp_g2_composites(1.0, 1.0, 0.1, 0.1, tau.as_ptr(), 1, &mut cross, &mut auto) };
        assert_eq!(status, TpStatus::Ok);
        let (mut c0, mut a0) = (0.0, 0.0);
        unsafe {
            tp_g2_curve_read(cross, std::ptr::null_mut(), &mut c0);
            tp_g2_curve_read(auto, std::ptr::null_mut(), &mut a0);
            tp_g2_curve_free(cross);
            tp_g2_curve_free(auto);
        }
        assert!((c0 - 12.1).abs() < 1e-9);
        assert!((a0 - 3.025).abs() < 1e-9);
        let mut alpha = 0.0;
        assert_eq!(unsafe { tp_alpha_ratio(a0, c0, &mut alpha) }, TpStatus::Ok);
        assert!((alpha - 0.25).abs() < 1e-12);
    }

    #[test]
    fn scalar_analysis_functions() {
        let mut tpr = 0.0;
        let mut frac = 0.0;
        let status = unsafe { tp_twin_rate_cw(103e3, 0.0095, 0.09, 0.39, &mut tpr, &mut frac) };
        assert_eq!(status, TpStatus::Ok);
        assert!(tpr > 230e3 && tpr < 238e3);

        let mut pulsed = 0.0;
        assert_eq!(
            unsafe { tp_twin_rate_pulsed(80e6, 0.080, 0.09, &mut pulsed) },
            TpStatus::Ok
        );
        assert!((pulsed - 51_840.0).abs() < 1e-6);

        let mut v = 0.0;
        assert_eq!(unsafe { tp_visibility(0.72, 1.0, &mut v) }, TpStatus::Ok);
        assert!((v - 0.56).abs() < 1e-12);

        let mut m = 0.0;
        assert_eq!(
            unsafe { tp_temporal_overlap(1.77, 0.95, false, &mut m) },
            TpStatus::Ok
        );
        assert!((m - 0.909).abs() < 1e-3);
    }

    #[test]
    fn pnr_round_trip_through_abi() {
        let source = [0.858, 0.062, 0.080, 0.0];
        let mut detector = [0.0; 4];
        let s = 5.04e-4;
        assert_eq!(
            unsafe { tp_pnr_thin_binomial(source.as_ptr(), s, detector.as_mut_ptr()) },
            TpStatus::Ok
        );
        let mut back = [0.0; 3];
        assert_eq!(
            unsafe {
                tp_pnr_reconstruct(
                    detector[2] / detector[1],
                    detector[1] / detector[0],
                    s,
                    back.as_mut_ptr(),
                )
            },
            TpStatus::Ok
        );
        for n in 0..3 {
            assert!((back[n] - source[n]).abs() < 1e-9);
        }
    }

    #[test]
    fn null_pointers_are_rejected() {
        assert_eq!(
            unsafe { tp_steady_state(1.0, 1.0, 1.0, 1.0, std::ptr::null_mut()) },
            TpStatus::NullPointer
        );
        let mut out = 0.0;
        assert_eq!(
            unsafe { tp_alpha_ratio(-1.0, 1.0, &mut out) },
            TpStatus::InvalidParameter
        );
    }

    #[test]
    fn version_is_a_c_string() {
        let v = unsafe { std::ffi::CStr::from_ptr(tp_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
