// SPDX-License-Identifier: Apache-2.0

//! C interface to `qubit-ident`.
//!
//! Every fallible function returns a [`QiStatus`]. On failure a description is
//! kept per thread and can be read with [`qi_last_error`]. Objects crossing the
//! boundary are opaque handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qubit_ident::bloch::Parameters;
use qubit_ident::design::{design_times, validate_times, ParameterBox, ProtocolTimes, DIAGNOSTIC_GRID};
use qubit_ident::error::Error;
use qubit_ident::estimator::{bias_box_delta, EstimateReport, REPORT_VERSION};
use qubit_ident::forward::{forward_finite, forward_ideal};
use qubit_ident::measurement::{empirical_frequencies, ShotCounts};

/// Result codes. Values 2, 3 and 5 match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Inversion = 3,
    NoSurvivor = 5,
    Internal = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QiParameters {
    pub gamma1: f64,
    pub kappa: f64,
    pub gamma2: f64,
    pub omega: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QiTimes {
    pub t1: f64,
    pub tau2: f64,
    pub t3: f64,
    pub beta: f64,
    pub k: u32,
}

/// Designed protocol for one parameter box, with its precomputed bias box.
pub struct QiProtocol {
    times: ProtocolTimes,
    bias_delta: [f64; 4],
}

/// Estimate with confidence region.
pub struct QiReport {
    inner: EstimateReport,
}

impl From<QiParameters> for Parameters {
    fn from(p: QiParameters) -> Self {
        Parameters { gamma1: p.gamma1, kappa: p.kappa, gamma2: p.gamma2, omega: p.omega }
    }
}

impl From<Parameters> for QiParameters {
    fn from(p: Parameters) -> Self {
        QiParameters { gamma1: p.gamma1, kappa: p.kappa, gamma2: p.gamma2, omega: p.omega }
    }
}

impl From<QiTimes> for ProtocolTimes {
    fn from(t: QiTimes) -> Self {
        ProtocolTimes { t1: t.t1, tau2: t.tau2, t3: t.t3, beta: t.beta, k: t.k }
    }
}

impl From<ProtocolTimes> for QiTimes {
    fn from(t: ProtocolTimes) -> Self {
        QiTimes { t1: t.t1, tau2: t.tau2, t3: t.t3, beta: t.beta, k: t.k }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> QiStatus {
    match e.exit_code() {
        2 => QiStatus::InvalidArgument,
        3 => QiStatus::Inversion,
        5 => QiStatus::NoSurvivor,
        _ => QiStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), QiStatus>) -> QiStatus {
    set_error(String::new());
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QiStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside qubit-ident".into());
            QiStatus::Panic
        }
    }
}

fn fail(e: Error) -> QiStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> QiStatus {
    set_error(format!("{what} is null"));
    QiStatus::NullPointer
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, QiStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message for the most recent failure on this thread; empty after success.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn qi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static, NUL-terminated version string.
#[no_mangle]
pub extern "C" fn qi_version() -> *const c_char {
    static VERSION: &str = concat!("qubit-ident/", env!("CARGO_PKG_VERSION"), "\0");
    debug_assert_eq!(&VERSION[..VERSION.len() - 1], REPORT_VERSION);
    VERSION.as_ptr().cast()
}

/// Ideal-pulse observables `(p1, p2, p3, p4)` written to `out[0..4]`.
///
/// # Safety
/// `theta` and `times` must be valid pointers; `out` must hold four doubles.
#[no_mangle]
pub unsafe extern "C" fn qi_forward_ideal(theta: *const QiParameters, times: *const QiTimes, out: *mut f64) -> QiStatus {
    guard(|| {
        let th = Parameters::from(*deref(theta, "theta")?);
        let t = ProtocolTimes::from(*deref(times, "times")?);
        if out.is_null() {
            return Err(null("out"));
        }
        th.validate().map_err(fail)?;
        t.validate().map_err(fail)?;
        ptr::copy_nonoverlapping(forward_ideal(&th, &t).0.as_ptr(), out, 4);
        Ok(())
    })
}

/// Observables under pulses of amplitude `u_max`, written to `out[0..4]`.
///
/// # Safety
/// As for [`qi_forward_ideal`].
#[no_mangle]
pub unsafe extern "C" fn qi_forward_finite(
    theta: *const QiParameters,
    times: *const QiTimes,
    u_max: f64,
    out: *mut f64,
) -> QiStatus {
    guard(|| {
        let th = Parameters::from(*deref(theta, "theta")?);
        let t = ProtocolTimes::from(*deref(times, "times")?);
        if out.is_null() {
            return Err(null("out"));
        }
        th.validate().map_err(fail)?;
        let p = forward_finite(&th, &t, u_max).map_err(fail)?;
        ptr::copy_nonoverlapping(p.0.as_ptr(), out, 4);
        Ok(())
    })
}

/// Designs protocol times for the box `[lower, upper]` and precomputes its bias box.
/// Fails with `INVALID_ARGUMENT` if the designed times do not pass their checks.
///
/// # Safety
/// `lower`, `upper` and `out` must be valid pointers. On success `*out` owns a
/// handle to be released with [`qi_protocol_free`].
#[no_mangle]
pub unsafe extern "C" fn qi_protocol_new(
    lower: *const QiParameters,
    upper: *const QiParameters,
    beta: f64,
    k: u32,
    out: *mut *mut QiProtocol,
) -> QiStatus {
    guard(|| {
        let bx = ParameterBox::new((*deref(lower, "lower")?).into(), (*deref(upper, "upper")?).into()).map_err(fail)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let times = design_times(&bx, beta, k).map_err(fail)?;
        let diag = validate_times(&bx, &times);
        if !diag.all_pass() {
            return Err(fail(Error::InvalidArgument(format!("design checks failed: {}", diag.failures().join("; ")))));
        }
        let bias_delta = bias_box_delta(&bx, &times, DIAGNOSTIC_GRID).map_err(fail)?;
        *out = Box::into_raw(Box::new(QiProtocol { times, bias_delta }));
        Ok(())
    })
}

/// # Safety
/// `protocol` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qi_protocol_times(protocol: *const QiProtocol, out: *mut QiTimes) -> QiStatus {
    guard(|| {
        let p = deref(protocol, "protocol")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = p.times.into();
        Ok(())
    })
}

/// Bias-box half-widths per unit `1 / u_max`, written to `out[0..4]`.
///
/// # Safety
/// `protocol` must be valid; `out` must hold four doubles.
#[no_mangle]
pub unsafe extern "C" fn qi_protocol_bias_delta(protocol: *const QiProtocol, out: *mut f64) -> QiStatus {
    guard(|| {
        let p = deref(protocol, "protocol")?;
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(p.bias_delta.as_ptr(), out, 4);
        Ok(())
    })
}

/// # Safety
/// `protocol` must come from [`qi_protocol_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qi_protocol_free(protocol: *mut QiProtocol) {
    if !protocol.is_null() {
        drop(Box::from_raw(protocol));
    }
}

/// Estimates parameters from excited-outcome counts `counts[0..4]` out of `n`
/// shots each. `u_max <= 0` means ideal pulses (no bias box).
///
/// # Safety
/// `protocol` and `out` must be valid; `counts` must hold four values. On
/// success `*out` owns a handle to be released with [`qi_report_free`].
#[no_mangle]
pub unsafe extern "C" fn qi_estimate(
    protocol: *const QiProtocol,
    counts: *const u64,
    n: u64,
    u_max: f64,
    alpha: f64,
    out: *mut *mut QiReport,
) -> QiStatus {
    guard(|| {
        let p = deref(protocol, "protocol")?;
        if counts.is_null() {
            return Err(null("counts"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let mut s = [0u64; 4];
        ptr::copy_nonoverlapping(counts, s.as_mut_ptr(), 4);
        let c = ShotCounts::new(s, n).map_err(fail)?;
        let amplitude = (u_max > 0.0).then_some(u_max);
        let report = EstimateReport::assemble(&empirical_frequencies(&c), &p.times, &p.bias_delta, amplitude, alpha)
            .map_err(fail)?;
        *out = Box::into_raw(Box::new(QiReport { inner: report }));
        Ok(())
    })
}

/// # Safety
/// `report` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qi_report_theta(report: *const QiReport, out: *mut QiParameters) -> QiStatus {
    guard(|| {
        let r = deref(report, "report")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = r.inner.theta_hat.into();
        Ok(())
    })
}

/// Row-major covariance of `sqrt(n) (theta_hat - theta)` written to `out[0..16]`.
///
/// # Safety
/// `report` must be valid; `out` must hold sixteen doubles.
#[no_mangle]
pub unsafe extern "C" fn qi_report_covariance(report: *const QiReport, out: *mut f64) -> QiStatus {
    guard(|| {
        let r = deref(report, "report")?;
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(r.inner.sigma_hat.as_ptr(), out, 16);
        Ok(())
    })
}

/// Bias-box half-widths at the report's amplitude, written to `out[0..4]`.
///
/// # Safety
/// `report` must be valid; `out` must hold four doubles.
#[no_mangle]
pub unsafe extern "C" fn qi_report_bias_box(report: *const QiReport, out: *mut f64) -> QiStatus {
    guard(|| {
        let r = deref(report, "report")?;
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(r.inner.bias_box.as_ptr(), out, 4);
        Ok(())
    })
}

/// Whether `theta` lies in the combined confidence region.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qi_report_contains(
    report: *const QiReport,
    theta: *const QiParameters,
    out: *mut bool,
) -> QiStatus {
    guard(|| {
        let r = deref(report, "report")?;
        let th = Parameters::from(*deref(theta, "theta")?);
        if out.is_null() {
            return Err(null("out"));
        }
        *out = r.inner.contains(&th).map_err(fail)?;
        Ok(())
    })
}

/// Report as a JSON document. `*out` must be released with [`qi_string_free`].
///
/// # Safety
/// `report` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qi_report_to_json(report: *const QiReport, out: *mut *mut c_char) -> QiStatus {
    guard(|| {
        let r = deref(report, "report")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = r.inner.to_json().map_err(fail)?;
        *out = CString::new(text).map_err(|e| fail(Error::InvalidArgument(e.to_string())))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `report` must come from [`qi_estimate`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qi_report_free(report: *mut QiReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qi_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
