//! C ABI over `socest`.
//!
//! Handles are opaque heap objects created by `*_new` and released by the
//! matching `*_free`. Every fallible call returns a [`SocestStatus`]; on
//! failure [`socest_last_error_message`] describes the problem. Results are
//! written through out-pointers only on success.
//!
//! Handles are not synchronized: use one handle from one thread at a time.
//! Distinct handles may be used concurrently.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use socest::cli::config::Config;
use socest::pipeline::{mae_pct, rmse_pct, JointEstimator};
use socest::FilterKind;

/// Opaque configuration handle.
pub struct SocestConfig {
    inner: Config,
}

/// Opaque joint estimator handle: one filter plus its parameter identifier.
pub struct SocestEstimator {
    inner: JointEstimator,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SocestStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Unknown key, bad value or unreadable config file.
    Config = 3,
    InvalidArgument = 4,
    /// The estimator could not be built from the configuration.
    Estimator = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SocestFilterKind {
    Ekf = 0,
    Hiekf = 1,
    Ahiekf = 2,
    Iahiekf = 3,
}

impl From<SocestFilterKind> for FilterKind {
    fn from(k: SocestFilterKind) -> Self {
        match k {
            SocestFilterKind::Ekf => FilterKind::Ekf,
            SocestFilterKind::Hiekf => FilterKind::Hiekf,
            SocestFilterKind::Ahiekf => FilterKind::Ahiekf,
            SocestFilterKind::Iahiekf => FilterKind::Iahiekf,
        }
    }
}

/// Output of one estimator step.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SocestStepResult {
    pub soc: f64,
    pub up_v: f64,
    /// Measured minus predicted terminal voltage; NaN when the measurement
    /// update failed and the filter only propagated.
    pub residual_v: f64,
    /// Parameters used at this step.
    pub r0_ohm: f64,
    pub rp_ohm: f64,
    pub cp_f: f64,
    pub rx: f64,
    pub qx_trace: f64,
    /// Non-zero when the adaptive rule produced a non-positive Rx this step.
    pub negative_rx: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: SocestStatus, msg: impl Into<String>) -> SocestStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting a panic into `SocestStatus::Panic`.
fn guard(f: impl FnOnce() -> SocestStatus) -> SocestStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(SocestStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SocestStatus> {
    if p.is_null() {
        return Err(fail(SocestStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SocestStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next `socest_*` call on the same thread.
#[no_mangle]
pub extern "C" fn socest_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn socest_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Configuration holding every default. Never returns NULL.
#[no_mangle]
pub extern "C" fn socest_config_new() -> *mut SocestConfig {
    Box::into_raw(Box::new(SocestConfig {
        inner: Config::default(),
    }))
}

/// Loads a TOML configuration file into a new handle.
///
/// # Safety
/// `path` must be NULL or a NUL-terminated string; `out` must be NULL or
/// point to writable storage for a handle pointer.
#[no_mangle]
pub unsafe extern "C" fn socest_config_from_file(
    path: *const c_char,
    out: *mut *mut SocestConfig,
) -> SocestStatus {
    guard(|| {
        if out.is_null() {
            return fail(SocestStatus::NullPointer, "out is NULL");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Config::from_path(Path::new(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SocestConfig { inner }));
                SocestStatus::Ok
            }
            Err(e) => fail(SocestStatus::Config, e.to_string()),
        }
    })
}

/// Sets one dotted configuration key, e.g. `("filter.gamma", "0.01")` or
/// `("ocv.coeffs", "[0, 0, 0, 0, 0, 0, 3.7]")`. The value uses TOML syntax;
/// bare words are taken as strings. On error the handle is unchanged.
///
/// # Safety
/// `config` must be NULL or a live handle; `key` and `value` must be NULL or
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn socest_config_set(
    config: *mut SocestConfig,
    key: *const c_char,
    value: *const c_char,
) -> SocestStatus {
    guard(|| {
        let Some(cfg) = config.as_mut() else {
            return fail(SocestStatus::NullPointer, "config is NULL");
        };
        let (key, value) = match (str_arg(key, "key"), str_arg(value, "value")) {
            (Ok(k), Ok(v)) => (k, v),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match cfg.inner.set(key, value) {
            Ok(()) => SocestStatus::Ok,
            Err(e) => fail(SocestStatus::Config, e.to_string()),
        }
    })
}

/// # Safety
/// `config` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn socest_config_free(config: *mut SocestConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Builds a joint estimator of `kind` from `config`. The configuration is
/// copied; the handle may be freed afterwards.
///
/// # Safety
/// `config` must be NULL or a live handle; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn socest_estimator_new(
    config: *const SocestConfig,
    kind: SocestFilterKind,
    out: *mut *mut SocestEstimator,
) -> SocestStatus {
    guard(|| {
        let Some(cfg) = config.as_ref() else {
            return fail(SocestStatus::NullPointer, "config is NULL");
        };
        if out.is_null() {
            return fail(SocestStatus::NullPointer, "out is NULL");
        }
        match JointEstimator::new(kind.into(), &cfg.inner.run) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SocestEstimator { inner }));
                SocestStatus::Ok
            }
            Err(e) => fail(SocestStatus::Estimator, e.to_string()),
        }
    })
}

/// Feeds one sample (current discharge-positive, in amperes; terminal
/// voltage in volts) and writes the new estimate to `out`.
///
/// # Safety
/// `estimator` must be NULL or a live handle; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn socest_estimator_step(
    estimator: *mut SocestEstimator,
    current_a: f64,
    voltage_v: f64,
    out: *mut SocestStepResult,
) -> SocestStatus {
    guard(|| {
        let Some(est) = estimator.as_mut() else {
            return fail(SocestStatus::NullPointer, "estimator is NULL");
        };
        if out.is_null() {
            return fail(SocestStatus::NullPointer, "out is NULL");
        }
        if !(current_a.is_finite() && voltage_v.is_finite()) {
            return fail(SocestStatus::InvalidArgument, "non-finite sample");
        }
        let r = est.inner.step(current_a, voltage_v);
        *out = SocestStepResult {
            soc: r.soc_est,
            up_v: r.up_est,
            residual_v: r.residual_v,
            r0_ohm: r.params.r0_ohm,
            rp_ohm: r.params.rp_ohm,
            cp_f: r.params.cp_f,
            rx: r.rx,
            qx_trace: r.qx_trace,
            negative_rx: u8::from(r.negative_rx),
        };
        SocestStatus::Ok
    })
}

/// Number of steps at which the adaptive rule produced a non-positive Rx.
///
/// # Safety
/// `estimator` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn socest_estimator_negative_rx_count(
    estimator: *const SocestEstimator,
) -> u64 {
    estimator
        .as_ref()
        .map_or(0, |e| e.inner.flags().negative_rx)
}

/// # Safety
/// `estimator` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn socest_estimator_free(estimator: *mut SocestEstimator) {
    if !estimator.is_null() {
        drop(Box::from_raw(estimator));
    }
}

/// Evaluates the configured OCV curve (the default curve when `config` is
/// NULL) at `soc`, clamped to `[0, 1]`.
///
/// # Safety
/// `config` must be NULL or a live handle; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn socest_ocv_eval(
    config: *const SocestConfig,
    soc: f64,
    out: *mut f64,
) -> SocestStatus {
    guard(|| {
        if out.is_null() {
            return fail(SocestStatus::NullPointer, "out is NULL");
        }
        if !soc.is_finite() {
            return fail(SocestStatus::InvalidArgument, "soc is not finite");
        }
        let curve = config
            .as_ref()
            .map_or_else(socest::OcvCurve::default, |c| c.inner.run.curve);
        *out = curve.eval(soc);
        SocestStatus::Ok
    })
}

unsafe fn metric(
    est: *const f64,
    reference: *const f64,
    len: usize,
    out: *mut f64,
    f: fn(&[f64], &[f64]) -> Result<f64, socest::pipeline::PipelineError>,
) -> SocestStatus {
    guard(|| {
        if est.is_null() || reference.is_null() || out.is_null() {
            return fail(SocestStatus::NullPointer, "NULL argument");
        }
        if len == 0 {
            return fail(SocestStatus::InvalidArgument, "empty sequence");
        }
        let (a, b) = (
            std::slice::from_raw_parts(est, len),
            std::slice::from_raw_parts(reference, len),
        );
        match f(a, b) {
            Ok(v) => {
                *out = v;
                SocestStatus::Ok
            }
            Err(e) => fail(SocestStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// `100 * sqrt(mean((est - reference)^2))` over `len` values.
///
/// # Safety
/// `est` and `reference` must point to `len` readable doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn socest_rmse_pct(
    est: *const f64,
    reference: *const f64,
    len: usize,
    out: *mut f64,
) -> SocestStatus {
    metric(est, reference, len, out, rmse_pct)
}

/// `100 * mean(|est - reference|)` over `len` values.
///
/// # Safety
/// As for [`socest_rmse_pct`].
#[no_mangle]
pub unsafe extern "C" fn socest_mae_pct(
    est: *const f64,
    reference: *const f64,
    len: usize,
    out: *mut f64,
) -> SocestStatus {
    metric(est, reference, len, out, mae_pct)
}
