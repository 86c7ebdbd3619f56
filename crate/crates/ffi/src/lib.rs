//! C ABI over `qwalk-core`.
//!
//! Specs are opaque handles created from JSON. Functions return a [`QwStatus`];
//! on failure the message is available from [`qw_last_error_message`] on the
//! same thread. Reports are returned as JSON strings that the caller releases
//! with [`qw_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qwalk_core::coeffs::WalkSpec;
use qwalk_core::equivalence::coupled_distance;
use qwalk_core::estimators::{equiprobability_test, heisenberg_check};
use qwalk_core::scale::{QuantumScale, TolerancePolicy};
use qwalk_core::walk::{sample_sign, simulate_path};
use qwalk_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidSpec = 3,
    Simulation = 4,
    InsufficientData = 5,
    Config = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

/// Opaque parsed spec.
pub struct QwSpec {
    spec: WalkSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> QwStatus {
    match e {
        Error::Syntax { .. }
        | Error::UnknownFunction { .. }
        | Error::UndeclaredParameter(_)
        | Error::InvalidSpec(_)
        | Error::SpecNotFound(_)
        | Error::Json(_) => QwStatus::InvalidSpec,
        Error::Simulation { .. } | Error::Eval { .. } => QwStatus::Simulation,
        Error::InsufficientData(_) => QwStatus::InsufficientData,
        Error::Config(_) | Error::InvalidPolicy(_) => QwStatus::Config,
        Error::InvalidScale(_) | Error::InvalidValue(_) => QwStatus::InvalidArgument,
        Error::Io(_) => QwStatus::Internal,
    }
}

/// Run `f`, mapping errors and panics to a status and recording the message.
fn guard<F: FnOnce() -> Result<(), (QwStatus, String)>>(f: F) -> QwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QwStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            QwStatus::Internal
        }
    }
}

fn core<T>(r: qwalk_core::Result<T>) -> Result<T, (QwStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null() -> (QwStatus, String) {
    (QwStatus::NullPointer, "null pointer argument".into())
}

unsafe fn spec_ref<'a>(p: *const QwSpec) -> Result<&'a WalkSpec, (QwStatus, String)> {
    p.as_ref().map(|s| &s.spec).ok_or_else(null)
}

fn json_out<T: serde::Serialize>(value: &T, out: *mut *mut c_char) -> Result<(), (QwStatus, String)> {
    let text = serde_json::to_string(value).map_err(|e| (QwStatus::Internal, e.to_string()))?;
    let c = CString::new(text).map_err(|e| (QwStatus::Internal, e.to_string()))?;
    // SAFETY: caller guarantees `out` is valid for writes; checked non-null by callers.
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Message of the last failed call on this thread. Valid until the next call
/// into this library from the same thread.
#[no_mangle]
pub extern "C" fn qw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a spec from NUL-terminated JSON into a new handle.
///
/// # Safety
/// `json` must be a valid C string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qw_spec_from_json(json: *const c_char, out: *mut *mut QwSpec) -> QwStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return Err(null());
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (QwStatus::InvalidSpec, e.to_string()))?;
        let spec = core(WalkSpec::from_json(text))?;
        *out = Box::into_raw(Box::new(QwSpec { spec }));
        Ok(())
    })
}

/// Release a handle from [`qw_spec_from_json`]. Null is ignored.
///
/// # Safety
/// `spec` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qw_spec_free(spec: *mut QwSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Canonical JSON of a spec, to be released with [`qw_string_free`].
///
/// # Safety
/// `spec` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qw_spec_canonical_json(spec: *const QwSpec, out: *mut *mut c_char) -> QwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let s = spec_ref(spec)?;
        let c = CString::new(s.canonical_json()).map_err(|e| (QwStatus::Internal, e.to_string()))?;
        *out = c.into_raw();
        Ok(())
    })
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The sign `+1` or `-1` used by path `path_id` at grid step `step`.
#[no_mangle]
pub extern "C" fn qw_sample_sign(seed: u64, path_id: u64, step: u64) -> i8 {
    sample_sign(seed, path_id, step)
}

/// Simulate one path into `out`, which must hold `n_q + 1` values.
///
/// # Safety
/// `spec` must be a live handle and `out` valid for `out_len` writes.
#[no_mangle]
pub unsafe extern "C" fn qw_simulate_path(
    spec: *const QwSpec,
    n_q: u64,
    seed: u64,
    path_id: u64,
    out: *mut f64,
    out_len: usize,
) -> QwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let s = spec_ref(spec)?;
        let scale = core(QuantumScale::new(n_q))?;
        if out_len < scale.len() {
            return Err((
                QwStatus::BufferTooSmall,
                format!("buffer holds {out_len} values, need {}", scale.len()),
            ));
        }
        let path = core(simulate_path(s, &scale, seed, path_id))?;
        ptr::copy_nonoverlapping(path.values.as_ptr(), out, path.values.len());
        Ok(())
    })
}

/// Sum of squared increments of `values[0..len]`.
///
/// # Safety
/// `values` must be valid for `len` reads and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn qw_quadratic_variation(values: *const f64, len: usize, out: *mut f64) -> QwStatus {
    guard(|| {
        if values.is_null() || out.is_null() {
            return Err(null());
        }
        if len < 2 {
            return Err((QwStatus::InvalidArgument, "need at least two values".into()));
        }
        let values = std::slice::from_raw_parts(values, len);
        *out = values.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
        Ok(())
    })
}

/// Heisenberg check of path `path_id` under the scale's default policy; JSON report in `out_json`.
///
/// # Safety
/// `spec` must be a live handle and `out_json` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qw_heisenberg_check(
    spec: *const QwSpec,
    n_q: u64,
    seed: u64,
    path_id: u64,
    out_json: *mut *mut c_char,
) -> QwStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(null());
        }
        let s = spec_ref(spec)?;
        let scale = core(QuantumScale::new(n_q))?;
        let base = TolerancePolicy::for_scale(&scale);
        let policy = core(s.tolerance_policy().unwrap_or_default().apply(base))?;
        let path = core(simulate_path(s, &scale, seed, path_id))?;
        json_out(&core(heisenberg_check(&path, &policy))?, out_json)
    })
}

/// Equiprobability test of `signs[0..n]`; JSON report in `out_json`.
///
/// # Safety
/// `signs` must be valid for `n` reads and `out_json` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qw_equiprobability_test(
    signs: *const i8,
    n: usize,
    alpha: f64,
    max_lag: usize,
    out_json: *mut *mut c_char,
) -> QwStatus {
    guard(|| {
        if signs.is_null() || out_json.is_null() {
            return Err(null());
        }
        let signs = std::slice::from_raw_parts(signs, n);
        json_out(&core(equiprobability_test(signs, alpha, max_lag))?, out_json)
    })
}

/// Coupled distance between two specs; JSON report in `out_json`.
///
/// # Safety
/// Both handles must be live and `out_json` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qw_coupled_distance(
    spec_a: *const QwSpec,
    spec_b: *const QwSpec,
    n_q: u64,
    seed: u64,
    n_paths: u64,
    out_json: *mut *mut c_char,
) -> QwStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(null());
        }
        let (a, b) = (spec_ref(spec_a)?, spec_ref(spec_b)?);
        let scale = core(QuantumScale::new(n_q))?;
        json_out(&core(coupled_distance(a, b, &scale, seed, n_paths))?, out_json)
    })
}
