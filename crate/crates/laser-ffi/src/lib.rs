//! C ABI for the estimation pipeline: opaque handles, integer error codes,
//! and a thread-local last-error message. See `include/laser.h` for the
//! matching declarations.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use laser::config::parse_config;
use laser::data::{load_dataset, Dataset};
use laser::error::Error;
use laser::estimators::{estimate, Method};
use laser::model::{load_model, save_model, train, IvaeModel};

pub const LASER_OK: c_int = 0;
pub const LASER_ERR_NULL_POINTER: c_int = 1;
pub const LASER_ERR_UTF8: c_int = 2;
pub const LASER_ERR_DIMENSION: c_int = 3;
pub const LASER_ERR_CONFIG: c_int = 4;
pub const LASER_ERR_PARSE: c_int = 5;
pub const LASER_ERR_CAPABILITY: c_int = 6;
pub const LASER_ERR_NUMERIC: c_int = 7;
pub const LASER_ERR_DEGENERATE: c_int = 8;
pub const LASER_ERR_UNDEFINED_METRIC: c_int = 9;
pub const LASER_ERR_IO: c_int = 10;
pub const LASER_ERR_BUFFER_TOO_SMALL: c_int = 11;
pub const LASER_ERR_PANIC: c_int = 12;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(code: c_int, message: &str) -> c_int {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).expect("nul-free message");
    });
    code
}

fn code_for(err: &Error) -> c_int {
    match err {
        Error::Dimension(_) => LASER_ERR_DIMENSION,
        Error::Config(_) => LASER_ERR_CONFIG,
        Error::Parse { .. } => LASER_ERR_PARSE,
        Error::Capability(_) => LASER_ERR_CAPABILITY,
        Error::Numeric(_) => LASER_ERR_NUMERIC,
        Error::Degenerate(_) => LASER_ERR_DEGENERATE,
        Error::UndefinedMetric(_) => LASER_ERR_UNDEFINED_METRIC,
        Error::Io { .. } => LASER_ERR_IO,
    }
}

fn from_result<T>(r: Result<T, Error>, out: impl FnOnce(T)) -> c_int {
    match r {
        Ok(v) => {
            out(v);
            LASER_OK
        }
        Err(e) => set_error(code_for(&e), &e.to_string()),
    }
}

fn guarded(body: impl FnOnce() -> c_int) -> c_int {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(code) => code,
        Err(_) => set_error(LASER_ERR_PANIC, "internal panic crossed the FFI boundary"),
    }
}

/// # Safety
/// `ptr` must be null or a valid NUL-terminated string.
unsafe fn str_arg<'a>(ptr: *const c_char) -> Result<&'a str, c_int> {
    if ptr.is_null() {
        return Err(set_error(LASER_ERR_NULL_POINTER, "null string argument"));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| set_error(LASER_ERR_UTF8, "string argument is not valid UTF-8"))
}

/// Opaque dataset handle.
pub struct LaserDataset(Dataset);
/// Opaque trained-model handle.
pub struct LaserModel(IvaeModel);

/// Copy the message of the most recent error on this thread into `buf`
/// (NUL-terminated, truncated to `len`). Returns the full message length.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn laser_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Load a dataset from CSV.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn laser_dataset_load(
    path: *const c_char,
    out: *mut *mut LaserDataset,
) -> c_int {
    guarded(|| {
        if out.is_null() {
            return set_error(LASER_ERR_NULL_POINTER, "null out pointer");
        }
        let path = match unsafe { str_arg(path) } {
            Ok(s) => s,
            Err(code) => return code,
        };
        from_result(load_dataset(Path::new(path)), |d| unsafe {
            *out = Box::into_raw(Box::new(LaserDataset(d)));
        })
    })
}

/// # Safety
/// `d` must be a pointer returned by `laser_dataset_load`, or null.
#[no_mangle]
pub unsafe extern "C" fn laser_dataset_free(d: *mut LaserDataset) {
    if !d.is_null() {
        drop(unsafe { Box::from_raw(d) });
    }
}

/// # Safety
/// `d` must be a valid dataset handle.
#[no_mangle]
pub unsafe extern "C" fn laser_dataset_n_units(d: *const LaserDataset) -> usize {
    if d.is_null() {
        return 0;
    }
    unsafe { &*d }.0.n_units()
}

/// # Safety
/// `d` must be a valid dataset handle.
#[no_mangle]
pub unsafe extern "C" fn laser_dataset_n_covariates(d: *const LaserDataset) -> usize {
    if d.is_null() {
        return 0;
    }
    unsafe { &*d }.0.d_x()
}

/// # Safety
/// `d` must be a valid dataset handle.
#[no_mangle]
pub unsafe extern "C" fn laser_dataset_n_short_term(d: *const LaserDataset) -> usize {
    if d.is_null() {
        return 0;
    }
    unsafe { &*d }.0.d_m()
}

fn parse_cfg(text: &str) -> Result<laser::config::RunConfig, Error> {
    parse_config(text, "<ffi config>")
}

/// Train a model. `config` is configuration text in the same format as the
/// CLI config file (empty string for defaults).
///
/// # Safety
/// All handles must be valid; `config` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn laser_train(
    d_obs: *const LaserDataset,
    d_exp: *const LaserDataset,
    config: *const c_char,
    out: *mut *mut LaserModel,
) -> c_int {
    guarded(|| {
        if d_obs.is_null() || d_exp.is_null() || out.is_null() {
            return set_error(LASER_ERR_NULL_POINTER, "null handle argument");
        }
        let text = match unsafe { str_arg(config) } {
            Ok(s) => s,
            Err(code) => return code,
        };
        let cfg = match parse_cfg(text) {
            Ok(c) => c,
            Err(e) => return set_error(code_for(&e), &e.to_string()),
        };
        let (obs, exp) = unsafe { (&(*d_obs).0, &(*d_exp).0) };
        from_result(train(obs, exp, &cfg.train).map(|(m, _)| m), |m| unsafe {
            *out = Box::into_raw(Box::new(LaserModel(m)));
        })
    })
}

/// # Safety
/// `m` must be a pointer returned by a model constructor, or null.
#[no_mangle]
pub unsafe extern "C" fn laser_model_free(m: *mut LaserModel) {
    if !m.is_null() {
        drop(unsafe { Box::from_raw(m) });
    }
}

/// # Safety
/// `m` must be a valid model handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn laser_model_save(m: *const LaserModel, path: *const c_char) -> c_int {
    guarded(|| {
        if m.is_null() {
            return set_error(LASER_ERR_NULL_POINTER, "null model handle");
        }
        let path = match unsafe { str_arg(path) } {
            Ok(s) => s,
            Err(code) => return code,
        };
        from_result(save_model(unsafe { &(*m).0 }, Path::new(path)), |()| {})
    })
}

/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn laser_model_load(path: *const c_char, out: *mut *mut LaserModel) -> c_int {
    guarded(|| {
        if out.is_null() {
            return set_error(LASER_ERR_NULL_POINTER, "null out pointer");
        }
        let path = match unsafe { str_arg(path) } {
            Ok(s) => s,
            Err(code) => return code,
        };
        from_result(load_model(Path::new(path)), |m| unsafe {
            *out = Box::into_raw(Box::new(LaserModel(m)));
        })
    })
}

/// Predict the long-term outcome for every unit of `d`. `buf` must hold
/// `laser_dataset_n_units(d)` doubles.
///
/// # Safety
/// Handles must be valid; `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn laser_model_predict_y(
    m: *const LaserModel,
    d: *const LaserDataset,
    buf: *mut c_double,
    len: usize,
) -> c_int {
    guarded(|| {
        if m.is_null() || d.is_null() || buf.is_null() {
            return set_error(LASER_ERR_NULL_POINTER, "null argument");
        }
        let (model, data) = unsafe { (&(*m).0, &(*d).0) };
        if len < data.n_units() {
            return set_error(
                LASER_ERR_BUFFER_TOO_SMALL,
                &format!("buffer holds {len} doubles, need {}", data.n_units()),
            );
        }
        from_result(model.predict_y(data), |yhat| unsafe {
            std::ptr::copy_nonoverlapping(yhat.as_ptr(), buf, yhat.len());
        })
    })
}

/// Run one estimator end to end. `method` is one of `laser`, `sind-linear`,
/// `sind-mlp`, `bd-linear`, `bd-mlp`; the ATE estimate lands in `tau_out`.
///
/// # Safety
/// Handles and strings must be valid; `tau_out` writable.
#[no_mangle]
pub unsafe extern "C" fn laser_estimate(
    method: *const c_char,
    d_obs: *const LaserDataset,
    d_exp: *const LaserDataset,
    config: *const c_char,
    tau_out: *mut c_double,
) -> c_int {
    guarded(|| {
        if d_obs.is_null() || d_exp.is_null() || tau_out.is_null() {
            return set_error(LASER_ERR_NULL_POINTER, "null argument");
        }
        let method = match unsafe { str_arg(method) }.and_then(|s| {
            Method::parse(s).map_err(|e| set_error(code_for(&e), &e.to_string()))
        }) {
            Ok(m) => m,
            Err(code) => return code,
        };
        let text = match unsafe { str_arg(config) } {
            Ok(s) => s,
            Err(code) => return code,
        };
        let cfg = match parse_cfg(text) {
            Ok(c) => c,
            Err(e) => return set_error(code_for(&e), &e.to_string()),
        };
        let (obs, exp) = unsafe { (&(*d_obs).0, &(*d_exp).0) };
        from_result(estimate(method, obs, exp, &cfg.train), |r| unsafe {
            *tau_out = r.tau_hat;
        })
    })
}
