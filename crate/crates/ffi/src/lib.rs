//! C ABI over the project service and the evaluation statistics.
//!
//! Every fallible function returns a [`UxevalStatus`]. The message for the
//! most recent failure on the calling thread is read with
//! [`uxeval_last_error`]. Strings returned through out-parameters belong to
//! the caller and are released with [`uxeval_string_free`]. Panics never
//! cross the boundary; they surface as `UXEVAL_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use uxeval::corpus::IndexSet;
use uxeval::evalharness::paired_t_test;
use uxeval::recommend::ProjectInputs;
use uxeval::service::{ExportFormat, ProjectService, ServiceConfig, ServiceError};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UxevalStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    Validation = 4,
    NotFound = 5,
    Conflict = 6,
    Llm = 7,
    Pipeline = 8,
    Storage = 9,
    Config = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UxevalExportFormat {
    Json = 0,
    Markdown = 1,
}

/// Paired t-test result; `p` is two-sided.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UxevalTTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
}

/// Opaque handle to a project service.
pub struct UxevalService {
    inner: ProjectService,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(UxevalStatus, String);

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        let status = match e.code() {
            "validation_error" | "unknown_metric" | "unknown_outcome" | "unknown_risk" => UxevalStatus::Validation,
            "not_found" => UxevalStatus::NotFound,
            "empty_cart" => UxevalStatus::Conflict,
            "llm_unavailable" | "unparseable_llm_output" => UxevalStatus::Llm,
            "storage_error" => UxevalStatus::Storage,
            "startup_error" => UxevalStatus::Config,
            _ => UxevalStatus::Pipeline,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, recording its failure or panic for [`uxeval_last_error`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> UxevalStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            UxevalStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            UxevalStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(UxevalStatus::NullArgument, format!("`{what}` must not be null"))
}

/// # Safety
/// `p` must be null or a valid nul-terminated string.
unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(UxevalStatus::InvalidUtf8, format!("`{what}`: {e}")))
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure(UxevalStatus::InvalidJson, format!("`{what}`: {e}")))
}

/// # Safety
/// `out` must be null or valid for writes.
unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    let c = CString::new(s).map_err(|e| Failure(UxevalStatus::Pipeline, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn write_json<T: serde::Serialize>(out: *mut *mut c_char, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string(value).map_err(|e| Failure(UxevalStatus::Pipeline, e.to_string()))?;
    write_string(out, text)
}

unsafe fn service<'a>(svc: *const UxevalService) -> Result<&'a ProjectService, Failure> {
    svc.as_ref().map(|s| &s.inner).ok_or_else(|| null("svc"))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn uxeval_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn uxeval_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn uxeval_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Opens a service from a TOML config file. Environment overrides apply.
///
/// # Safety
/// `config_path` must be a nul-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn uxeval_service_open(config_path: *const c_char, out: *mut *mut UxevalService) -> UxevalStatus {
    guard(|| {
        let path = read_str(config_path, "config_path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = ServiceConfig::load(Path::new(path)).map_err(|e| Failure(UxevalStatus::Config, e.to_string()))?;
        let inner = ProjectService::from_config(&cfg)?;
        *out = Box::into_raw(Box::new(UxevalService { inner }));
        Ok(())
    })
}

/// Closes a service. Null is ignored.
///
/// # Safety
/// `svc` must be null or a handle from [`uxeval_service_open`], freed once.
#[no_mangle]
pub unsafe extern "C" fn uxeval_service_free(svc: *mut UxevalService) {
    if !svc.is_null() {
        drop(Box::from_raw(svc));
    }
}

/// Creates a project from `ProjectInputs` JSON; writes the session JSON.
///
/// # Safety
/// Pointer arguments must be valid; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uxeval_project_create(
    svc: *const UxevalService,
    inputs_json: *const c_char,
    out_json: *mut *mut c_char,
) -> UxevalStatus {
    guard(|| {
        let svc = service(svc)?;
        let inputs: ProjectInputs = parse_json(read_str(inputs_json, "inputs_json")?, "inputs_json")?;
        write_json(out_json, &svc.create(inputs)?)
    })
}

/// Writes the session JSON for `id`.
///
/// # Safety
/// Pointer arguments must be valid; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uxeval_project_get(
    svc: *const UxevalService,
    id: *const c_char,
    out_json: *mut *mut c_char,
) -> UxevalStatus {
    guard(|| {
        let svc = service(svc)?;
        write_json(out_json, &svc.get(read_str(id, "id")?)?)
    })
}

/// Reruns the recommendation. `indexes_json` may be null to keep the
/// current indexes. Writes `{recommendation, diff, revision}`.
///
/// # Safety
/// Pointer arguments must be valid; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uxeval_project_regenerate(
    svc: *const UxevalService,
    id: *const c_char,
    indexes_json: *const c_char,
    out_json: *mut *mut c_char,
) -> UxevalStatus {
    guard(|| {
        let svc = service(svc)?;
        let id = read_str(id, "id")?;
        let edited: Option<IndexSet> = if indexes_json.is_null() {
            None
        } else {
            Some(parse_json(read_str(indexes_json, "indexes_json")?, "indexes_json")?)
        };
        write_json(out_json, &svc.regenerate(id, edited)?)
    })
}

/// Adds a metric to the cart; writes the updated session JSON.
///
/// # Safety
/// Pointer arguments must be valid; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uxeval_cart_add(
    svc: *const UxevalService,
    id: *const c_char,
    metric: *const c_char,
    out_json: *mut *mut c_char,
) -> UxevalStatus {
    guard(|| {
        let svc = service(svc)?;
        write_json(out_json, &svc.cart_add(read_str(id, "id")?, read_str(metric, "metric")?)?)
    })
}

/// Removes a metric from the cart; writes the updated session JSON.
///
/// # Safety
/// Pointer arguments must be valid; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uxeval_cart_remove(
    svc: *const UxevalService,
    id: *const c_char,
    metric: *const c_char,
    out_json: *mut *mut c_char,
) -> UxevalStatus {
    guard(|| {
        let svc = service(svc)?;
        write_json(out_json, &svc.cart_remove(read_str(id, "id")?, read_str(metric, "metric")?)?)
    })
}

/// Generates the plan and UX outcome for the cart; writes their JSON.
///
/// # Safety
/// Pointer arguments must be valid; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uxeval_project_generate(
    svc: *const UxevalService,
    id: *const c_char,
    out_json: *mut *mut c_char,
) -> UxevalStatus {
    guard(|| {
        let svc = service(svc)?;
        let (generated, _) = svc.generate(read_str(id, "id")?)?;
        write_json(out_json, &generated)
    })
}

/// Writes the export artifact in `format`.
///
/// # Safety
/// Pointer arguments must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uxeval_project_export(
    svc: *const UxevalService,
    id: *const c_char,
    format: UxevalExportFormat,
    out: *mut *mut c_char,
) -> UxevalStatus {
    guard(|| {
        let svc = service(svc)?;
        let format = match format {
            UxevalExportFormat::Json => ExportFormat::Json,
            UxevalExportFormat::Markdown => ExportFormat::Markdown,
        };
        write_string(out, svc.export(read_str(id, "id")?, format)?)
    })
}

/// Paired t-test of `a[i] - b[i]` over `n` pairs.
///
/// # Safety
/// `a` and `b` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uxeval_paired_t_test(a: *const f64, b: *const f64, n: usize, out: *mut UxevalTTest) -> UxevalStatus {
    guard(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            return Err(null("a, b and out"));
        }
        let (a, b) = (std::slice::from_raw_parts(a, n), std::slice::from_raw_parts(b, n));
        let t = paired_t_test(a, b).map_err(|e| Failure(UxevalStatus::Validation, e.to_string()))?;
        *out = UxevalTTest { t: t.t, p: t.p, df: t.df };
        Ok(())
    })
}
