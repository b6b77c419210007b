//! C ABI for the effort-estimation library.
//!
//! Handles are opaque pointers; every fallible call returns an [`EbatStatus`]
//! code and the last error message is retrievable per thread via
//! [`ebat_last_error`]. The header is generated by cbindgen into
//! `include/ebat.h` at build time.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::path::Path;
use std::ptr;

use ebat::adaptation::Strategy;
use ebat::dataset::{load_dataset, remove_missing, Dataset, Schema};
use ebat::evaluation::run_experiment;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error message").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbatStatus {
    Ok = 0,
    /// A pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// File could not be read.
    Io = 3,
    /// Schema or data file did not parse or validate.
    Parse = 4,
    /// Unknown strategy token or invalid K/folds/seed combination.
    InvalidArgument = 5,
    /// The experiment itself failed (see ebat_last_error).
    Failed = 6,
}

/// Opaque dataset handle: a cleaned dataset plus its schema.
pub struct EbatDataset {
    inner: Dataset,
}

/// Pooled cross-validation metrics for one (strategy, K, seed) run.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EbatMetrics {
    pub mmre: f64,
    pub mdmre: f64,
    /// Percentage in [0, 100].
    pub pred25: f64,
    pub n: usize,
}

fn c_str<'a>(ptr: *const c_char) -> Result<&'a str, EbatStatus> {
    if ptr.is_null() {
        return Err(EbatStatus::NullArgument);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_last_error("string argument is not valid UTF-8".into());
        EbatStatus::InvalidUtf8
    })
}

fn status_for(err: &ebat::Error) -> EbatStatus {
    match err {
        ebat::Error::Io { .. } => EbatStatus::Io,
        ebat::Error::Schema(_) | ebat::Error::Parse(_) => EbatStatus::Parse,
        ebat::Error::InvalidArgument(_) => EbatStatus::InvalidArgument,
        _ => EbatStatus::Failed,
    }
}

/// Message describing the most recent error on this thread, or null.
/// The pointer stays valid until the next failing call on the thread.
#[no_mangle]
pub extern "C" fn ebat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or(ptr::null(), |c| c.as_ptr())
    })
}

/// Load a dataset and schema from files, dropping rows with missing values.
/// On success `*out` owns the handle; release it with `ebat_dataset_free`.
#[no_mangle]
pub extern "C" fn ebat_dataset_load(
    data_path: *const c_char,
    schema_path: *const c_char,
    out: *mut *mut EbatDataset,
) -> EbatStatus {
    if out.is_null() {
        return EbatStatus::NullArgument;
    }
    let data_path = match c_str(data_path) {
        Ok(s) => s,
        Err(st) => return st,
    };
    let schema_path = match c_str(schema_path) {
        Ok(s) => s,
        Err(st) => return st,
    };
    let loaded = Schema::from_file(Path::new(schema_path))
        .and_then(|schema| load_dataset(Path::new(data_path), &schema));
    match loaded {
        Ok(d) => {
            let handle = Box::new(EbatDataset {
                inner: remove_missing(&d),
            });
            unsafe { *out = Box::into_raw(handle) };
            EbatStatus::Ok
        }
        Err(e) => {
            let st = status_for(&e);
            set_last_error(e.to_string());
            st
        }
    }
}

/// Number of projects in the (cleaned) dataset.
#[no_mangle]
pub extern "C" fn ebat_dataset_len(dataset: *const EbatDataset) -> usize {
    if dataset.is_null() {
        return 0;
    }
    unsafe { &*dataset }.inner.len()
}

/// Release a dataset handle. Passing null is a no-op.
#[no_mangle]
pub extern "C" fn ebat_dataset_free(dataset: *mut EbatDataset) {
    if !dataset.is_null() {
        drop(unsafe { Box::from_raw(dataset) });
    }
}

/// Run the seeded cross-validation protocol for one strategy token
/// (eba, wmean, l-eba, mendes, s-eba, r-eba, mt-eba) and fill `*metrics`.
#[no_mangle]
pub extern "C" fn ebat_run_experiment(
    dataset: *const EbatDataset,
    strategy: *const c_char,
    k: u32,
    folds: u32,
    seed: u64,
    metrics: *mut EbatMetrics,
) -> EbatStatus {
    if dataset.is_null() || metrics.is_null() {
        return EbatStatus::NullArgument;
    }
    let token = match c_str(strategy) {
        Ok(s) => s,
        Err(st) => return st,
    };
    let strategy = match Strategy::parse(token) {
        Ok(s) => s,
        Err(e) => {
            set_last_error(e.to_string());
            return EbatStatus::InvalidArgument;
        }
    };
    let d = &unsafe { &*dataset }.inner;
    match run_experiment(d, strategy, k as usize, folds as usize, seed) {
        Ok(out) => {
            unsafe {
                *metrics = EbatMetrics {
                    mmre: out.report.mmre,
                    mdmre: out.report.mdmre,
                    pred25: out.report.pred25,
                    n: out.report.n,
                };
            }
            EbatStatus::Ok
        }
        Err(e) => {
            let st = status_for(&e);
            set_last_error(e.to_string());
            st
        }
    }
}
