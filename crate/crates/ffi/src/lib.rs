//! C ABI for the screenloop engine.
//!
//! Objects are opaque handles created by `sl_*_new`/`sl_*_parse`/`sl_*_load`
//! and released with the matching `sl_*_free`. Every fallible call returns an
//! [`SlStatus`]; on failure a message for the calling thread is available from
//! [`sl_last_error_message`]. Buffers and strings handed out by the library
//! must be returned with [`sl_buffer_free`] and [`sl_string_free`].
//!
//! Labeling through this interface is synchronous: `sl_project_label` retrains
//! before it returns.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use screenloop::corpus::{parse_bytes, CorpusError};
use screenloop::engine::{export_results, load_state, save_state, EngineError, ExportFormat};
use screenloop::{Dataset, Label, ProjectState, Settings, SourceFormat};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The dataset bytes could not be parsed.
    ParseError = 3,
    /// Settings, priors or another argument were rejected.
    InvalidArgument = 4,
    UnknownRow = 5,
    AlreadyLabeled = 6,
    /// Every record has been labeled.
    Exhausted = 7,
    /// The stopping rule has fired.
    Stopped = 8,
    /// A saved state could not be loaded.
    CorruptState = 9,
    /// Training failed or the library panicked.
    Internal = 10,
}

/// Dataset format selector. `Auto` sniffs the bytes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlFormat {
    Auto = 0,
    Ris = 1,
    Csv = 2,
}

/// Snapshot of screening progress.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SlProgress {
    pub n_labeled: usize,
    pub n_relevant: usize,
    pub n_irrelevant: usize,
    pub n_total: usize,
    pub model_version: u64,
}

/// Byte buffer owned by the library.
#[repr(C)]
#[derive(Debug)]
pub struct SlBuffer {
    pub data: *mut u8,
    pub len: usize,
}

pub struct SlDataset {
    inner: Arc<Dataset>,
}

pub struct SlProject {
    inner: ProjectState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn fail(status: SlStatus, message: impl std::fmt::Display) -> SlStatus {
    set_error(message.to_string());
    status
}

fn engine_status(e: &EngineError) -> SlStatus {
    match e {
        EngineError::UnknownRowId(_) => SlStatus::UnknownRow,
        EngineError::AlreadyLabeled(_) => SlStatus::AlreadyLabeled,
        EngineError::PoolExhausted => SlStatus::Exhausted,
        EngineError::Stopped => SlStatus::Stopped,
        EngineError::FingerprintMismatch { .. } | EngineError::CorruptState { .. } | EngineError::VersionUnsupported(_) => {
            SlStatus::CorruptState
        }
        EngineError::Features(_) | EngineError::Classify(_) | EngineError::Strategy(_) => SlStatus::Internal,
        _ => SlStatus::InvalidArgument,
    }
}

fn engine_fail(e: EngineError) -> SlStatus {
    fail(engine_status(&e), e)
}

fn corpus_fail(e: CorpusError) -> SlStatus {
    fail(SlStatus::ParseError, e)
}

/// Runs `f`, turning a panic into [`SlStatus::Internal`].
fn guard(f: impl FnOnce() -> SlStatus) -> SlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => {
            if status == SlStatus::Ok {
                LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            }
            status
        }
        Err(_) => fail(SlStatus::Internal, "internal panic"),
    }
}

unsafe fn bytes<'a>(data: *const u8, len: usize) -> Option<&'a [u8]> {
    if len == 0 {
        return Some(&[]);
    }
    if data.is_null() {
        return None;
    }
    Some(std::slice::from_raw_parts(data, len))
}

fn into_buffer(mut bytes: Vec<u8>) -> SlBuffer {
    bytes.shrink_to_fit();
    let mut bytes = bytes.into_boxed_slice();
    let buffer = SlBuffer {
        data: bytes.as_mut_ptr(),
        len: bytes.len(),
    };
    std::mem::forget(bytes);
    buffer
}

/// Message describing the last failed call on this thread, or NULL. The
/// pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn sl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a RIS or CSV file held in memory.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_dataset_parse(
    data: *const u8,
    len: usize,
    format: SlFormat,
    out: *mut *mut SlDataset,
) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::NullArgument, "out is NULL");
        }
        let Some(input) = bytes(data, len) else {
            return fail(SlStatus::NullArgument, "data is NULL");
        };
        let format = match format {
            SlFormat::Auto => None,
            SlFormat::Ris => Some(SourceFormat::Ris),
            SlFormat::Csv => Some(SourceFormat::Csv),
        };
        match parse_bytes(input, format) {
            Ok(ds) => {
                *out = Box::into_raw(Box::new(SlDataset { inner: Arc::new(ds) }));
                SlStatus::Ok
            }
            Err(e) => corpus_fail(e),
        }
    })
}

/// # Safety
/// `dataset` must be NULL or a handle from [`sl_dataset_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_dataset_free(dataset: *mut SlDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of records, or 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_dataset_len(dataset: *const SlDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.len())
}

/// Hex content fingerprint of the dataset. Free with [`sl_string_free`].
///
/// # Safety
/// `dataset` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_dataset_fingerprint(dataset: *const SlDataset, out: *mut *mut c_char) -> SlStatus {
    guard(|| {
        let (Some(d), false) = (dataset.as_ref(), out.is_null()) else {
            return fail(SlStatus::NullArgument, "dataset or out is NULL");
        };
        let s = CString::new(d.inner.fingerprint()).expect("hex has no NUL");
        *out = s.into_raw();
        SlStatus::Ok
    })
}

/// Starts a project on `dataset` with the given prior labels and trains the
/// first model. `settings_json` may be NULL for defaults.
///
/// # Safety
/// `dataset` must be a live handle, `settings_json` NULL or a NUL-terminated
/// string, the id arrays readable for their lengths, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_project_new(
    dataset: *const SlDataset,
    settings_json: *const c_char,
    included: *const usize,
    n_included: usize,
    excluded: *const usize,
    n_excluded: usize,
    out: *mut *mut SlProject,
) -> SlStatus {
    guard(|| {
        let (Some(d), false) = (dataset.as_ref(), out.is_null()) else {
            return fail(SlStatus::NullArgument, "dataset or out is NULL");
        };
        let settings = match parse_settings(settings_json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let (Some(inc), Some(exc)) = (ids(included, n_included), ids(excluded, n_excluded)) else {
            return fail(SlStatus::NullArgument, "prior id array is NULL");
        };
        match ProjectState::init_project(Arc::clone(&d.inner), settings, inc, exc) {
            Ok(state) => {
                *out = Box::into_raw(Box::new(SlProject { inner: state }));
                SlStatus::Ok
            }
            Err(e) => engine_fail(e),
        }
    })
}

unsafe fn ids<'a>(data: *const usize, len: usize) -> Option<&'a [usize]> {
    if len == 0 {
        return Some(&[]);
    }
    if data.is_null() {
        return None;
    }
    Some(std::slice::from_raw_parts(data, len))
}

unsafe fn parse_settings(json: *const c_char) -> Result<Settings, SlStatus> {
    if json.is_null() {
        return Ok(Settings::default());
    }
    let text = CStr::from_ptr(json)
        .to_str()
        .map_err(|e| fail(SlStatus::InvalidUtf8, e))?;
    serde_json::from_str(text).map_err(|e| fail(SlStatus::InvalidArgument, format!("settings: {e}")))
}

/// # Safety
/// `project` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_project_free(project: *mut SlProject) {
    if !project.is_null() {
        drop(Box::from_raw(project));
    }
}

/// Row id of the record to screen next.
///
/// # Safety
/// `project` must be a live handle and `row_id` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_project_next(project: *mut SlProject, row_id: *mut usize) -> SlStatus {
    guard(|| {
        let (Some(p), false) = (project.as_mut(), row_id.is_null()) else {
            return fail(SlStatus::NullArgument, "project or row_id is NULL");
        };
        match p.inner.next_record() {
            Ok(presented) => {
                *row_id = presented.row_id;
                SlStatus::Ok
            }
            Err(e) => engine_fail(e),
        }
    })
}

/// Records a decision and retrains.
///
/// # Safety
/// `project` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sl_project_label(project: *mut SlProject, row_id: usize, relevant: bool) -> SlStatus {
    guard(|| {
        let Some(p) = project.as_mut() else {
            return fail(SlStatus::NullArgument, "project is NULL");
        };
        let label = if relevant { Label::Relevant } else { Label::Irrelevant };
        match p.inner.submit_label_sync(row_id, label) {
            Ok(_) => SlStatus::Ok,
            Err(e) => engine_fail(e),
        }
    })
}

/// # Safety
/// `project` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_project_progress(project: *const SlProject, out: *mut SlProgress) -> SlStatus {
    guard(|| {
        let (Some(p), false) = (project.as_ref(), out.is_null()) else {
            return fail(SlStatus::NullArgument, "project or out is NULL");
        };
        let progress = p.inner.progress();
        *out = SlProgress {
            n_labeled: progress.n_labeled,
            n_relevant: progress.n_relevant,
            n_irrelevant: progress.n_irrelevant,
            n_total: progress.n_total,
            model_version: progress.last_model_version,
        };
        SlStatus::Ok
    })
}

/// Serializes the project state. Free the buffer with [`sl_buffer_free`].
///
/// # Safety
/// `project` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_project_save(project: *const SlProject, out: *mut SlBuffer) -> SlStatus {
    guard(|| {
        let (Some(p), false) = (project.as_ref(), out.is_null()) else {
            return fail(SlStatus::NullArgument, "project or out is NULL");
        };
        *out = into_buffer(save_state(&p.inner));
        SlStatus::Ok
    })
}

/// Restores a project saved with [`sl_project_save`] against the same dataset.
///
/// # Safety
/// `dataset` must be a live handle, `data` readable for `len` bytes, and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_project_load(
    dataset: *const SlDataset,
    data: *const u8,
    len: usize,
    out: *mut *mut SlProject,
) -> SlStatus {
    guard(|| {
        let (Some(d), false) = (dataset.as_ref(), out.is_null()) else {
            return fail(SlStatus::NullArgument, "dataset or out is NULL");
        };
        let Some(input) = bytes(data, len) else {
            return fail(SlStatus::NullArgument, "data is NULL");
        };
        match load_state(input, Arc::clone(&d.inner)) {
            Ok(state) => {
                *out = Box::into_raw(Box::new(SlProject { inner: state }));
                SlStatus::Ok
            }
            Err(e) => engine_fail(e),
        }
    })
}

/// Exports labeled records followed by the current ranking. `format` must be
/// `SL_FORMAT_RIS` or `SL_FORMAT_CSV`.
///
/// # Safety
/// `project` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_project_export(project: *const SlProject, format: SlFormat, out: *mut SlBuffer) -> SlStatus {
    guard(|| {
        let (Some(p), false) = (project.as_ref(), out.is_null()) else {
            return fail(SlStatus::NullArgument, "project or out is NULL");
        };
        let format = match format {
            SlFormat::Csv => ExportFormat::Csv,
            SlFormat::Ris => ExportFormat::Ris,
            SlFormat::Auto => return fail(SlStatus::InvalidArgument, "export needs an explicit format"),
        };
        *out = into_buffer(export_results(&p.inner, format));
        SlStatus::Ok
    })
}

/// # Safety
/// `buffer` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sl_buffer_free(buffer: SlBuffer) {
    if !buffer.data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(buffer.data, buffer.len)));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
