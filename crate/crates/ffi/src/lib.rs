//! C ABI over `its-core`.
//!
//! Every function returns an [`ItsStatus`]. On failure a message is kept in
//! thread-local storage and can be read with [`its_last_error`]. Documents
//! cross the boundary as JSON in the corpus line format.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use its_core::checkpoint::Checkpoint;
use its_core::harness;
use its_core::rouge::{rouge_l, rouge_n, RougeScore};
use its_core::text::{tokenize_and_pad, Document};
use its_core::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ItsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Data = 5,
    Numerical = 6,
    /// The output buffer is too small; the required length was written.
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque handle to a loaded model and its vocabulary.
pub struct ItsModel {
    checkpoint: Checkpoint,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ItsRouge {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<RougeScore> for ItsRouge {
    fn from(s: RougeScore) -> Self {
        ItsRouge {
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(ItsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => ItsStatus::Io,
            Error::Config(_) | Error::InvalidArgument(_) => ItsStatus::InvalidArgument,
            Error::Numerical(_) | Error::Untaped => ItsStatus::Numerical,
            Error::Shape { .. } | Error::Parse { .. } | Error::Data(_) | Error::NoGoldSummary(_) => ItsStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: ItsStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> ItsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ItsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ItsStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(ItsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ItsStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn model<'a>(m: *const ItsModel) -> Result<&'a ItsModel, Failure> {
    m.as_ref().ok_or_else(|| fail(ItsStatus::NullPointer, "model is null"))
}

fn document(json: &str) -> Result<Document, Failure> {
    let doc: Document = serde_json::from_str(json).map_err(|e| fail(ItsStatus::Data, format!("document JSON: {e}")))?;
    doc.validate()?;
    Ok(doc)
}

fn tokens(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn its_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null.
///
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn its_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a checkpoint file. The handle must be released with [`its_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn its_model_load(path: *const c_char, out: *mut *mut ItsModel) -> ItsStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(ItsStatus::NullPointer, "out is null"));
        }
        *out = ptr::null_mut();
        let path = text(path, "path")?;
        let checkpoint = Checkpoint::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(ItsModel { checkpoint }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`its_model_load`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn its_model_free(model: *mut ItsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of iterations K of the loaded model.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn its_model_iterations(model: *const ItsModel, out: *mut usize) -> ItsStatus {
    guard(|| {
        let m = self::model(model)?;
        if out.is_null() {
            return Err(fail(ItsStatus::NullPointer, "out is null"));
        }
        *out = m.checkpoint.model.config().iterations;
        Ok(())
    })
}

/// Writes one salience score per sentence of `document_json` into `scores`.
///
/// `len` always receives the sentence count. When it exceeds `capacity`
/// nothing is written and `ITS_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// `scores` must point to `capacity` doubles (it may be null when `capacity` is 0).
#[no_mangle]
pub unsafe extern "C" fn its_model_score(
    model: *const ItsModel,
    document_json: *const c_char,
    scores: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> ItsStatus {
    guard(|| {
        let m = self::model(model)?;
        if len.is_null() {
            return Err(fail(ItsStatus::NullPointer, "len is null"));
        }
        let doc = document(text(document_json, "document_json")?)?;
        let ck = &m.checkpoint;
        let grid = tokenize_and_pad(&doc, &ck.vocab, ck.model.config().max_words)?;
        let predicted = ck.model.predict(&grid)?.scores;
        let values = predicted.as_slice();
        *len = values.len();
        if values.len() > capacity {
            return Err(fail(
                ItsStatus::BufferTooSmall,
                format!("{} scores do not fit in {capacity}", values.len()),
            ));
        }
        if scores.is_null() {
            return Err(fail(ItsStatus::NullPointer, "scores is null"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), scores, values.len());
        Ok(())
    })
}

/// Extracts a three-sentence summary and returns it as a JSON object with
/// `id`, `indices`, `scores` and `sentences`. Free `out_json` with [`its_string_free`].
///
/// # Safety
/// `document_json` must be a NUL-terminated string and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn its_model_summarize(
    model: *const ItsModel,
    document_json: *const c_char,
    document_order: bool,
    out_json: *mut *mut c_char,
) -> ItsStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(fail(ItsStatus::NullPointer, "out_json is null"));
        }
        *out_json = ptr::null_mut();
        let m = self::model(model)?;
        let doc = document(text(document_json, "document_json")?)?;
        let ck = &m.checkpoint;
        let summary = harness::summarize(&ck.model, &ck.vocab, std::slice::from_ref(&doc), document_order)?;
        let json = serde_json::to_string(&summary[0]).map_err(|e| fail(ItsStatus::Data, e.to_string()))?;
        *out_json = CString::new(json)
            .map_err(|e| fail(ItsStatus::Data, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn its_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// ROUGE-N of two whitespace-tokenized texts.
///
/// # Safety
/// Both texts must be NUL-terminated strings and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn its_rouge_n(
    candidate: *const c_char,
    reference: *const c_char,
    n: usize,
    out: *mut ItsRouge,
) -> ItsStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(ItsStatus::NullPointer, "out is null"));
        }
        let c = tokens(text(candidate, "candidate")?);
        let r = tokens(text(reference, "reference")?);
        *out = rouge_n(&c, &r, n)?.into();
        Ok(())
    })
}

/// ROUGE-L of two whitespace-tokenized texts.
///
/// # Safety
/// Both texts must be NUL-terminated strings and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn its_rouge_l(
    candidate: *const c_char,
    reference: *const c_char,
    out: *mut ItsRouge,
) -> ItsStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(ItsStatus::NullPointer, "out is null"));
        }
        let c = tokens(text(candidate, "candidate")?);
        let r = tokens(text(reference, "reference")?);
        *out = rouge_l(&c, &r).into();
        Ok(())
    })
}
