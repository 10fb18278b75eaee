//! C ABI over the `subcredit` scoring path: load a saved model and score
//! feature rows, read EMB1 embedding tables, compute hash embeddings and
//! the two headline metrics.
//!
//! Every fallible function returns an [`ScStatus`]; on failure a message
//! for the calling thread is available from [`sc_last_error_message`].
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use subcredit::embeddings::{hash_embed, read_embedding_file, EmbeddingTable};
use subcredit::evaluation::{auc_pr, ks_statistic, spread_baseline};
use subcredit::models::{load_model, Model};
use subcredit::{Error, Matrix};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    ShapeMismatch = 5,
    Training = 6,
    Internal = 7,
}

/// A trained model loaded from an SCM1 file.
pub struct ScModel(Model);

/// An EMB1 embedding table.
pub struct ScEmbeddingTable(EmbeddingTable);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("no interior NUL")));
}

fn status_of(e: &Error) -> ScStatus {
    match e {
        Error::Io { .. } => ScStatus::Io,
        Error::Parse { .. }
        | Error::Format(_)
        | Error::Corrupt { .. }
        | Error::Version { .. }
        | Error::Json(_)
        | Error::Csv(_) => ScStatus::Format,
        Error::WidthMismatch { .. } => ScStatus::ShapeMismatch,
        Error::Training(_) => ScStatus::Training,
        Error::Config(_) | Error::InvalidInput(_) => ScStatus::InvalidArgument,
        Error::Stage { source, .. } => status_of(source),
    }
}

struct Fail(ScStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(ScStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ScStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ScStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ScStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(ScStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write_out<T>(p: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated
/// and NUL-terminated) and returns the full message length excluding the
/// terminator; 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Loads an SCM1 model file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_model_load(path: *const c_char, out: *mut *mut ScModel) -> ScStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        if out.is_null() {
            return Err(null("out"));
        }
        let model = load_model(path)?;
        write_out(out, Box::into_raw(Box::new(ScModel(model))), "out")
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must come from [`sc_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sc_model_free(model: *mut ScModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of feature columns the model expects.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_model_input_width(model: *const ScModel, out: *mut usize) -> ScStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        write_out(out, m.0.input_width(), "out")
    })
}

/// Model family: 0 logistic, 1 boosted trees, 2 MLP.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_model_kind(model: *const ScModel, out: *mut u8) -> ScStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        write_out(out, m.0.kind().tag(), "out")
    })
}

/// Scores `rows` row-major feature rows of width `cols` into `out`.
///
/// # Safety
/// `x` must hold `rows * cols` doubles and `out` room for `rows` doubles.
#[no_mangle]
pub unsafe extern "C" fn sc_model_predict(
    model: *const ScModel,
    x: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
) -> ScStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Fail(ScStatus::InvalidArgument, "rows * cols overflows".into()))?;
        let x = slice_arg(x, n, "x")?;
        let out = out_slice(out, rows, "out")?;
        let matrix = Matrix::from_vec(rows, cols, x.to_vec())?;
        let scores = m.0.predict_proba(&matrix)?;
        out.copy_from_slice(&scores);
        Ok(())
    })
}

/// Reads an EMB1 file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_embedding_table_read(path: *const c_char, out: *mut *mut ScEmbeddingTable) -> ScStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        if out.is_null() {
            return Err(null("out"));
        }
        let table = read_embedding_file(path)?;
        write_out(out, Box::into_raw(Box::new(ScEmbeddingTable(table))), "out")
    })
}

/// Releases a table; null is ignored.
///
/// # Safety
/// `table` must come from [`sc_embedding_table_read`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sc_embedding_table_free(table: *mut ScEmbeddingTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Vector width of the table.
///
/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_embedding_table_dim(table: *const ScEmbeddingTable, out: *mut usize) -> ScStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        write_out(out, t.0.dim(), "out")
    })
}

/// Number of keys in the table.
///
/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_embedding_table_len(table: *const ScEmbeddingTable, out: *mut usize) -> ScStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        write_out(out, t.0.len(), "out")
    })
}

/// Copies the vector stored under `key` into `out`, which must hold exactly
/// the table's width. A missing key is `InvalidArgument`.
///
/// # Safety
/// `key` must be NUL-terminated; `out` must point to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn sc_embedding_table_get(
    table: *const ScEmbeddingTable,
    key: *const c_char,
    out: *mut f32,
    len: usize,
) -> ScStatus {
    guard(|| {
        let t = table.as_ref().ok_or_else(|| null("table"))?;
        let key = str_arg(key, "key")?;
        if len != t.0.dim() {
            return Err(Error::WidthMismatch {
                expected: t.0.dim(),
                found: len,
            }
            .into());
        }
        let v = t
            .0
            .get(key)
            .ok_or_else(|| Fail(ScStatus::InvalidArgument, format!("no embedding for key {key}")))?;
        out_slice(out, len, "out")?.copy_from_slice(v);
        Ok(())
    })
}

/// Hash embedding of `text` into `out[0..dim]`.
///
/// # Safety
/// `text` must be NUL-terminated; `out` must point to `dim` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sc_hash_embed(text: *const c_char, dim: usize, seed: u64, out: *mut f64) -> ScStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        if dim == 0 {
            return Err(Fail(ScStatus::InvalidArgument, "dim must be positive".into()));
        }
        let out = out_slice(out, dim, "out")?;
        out.copy_from_slice(&hash_embed(text, dim, seed));
        Ok(())
    })
}

unsafe fn scored(scores: *const f64, labels: *const u8, n: usize) -> Result<(Vec<f64>, Vec<bool>), Fail> {
    let s = slice_arg(scores, n, "scores")?.to_vec();
    let l = slice_arg(labels, n, "labels")?.iter().map(|&b| b != 0).collect();
    Ok((s, l))
}

/// Area under the precision-recall curve. Labels are 0/1 bytes.
///
/// # Safety
/// `scores` and `labels` must each hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_auc_pr(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> ScStatus {
    guard(|| {
        let (s, l) = scored(scores, labels, n)?;
        write_out(out, auc_pr(&s, &l)?, "out")
    })
}

/// Kolmogorov-Smirnov distance between the class score distributions.
///
/// # Safety
/// `scores` and `labels` must each hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_ks_statistic(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> ScStatus {
    guard(|| {
        let (s, l) = scored(scores, labels, n)?;
        write_out(out, ks_statistic(&s, &l)?, "out")
    })
}

/// Spread-implied default scores, `clamp(spread / 0.10, 0, 1)`.
///
/// # Safety
/// `spreads` and `out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn sc_spread_baseline(spreads: *const f64, n: usize, out: *mut f64) -> ScStatus {
    guard(|| {
        let s = slice_arg(spreads, n, "spreads")?;
        let scores = spread_baseline(s)?;
        out_slice(out, n, "out")?.copy_from_slice(&scores);
        Ok(())
    })
}
