//! C ABI over `chartqa`: chart specs, extracted tables, the aggregation
//! executor, relaxed matching and trained models.
//!
//! Every fallible call returns a [`CqStatus`]. On failure the message is
//! available from [`cq_last_error`] on the same thread. Strings returned to
//! the caller are freed with [`cq_string_free`]; every handle has its own
//! `_free` function.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use chartqa::chart::{parse_chart_spec, rasterize, ChartSpec, DataTable};
use chartqa::extraction::extract_table;
use chartqa::metrics::relaxed_match;
use chartqa::neural::{load_checkpoint, predict_answer, ModelInput, VisionTapas, Vocab};
use chartqa::qa::{execute, AggregationOp, CellSelection};
use libc::c_char;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Parse = 4,
    Extraction = 5,
    Execution = 6,
    Io = 7,
    Model = 8,
    Panic = 9,
}

/// Parsed chart description.
pub struct CqChart {
    spec: ChartSpec,
}

/// Data table with row labels and column headers.
pub struct CqTable {
    table: DataTable,
}

/// Trained model with its vocabulary.
pub struct CqModel {
    model: VisionTapas,
    vocab: Vocab,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: CqStatus, msg: impl std::fmt::Display) -> CqStatus {
    set_error(msg.to_string());
    status
}

fn guard(f: impl FnOnce() -> CqStatus) -> CqStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(CqStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, CqStatus> {
    if p.is_null() {
        return Err(fail(CqStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(CqStatus::InvalidUtf8, e))
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses ChartSpec JSON into a new chart handle.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cq_chart_parse(json: *const c_char, out: *mut *mut CqChart) -> CqStatus {
    guard(|| {
        if out.is_null() {
            return fail(CqStatus::NullPointer, "null output pointer");
        }
        let raw = try_ffi!(read_str(json));
        let spec = try_ffi!(parse_chart_spec(raw).map_err(|e| fail(CqStatus::Parse, e)));
        *out = Box::into_raw(Box::new(CqChart { spec }));
        CqStatus::Ok
    })
}

/// # Safety
/// `chart` must come from [`cq_chart_parse`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cq_chart_free(chart: *mut CqChart) {
    if !chart.is_null() {
        drop(Box::from_raw(chart));
    }
}

/// Reconstructs the chart's data table. Diagnostics are written as JSON
/// lines to `diagnostics` when it is not NULL (free with
/// [`cq_string_free`]).
///
/// # Safety
/// `chart` must be a live handle; `out` must be writable; `diagnostics` may
/// be NULL.
#[no_mangle]
pub unsafe extern "C" fn cq_extract_table(
    chart: *const CqChart,
    out: *mut *mut CqTable,
    diagnostics: *mut *mut c_char,
) -> CqStatus {
    guard(|| {
        if chart.is_null() || out.is_null() {
            return fail(CqStatus::NullPointer, "null chart or output pointer");
        }
        let e = try_ffi!(extract_table(&(*chart).spec).map_err(|e| fail(CqStatus::Extraction, e)));
        if !diagnostics.is_null() {
            let lines: Vec<String> = e.diagnostics.iter().map(|d| d.to_json_line("")).collect();
            *diagnostics = to_c(lines.join("\n"));
        }
        *out = Box::into_raw(Box::new(CqTable { table: e.table }));
        CqStatus::Ok
    })
}

/// Reads a table from CSV text (header row with an empty first cell).
///
/// # Safety
/// `csv` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cq_table_from_csv(csv: *const c_char, out: *mut *mut CqTable) -> CqStatus {
    guard(|| {
        if out.is_null() {
            return fail(CqStatus::NullPointer, "null output pointer");
        }
        let raw = try_ffi!(read_str(csv));
        let table = try_ffi!(DataTable::from_csv(raw).map_err(|e| fail(CqStatus::Parse, e)));
        *out = Box::into_raw(Box::new(CqTable { table }));
        CqStatus::Ok
    })
}

/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cq_table_to_csv(table: *const CqTable, out: *mut *mut c_char) -> CqStatus {
    guard(|| {
        if table.is_null() || out.is_null() {
            return fail(CqStatus::NullPointer, "null table or output pointer");
        }
        *out = to_c((*table).table.to_csv());
        CqStatus::Ok
    })
}

/// # Safety
/// `table` must be a live handle; `rows` and `cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cq_table_shape(table: *const CqTable, rows: *mut usize, cols: *mut usize) -> CqStatus {
    guard(|| {
        if table.is_null() || rows.is_null() || cols.is_null() {
            return fail(CqStatus::NullPointer, "null table or output pointer");
        }
        *rows = (*table).table.n_rows();
        *cols = (*table).table.n_cols();
        CqStatus::Ok
    })
}

/// Cell value; `present` is false for an empty cell.
///
/// # Safety
/// `table` must be a live handle; `value` and `present` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cq_table_cell(
    table: *const CqTable,
    row: usize,
    col: usize,
    value: *mut f64,
    present: *mut bool,
) -> CqStatus {
    guard(|| {
        if table.is_null() || value.is_null() || present.is_null() {
            return fail(CqStatus::NullPointer, "null table or output pointer");
        }
        let t = &(*table).table;
        if row >= t.n_rows() || col >= t.n_cols() {
            return fail(
                CqStatus::InvalidArgument,
                format!("cell ({row}, {col}) outside {}x{} table", t.n_rows(), t.n_cols()),
            );
        }
        let cell = t.cell(row, col);
        *present = cell.is_some();
        *value = cell.unwrap_or(0.0);
        CqStatus::Ok
    })
}

/// # Safety
/// `table` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cq_table_free(table: *mut CqTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Runs `op` (NONE, COUNT, SUM, AVERAGE, DIFFERENCE, RATIO, YES, NO) over
/// the `n` cells `(rows[i], cols[i])` and returns the answer text.
///
/// # Safety
/// `rows` and `cols` must point to `n` readable values (may be NULL when
/// `n` is 0); `op` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cq_execute(
    table: *const CqTable,
    op: *const c_char,
    rows: *const usize,
    cols: *const usize,
    n: usize,
    out: *mut *mut c_char,
) -> CqStatus {
    guard(|| {
        if table.is_null() || out.is_null() || (n > 0 && (rows.is_null() || cols.is_null())) {
            return fail(CqStatus::NullPointer, "null table, cell or output pointer");
        }
        let name = try_ffi!(read_str(op));
        let op = try_ffi!(AggregationOp::parse(name).ok_or_else(|| fail(CqStatus::InvalidArgument, format!("unknown op {name:?}"))));
        let cells: Vec<(usize, usize)> = if n == 0 {
            Vec::new()
        } else {
            let r = std::slice::from_raw_parts(rows, n);
            let c = std::slice::from_raw_parts(cols, n);
            r.iter().copied().zip(c.iter().copied()).collect()
        };
        let answer = try_ffi!(execute(op, &CellSelection::new(cells), &(*table).table).map_err(|e| fail(CqStatus::Execution, e)));
        *out = to_c(answer.to_string());
        CqStatus::Ok
    })
}

/// Relaxed answer match at relative tolerance `tol`.
///
/// # Safety
/// `pred` and `gold` must be NUL-terminated strings; `correct` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cq_relaxed_match(
    pred: *const c_char,
    gold: *const c_char,
    tol: f64,
    correct: *mut bool,
) -> CqStatus {
    guard(|| {
        if correct.is_null() {
            return fail(CqStatus::NullPointer, "null output pointer");
        }
        if !(tol.is_finite() && tol >= 0.0) {
            return fail(CqStatus::InvalidArgument, format!("tolerance {tol} must be >= 0"));
        }
        let (p, g) = (try_ffi!(read_str(pred)), try_ffi!(read_str(gold)));
        *correct = relaxed_match(p, g, tol).correct;
        CqStatus::Ok
    })
}

/// Loads a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cq_model_load(path: *const c_char, out: *mut *mut CqModel) -> CqStatus {
    guard(|| {
        if out.is_null() {
            return fail(CqStatus::NullPointer, "null output pointer");
        }
        let p = try_ffi!(read_str(path));
        let (model, vocab) = try_ffi!(load_checkpoint(Path::new(p)).map_err(|e| {
            let status = match e {
                chartqa::neural::NeuralError::Io(_) => CqStatus::Io,
                _ => CqStatus::Model,
            };
            fail(status, e)
        }));
        *out = Box::into_raw(Box::new(CqModel { model, vocab }));
        CqStatus::Ok
    })
}

/// Answers `question` about `chart` using `table` (for instance the
/// extracted one) and returns the answer text.
///
/// # Safety
/// All handles must be live; `question` must be a NUL-terminated string;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cq_model_answer(
    model: *const CqModel,
    chart: *const CqChart,
    table: *const CqTable,
    question: *const c_char,
    out: *mut *mut c_char,
) -> CqStatus {
    guard(|| {
        if model.is_null() || chart.is_null() || table.is_null() || out.is_null() {
            return fail(CqStatus::NullPointer, "null handle or output pointer");
        }
        let q = try_ffi!(read_str(question));
        let m = &*model;
        let t = &(*table).table;
        let raster = rasterize(&(*chart).spec, m.model.config().image_size);
        let input = try_ffi!(ModelInput::new(m.model.config(), &m.vocab, &raster, q, t).map_err(|e| fail(CqStatus::Model, e)));
        let output = try_ffi!(m.model.forward(&input).map_err(|e| fail(CqStatus::Model, e)));
        let p = try_ffi!(predict_answer(&output, t).map_err(|e| fail(CqStatus::Execution, e)));
        *out = to_c(p.answer.to_string());
        CqStatus::Ok
    })
}

/// # Safety
/// `model` must come from [`cq_model_load`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cq_model_free(model: *mut CqModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
