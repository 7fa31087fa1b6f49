//! C ABI over the feature extractor and PLS1 regression.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free`. Every fallible call returns a [`DcStatus`].
//! On failure, [`dc_last_error_message`] describes the most recent error on
//! the calling thread. Matrices are dense row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use deepchem::image::{prepare, NormalizationStats, RasterImage};
use deepchem::net::{build_resnet18, load_archive, NetworkGraph, Tap, INPUT_DIMS};
use deepchem::pls::{cross_validate_matrix, decode_model, encode_model, FoldSpec, PlsModel};
use nalgebra::DMatrix;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Compute = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// A loaded network plus the archive's normalization constants.
pub struct DcGraph {
    graph: NetworkGraph,
    stats: NormalizationStats,
}

/// A fitted PLS1 model.
pub struct DcPlsModel {
    model: PlsModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: DcStatus, msg: impl Into<String>) -> DcStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> DcStatus) -> DcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == DcStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(DcStatus::Panic, "internal panic"),
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, DcStatus> {
    if p.is_null() {
        return Err(fail(DcStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(DcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], DcStatus> {
    if p.is_null() {
        return Err(fail(DcStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], DcStatus> {
    if p.is_null() {
        return Err(fail(DcStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn matrix(x: *const f64, n: usize, p: usize) -> Result<DMatrix<f64>, DcStatus> {
    let len = n.checked_mul(p).ok_or_else(|| fail(DcStatus::InvalidArgument, "n * p overflows"))?;
    let data = slice(x, len, "x")?;
    if data.iter().any(|v| !v.is_finite()) {
        return Err(fail(DcStatus::InvalidArgument, "x contains a non-finite value"));
    }
    Ok(DMatrix::from_row_slice(n, p, data))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Library version as a static NUL-terminated string.
#[unsafe(no_mangle)]
pub extern "C" fn dc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the same
/// thread.
#[unsafe(no_mangle)]
pub extern "C" fn dc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Feature length of a tap name, or 0 for an unknown tap.
///
/// # Safety
/// `tap` must be null or a valid NUL-terminated string.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn dc_tap_len(tap: *const c_char) -> usize {
    c_str(tap, "tap").ok().and_then(|t| t.parse::<Tap>().ok()).map_or(0, Tap::feature_len)
}

/// Loads an `NNW1` archive and builds the network.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn dc_graph_load(path: *const c_char, out: *mut *mut DcGraph) -> DcStatus {
    guard(|| {
        if out.is_null() {
            return fail(DcStatus::NullPointer, "out is null");
        }
        *out = std::ptr::null_mut();
        let path = tri!(c_str(path, "path"));
        let bytes = match std::fs::read(Path::new(path)) {
            Ok(b) => b,
            Err(e) => return fail(DcStatus::Io, format!("{path}: {e}")),
        };
        let archive = match load_archive(&bytes) {
            Ok(a) => a,
            Err(e) => return fail(DcStatus::Format, e.to_string()),
        };
        let stats = match archive.normalization_stats() {
            Ok(s) => s,
            Err(e) => return fail(DcStatus::Format, e.to_string()),
        };
        match build_resnet18(&archive) {
            Ok(graph) => {
                *out = Box::into_raw(Box::new(DcGraph { graph, stats }));
                DcStatus::Ok
            }
            Err(e) => fail(DcStatus::Format, e.to_string()),
        }
    })
}

/// # Safety
/// `graph` must be null or a handle from [`dc_graph_load`] not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn dc_graph_free(graph: *mut DcGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Resizes and normalizes an interleaved 8-bit RGB image, runs the network
/// to `tap` and writes the flattened activations into `out`.
///
/// # Safety
/// `rgb` must hold `3 * width * height` bytes; `out` must hold `out_len`
/// floats; `tap` must be a NUL-terminated string.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn dc_extract(
    graph: *const DcGraph,
    rgb: *const u8,
    width: usize,
    height: usize,
    tap: *const c_char,
    out: *mut f32,
    out_len: usize,
) -> DcStatus {
    guard(|| {
        let Some(g) = graph.as_ref() else { return fail(DcStatus::NullPointer, "graph is null") };
        let tap: Tap = match tri!(c_str(tap, "tap")).parse() {
            Ok(t) => t,
            Err(e) => return fail(DcStatus::InvalidArgument, format!("{e}")),
        };
        if out_len < tap.feature_len() {
            return fail(DcStatus::BufferTooSmall, format!("tap {tap} needs {} floats", tap.feature_len()));
        }
        let out = tri!(slice_mut(out, out_len, "out"));
        let Some(len) = width.checked_mul(height).and_then(|v| v.checked_mul(3)) else {
            return fail(DcStatus::InvalidArgument, "image size overflows");
        };
        let pixels = tri!(slice(rgb, len, "rgb")).to_vec();
        let img = match RasterImage::new(width, height, pixels) {
            Ok(i) => i,
            Err(e) => return fail(DcStatus::InvalidArgument, e.to_string()),
        };
        let input = match prepare(&img, &g.stats, INPUT_DIMS.1) {
            Ok(t) => t,
            Err(e) => return fail(DcStatus::InvalidArgument, e.to_string()),
        };
        match g.graph.forward(&input, tap) {
            Ok(f) => {
                out[..f.values.len()].copy_from_slice(&f.values);
                DcStatus::Ok
            }
            Err(e) => fail(DcStatus::Compute, e.to_string()),
        }
    })
}

/// Fits PLS1 on row-major `x` (n x p) and `y` (n).
///
/// # Safety
/// `x` must hold `n * p` doubles, `y` must hold `n`; `out` must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn dc_pls_fit(
    x: *const f64,
    n: usize,
    p: usize,
    y: *const f64,
    n_lv: usize,
    out: *mut *mut DcPlsModel,
) -> DcStatus {
    guard(|| {
        if out.is_null() {
            return fail(DcStatus::NullPointer, "out is null");
        }
        *out = std::ptr::null_mut();
        let x = tri!(matrix(x, n, p));
        let y = tri!(slice(y, n, "y"));
        match PlsModel::fit(&x, y, n_lv) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(DcPlsModel { model }));
                DcStatus::Ok
            }
            Err(e) => fail(DcStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Achieved number of latent variables, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn dc_pls_n_lv(model: *const DcPlsModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.n_lv())
}

/// Predicts `n` rows of row-major `x` (n x p) into `out`.
///
/// # Safety
/// `x` must hold `n * p` doubles; `out` must hold `out_len` doubles.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn dc_pls_predict(
    model: *const DcPlsModel,
    x: *const f64,
    n: usize,
    p: usize,
    out: *mut f64,
    out_len: usize,
) -> DcStatus {
    guard(|| {
        let Some(m) = model.as_ref() else { return fail(DcStatus::NullPointer, "model is null") };
        if out_len < n {
            return fail(DcStatus::BufferTooSmall, format!("need {n} doubles"));
        }
        let out = tri!(slice_mut(out, out_len, "out"));
        let x = tri!(matrix(x, n, p));
        match m.model.predict(&x) {
            Ok(v) => {
                out[..n].copy_from_slice(&v);
                DcStatus::Ok
            }
            Err(e) => fail(DcStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Cross-validated RMSECV for orders `1..=a_max` into `rmsecv_out`.
/// `k = 0` selects leave-one-out; otherwise seeded k-fold.
///
/// # Safety
/// `x` must hold `n * p` doubles, `y` must hold `n`; `rmsecv_out` must hold
/// `out_len` doubles.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn dc_pls_cv(
    x: *const f64,
    n: usize,
    p: usize,
    y: *const f64,
    a_max: usize,
    k: usize,
    seed: u64,
    rmsecv_out: *mut f64,
    out_len: usize,
) -> DcStatus {
    guard(|| {
        if out_len < a_max {
            return fail(DcStatus::BufferTooSmall, format!("need {a_max} doubles"));
        }
        let out = tri!(slice_mut(rmsecv_out, out_len, "rmsecv_out"));
        let x = tri!(matrix(x, n, p));
        let y = tri!(slice(y, n, "y"));
        let spec = if k == 0 { FoldSpec::LeaveOneOut } else { FoldSpec::KFold { k, seed } };
        match cross_validate_matrix(&x, y, a_max, spec) {
            Ok(c) => {
                out[..a_max].copy_from_slice(c.rmsecv());
                DcStatus::Ok
            }
            Err(e) => fail(DcStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Writes the model as a `PLS1` file.
///
/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn dc_pls_save(model: *const DcPlsModel, path: *const c_char) -> DcStatus {
    guard(|| {
        let Some(m) = model.as_ref() else { return fail(DcStatus::NullPointer, "model is null") };
        let path = tri!(c_str(path, "path"));
        match deepchem::io::write_atomic(Path::new(path), &encode_model(&m.model)) {
            Ok(()) => DcStatus::Ok,
            Err(e) => fail(DcStatus::Io, format!("{path}: {e}")),
        }
    })
}

/// Reads a `PLS1` file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn dc_pls_load(path: *const c_char, out: *mut *mut DcPlsModel) -> DcStatus {
    guard(|| {
        if out.is_null() {
            return fail(DcStatus::NullPointer, "out is null");
        }
        *out = std::ptr::null_mut();
        let path = tri!(c_str(path, "path"));
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) => return fail(DcStatus::Io, format!("{path}: {e}")),
        };
        match decode_model(&bytes) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(DcPlsModel { model }));
                DcStatus::Ok
            }
            Err(e) => fail(DcStatus::Format, e.to_string()),
        }
    })
}

/// # Safety
/// `model` must be null or a live handle not yet freed.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn dc_pls_free(model: *mut DcPlsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
