//! C ABI for `lagdnn`.
//!
//! Problems and results are opaque heap handles released with their
//! `_free` functions. Every fallible call returns a [`LagdnnStatus`]; on
//! failure the message is available from [`lagdnn_last_error`] on the same
//! thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;
use std::time::Duration;

use lagdnn::apg::ApgStatus;
use lagdnn::bracket::{solve_1d, BracketParams, BracketResult, BracketStatus, CopEvaluator, Method};
use lagdnn::io::{read_instance, result_to_json, Instance, ResultRecord, RunSettings};
use lagdnn::model::{build_bqop, build_dnn, build_qap, lagrangian, qap_tight_rho, Rho};
use lagdnn::nalgebra::DMatrix;
use lagdnn::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LagdnnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    Numerical = 5,
    /// The run stopped on its time limit or outer-iteration budget. The
    /// result handle is still produced and holds a valid bound.
    Partial = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LagdnnMethod {
    Bisection = 0,
    Newton = 1,
    Secant = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LagdnnRhoMode {
    /// One plus the number of variables; requires every variable binary.
    Auto = 0,
    /// One plus the QAP size. QAP problems only.
    QapTight = 1,
    /// Use `LagdnnParams::rho`.
    Value = 2,
}

/// Solver settings. Obtain defaults from [`lagdnn_params_default`].
/// `y0`, `y1` and `lb0` are ignored when NaN; `time_limit` when not positive.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct LagdnnParams {
    pub method: LagdnnMethod,
    pub lambda: f64,
    pub rho_mode: LagdnnRhoMode,
    pub rho: f64,
    pub delta: f64,
    pub eps: f64,
    pub tol: f64,
    pub alpha: f64,
    pub max_apg_iter: usize,
    pub max_outer: usize,
    pub y0: f64,
    pub y1: f64,
    pub lb0: f64,
    /// Seconds.
    pub time_limit: f64,
}

/// One outer iteration.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct LagdnnTraceEntry {
    pub y: f64,
    pub g: f64,
    pub lb_valid: f64,
    pub apg_iters: usize,
    /// 0 converged, 1 zero X, 2 not converged.
    pub apg_status: c_int,
}

/// Opaque problem handle.
pub struct LagdnnProblem {
    name: String,
    inst: Instance,
    negate: bool,
}

/// Opaque result handle.
pub struct LagdnnResult {
    res: BracketResult,
    record: ResultRecord,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: LagdnnStatus, msg: impl Into<String>) -> LagdnnStatus {
    set_error(msg);
    status
}

fn from_error(e: &Error) -> LagdnnStatus {
    let status = match e {
        Error::Parse { .. } => LagdnnStatus::Parse,
        Error::Io(_) => LagdnnStatus::Io,
        Error::Numerical(_) | Error::NotConverged { .. } => LagdnnStatus::Numerical,
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::TooLarge { .. } => {
            LagdnnStatus::InvalidArgument
        }
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> LagdnnStatus) -> LagdnnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(LagdnnStatus::Panic, "internal panic"),
    }
}

/// Message for the most recent failure on this thread, or NULL. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn lagdnn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lagdnn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn lagdnn_params_default() -> LagdnnParams {
    let p = BracketParams::default();
    LagdnnParams {
        method: LagdnnMethod::Secant,
        lambda: lagdnn::model::DEFAULT_LAMBDA,
        rho_mode: LagdnnRhoMode::Auto,
        rho: 0.0,
        delta: p.delta,
        eps: p.eps,
        tol: p.apg.tol,
        alpha: p.alpha,
        max_apg_iter: p.apg.max_iter,
        max_outer: p.max_outer,
        y0: f64::NAN,
        y1: f64::NAN,
        lb0: f64::NAN,
        time_limit: 0.0,
    }
}

unsafe fn square(data: *const f64, r: usize) -> Result<DMatrix<f64>, LagdnnStatus> {
    if data.is_null() {
        return Err(fail(LagdnnStatus::NullPointer, "matrix pointer is NULL"));
    }
    if r == 0 {
        return Err(fail(LagdnnStatus::InvalidArgument, "size must be at least 1"));
    }
    let n = r
        .checked_mul(r)
        .ok_or_else(|| fail(LagdnnStatus::InvalidArgument, "size overflows"))?;
    // SAFETY: the caller guarantees `r * r` readable doubles.
    let s = unsafe { std::slice::from_raw_parts(data, n) };
    Ok(DMatrix::from_row_slice(r, r, s))
}

fn emit(out: *mut *mut LagdnnProblem, p: LagdnnProblem) -> LagdnnStatus {
    // SAFETY: checked non-null by every caller.
    unsafe { *out = Box::into_raw(Box::new(p)) };
    LagdnnStatus::Ok
}

/// Binary QP `min v^T F v` (or `max` when `maximize` is nonzero) from a
/// row-major `r x r` symmetric matrix.
///
/// # Safety
/// `f` must point to `r * r` doubles and `out` to writable storage for a
/// handle pointer.
#[no_mangle]
pub unsafe extern "C" fn lagdnn_problem_bqp(
    f: *const f64,
    r: usize,
    maximize: c_int,
    out: *mut *mut LagdnnProblem,
) -> LagdnnStatus {
    guard(|| {
        if out.is_null() {
            return fail(LagdnnStatus::NullPointer, "out is NULL");
        }
        let f = match unsafe { square(f, r) } {
            Ok(m) => m,
            Err(s) => return s,
        };
        if f != f.transpose() {
            return fail(LagdnnStatus::InvalidArgument, "F must be symmetric");
        }
        emit(
            out,
            LagdnnProblem {
                name: "bqp".into(),
                inst: Instance::Bqop(f),
                negate: maximize != 0,
            },
        )
    })
}

/// QAP with flow `a` and distance `b`, both row-major `r x r`.
///
/// # Safety
/// `a` and `b` must each point to `r * r` doubles and `out` to writable
/// storage for a handle pointer.
#[no_mangle]
pub unsafe extern "C" fn lagdnn_problem_qap(
    a: *const f64,
    b: *const f64,
    r: usize,
    out: *mut *mut LagdnnProblem,
) -> LagdnnStatus {
    guard(|| {
        if out.is_null() {
            return fail(LagdnnStatus::NullPointer, "out is NULL");
        }
        let (a, b) = match unsafe { (square(a, r), square(b, r)) } {
            (Ok(a), Ok(b)) => (a, b),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        emit(
            out,
            LagdnnProblem {
                name: "qap".into(),
                inst: Instance::Qap(a, b),
                negate: false,
            },
        )
    })
}

/// Reads a BIQMAC or QAPLIB file, detecting the format. BIQMAC data is
/// maximized, as in the library.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable storage for a
/// handle pointer.
#[no_mangle]
pub unsafe extern "C" fn lagdnn_problem_read(path: *const c_char, out: *mut *mut LagdnnProblem) -> LagdnnStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(LagdnnStatus::NullPointer, "path or out is NULL");
        }
        // SAFETY: caller guarantees a NUL-terminated string.
        let Ok(path) = unsafe { CStr::from_ptr(path) }.to_str() else {
            return fail(LagdnnStatus::InvalidArgument, "path is not UTF-8");
        };
        let path = Path::new(path);
        match read_instance(path, None) {
            Ok((_, inst)) => emit(
                out,
                LagdnnProblem {
                    name: path
                        .file_stem()
                        .map_or_else(|| "instance".into(), |s| s.to_string_lossy().into_owned()),
                    inst,
                    negate: true,
                },
            ),
            Err(e) => from_error(&e),
        }
    })
}

/// Problem size `r`, or 0 for NULL.
///
/// # Safety
/// `p` must be NULL or a live problem handle.
#[no_mangle]
pub unsafe extern "C" fn lagdnn_problem_size(p: *const LagdnnProblem) -> usize {
    // SAFETY: caller contract.
    unsafe { p.as_ref() }.map_or(0, |p| p.inst.size())
}

/// # Safety
/// `p` must be NULL or a handle from a `lagdnn_problem_*` constructor that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn lagdnn_problem_free(p: *mut LagdnnProblem) {
    if !p.is_null() {
        // SAFETY: caller contract; the handle came from Box::into_raw.
        drop(unsafe { Box::from_raw(p) });
    }
}

fn opt(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

fn run(p: &LagdnnProblem, c: &LagdnnParams) -> Result<LagdnnResult, Error> {
    let (model, r, is_qap) = match &p.inst {
        Instance::Bqop(f) => (build_bqop(f, p.negate)?, f.nrows(), false),
        Instance::Qap(a, b) => (build_qap(a, b)?, a.nrows(), true),
    };
    let rho = match c.rho_mode {
        LagdnnRhoMode::Auto => Rho::Auto,
        LagdnnRhoMode::Value => Rho::Value(c.rho),
        LagdnnRhoMode::QapTight if is_qap => Rho::Value(qap_tight_rho(r)),
        LagdnnRhoMode::QapTight => return Err(Error::InvalidArgument("QAP-tight rho needs a QAP problem".into())),
    };
    let cop = lagrangian(Arc::new(build_dnn(&model)?), c.lambda, rho)?;
    let mut params = BracketParams {
        delta: c.delta,
        eps: c.eps,
        alpha: c.alpha,
        y0: opt(c.y0),
        y1: opt(c.y1),
        lb0: opt(c.lb0),
        max_outer: c.max_outer,
        time_limit: (c.time_limit > 0.0 && c.time_limit.is_finite()).then(|| Duration::from_secs_f64(c.time_limit)),
        ..BracketParams::default()
    };
    params.apg.tol = c.tol;
    params.apg.eps = c.eps;
    params.apg.max_iter = c.max_apg_iter;
    let method = match c.method {
        LagdnnMethod::Bisection => Method::Bisection,
        LagdnnMethod::Newton => Method::Newton,
        LagdnnMethod::Secant => Method::Secant,
    };
    let mut ev = CopEvaluator::new(&cop, params.apg.clone());
    let res = solve_1d(&mut ev, method, &params)?;
    let settings = RunSettings {
        lambda: cop.lambda,
        rho: cop.rho,
        delta: c.delta,
        eps: c.eps,
        tol: c.tol,
    };
    let record = ResultRecord::new(p.name.clone(), r, &res, settings);
    Ok(LagdnnResult { res, record })
}

/// Computes a certified lower bound. On `Ok` or `Partial`, `*out` receives
/// a result handle; otherwise it is set to NULL.
///
/// # Safety
/// `p` must be a live problem handle, `params` NULL (defaults) or a valid
/// pointer, and `out` writable storage for a handle pointer.
#[no_mangle]
pub unsafe extern "C" fn lagdnn_solve(
    p: *const LagdnnProblem,
    params: *const LagdnnParams,
    out: *mut *mut LagdnnResult,
) -> LagdnnStatus {
    guard(|| {
        if p.is_null() || out.is_null() {
            return fail(LagdnnStatus::NullPointer, "problem or out is NULL");
        }
        // SAFETY: non-null, caller contract.
        unsafe { *out = ptr::null_mut() };
        let params = unsafe { params.as_ref() }.copied().unwrap_or_else(|| lagdnn_params_default());
        match run(unsafe { &*p }, &params) {
            Ok(r) => {
                let status = match r.res.status {
                    BracketStatus::Converged => LagdnnStatus::Ok,
                    s => fail(LagdnnStatus::Partial, format!("stopped early: {s:?}")),
                };
                unsafe { *out = Box::into_raw(Box::new(r)) };
                status
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Certified lower bound (NaN for NULL).
///
/// # Safety
/// `res` must be NULL or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn lagdnn_result_lb_valid(res: *const LagdnnResult) -> f64 {
    // SAFETY: caller contract.
    let Some(r) = (unsafe { res.as_ref() }) else { return f64::NAN };
    r.res.lb_valid
}

/// Last probed Lagrangian parameter (NaN for NULL).
///
/// # Safety
/// `res` must be NULL or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn lagdnn_result_y_final(res: *const LagdnnResult) -> f64 {
    // SAFETY: caller contract.
    let Some(r) = (unsafe { res.as_ref() }) else { return f64::NAN };
    r.res.y_final
}

/// # Safety
/// `res` must be NULL or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn lagdnn_result_outer_iters(res: *const LagdnnResult) -> usize {
    // SAFETY: caller contract.
    let Some(r) = (unsafe { res.as_ref() }) else { return 0 };
    r.res.outer_iters()
}

/// # Safety
/// `res` must be NULL or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn lagdnn_result_total_apg_iters(res: *const LagdnnResult) -> usize {
    // SAFETY: caller contract.
    let Some(r) = (unsafe { res.as_ref() }) else { return 0 };
    r.res.total_apg_iters
}

/// Seconds.
///
/// # Safety
/// `res` must be NULL or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn lagdnn_result_wall_time(res: *const LagdnnResult) -> f64 {
    // SAFETY: caller contract.
    let Some(r) = (unsafe { res.as_ref() }) else { return f64::NAN };
    r.res.wall_time.as_secs_f64()
}

/// 0 converged, 1 outer budget exhausted, 2 time limit, -1 for NULL.
///
/// # Safety
/// `res` must be NULL or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn lagdnn_result_status(res: *const LagdnnResult) -> c_int {
    // SAFETY: caller contract.
    let Some(r) = (unsafe { res.as_ref() }) else { return -1 };
    match r.res.status {
        BracketStatus::Converged => 0,
        BracketStatus::MaxOuter => 1,
        BracketStatus::TimeLimit => 2,
    }
}

/// Copies trace entry `k` into `*entry`.
///
/// # Safety
/// `res` must be a live result handle and `entry` writable.
#[no_mangle]
pub unsafe extern "C" fn lagdnn_result_trace(
    res: *const LagdnnResult,
    k: usize,
    entry: *mut LagdnnTraceEntry,
) -> LagdnnStatus {
    guard(|| {
        // SAFETY: caller contract.
        let (Some(r), false) = (unsafe { res.as_ref() }, entry.is_null()) else {
            return fail(LagdnnStatus::NullPointer, "result or entry is NULL");
        };
        let Some(t) = r.res.trace.get(k) else {
            return fail(LagdnnStatus::InvalidArgument, format!("trace index {k} out of range"));
        };
        let e = LagdnnTraceEntry {
            y: t.y,
            g: t.g,
            lb_valid: t.lb_valid,
            apg_iters: t.apg_iters,
            apg_status: match t.status {
                ApgStatus::Converged => 0,
                ApgStatus::ZeroX => 1,
                ApgStatus::NotConverged => 2,
            },
        };
        unsafe { *entry = e };
        LagdnnStatus::Ok
    })
}

/// Result as one JSON line. Release with [`lagdnn_string_free`].
///
/// # Safety
/// `res` must be a live result handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lagdnn_result_json(res: *const LagdnnResult, out: *mut *mut c_char) -> LagdnnStatus {
    guard(|| {
        // SAFETY: caller contract.
        let (Some(r), false) = (unsafe { res.as_ref() }, out.is_null()) else {
            return fail(LagdnnStatus::NullPointer, "result or out is NULL");
        };
        match result_to_json(&r.record) {
            Ok(s) => {
                let c = CString::new(s).expect("JSON has no NUL bytes");
                unsafe { *out = c.into_raw() };
                LagdnnStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lagdnn_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: caller contract; allocated by CString::into_raw.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// # Safety
/// `r` must be NULL or a handle from [`lagdnn_solve`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn lagdnn_result_free(r: *mut LagdnnResult) {
    if !r.is_null() {
        // SAFETY: caller contract.
        drop(unsafe { Box::from_raw(r) });
    }
}
