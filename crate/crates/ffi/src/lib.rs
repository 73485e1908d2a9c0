//! C ABI for `dkdv-core`.
//!
//! Every fallible function returns a [`DkdvStatus`] and writes its results
//! through out-pointers. On failure the message is kept per thread and read
//! with [`dkdv_last_error_message`]. Objects cross the boundary as opaque
//! handles owned by the caller and released with the matching `_free`.
//! Panics never unwind into C; they surface as `DKDV_STATUS_PANIC`.
//!
//! Pointer arguments must be NULL or valid for the access the function makes:
//! out-pointers writable, buffers at least the stated length, handles live
//! and obtained from this library. NULL is reported as
//! `DKDV_STATUS_NULL_POINTER`; anything else invalid is undefined behaviour.

#![allow(clippy::missing_safety_doc)]

use dkdv_core::balance::{monte_carlo_balance_with, BalanceOptions, BalanceReport, BalanceSpec};
use dkdv_core::dist::{sample, MarginalLaw};
use dkdv_core::maps::{f_dk, psi, MapParams, PositivePair};
use dkdv_core::matrix::{f_dk_matrix, SpdMatrix, SpdPair};
use dkdv_core::{specfun, Error};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status code of every fallible call; nonzero values mirror the core error kinds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DkdvStatus {
    Ok = 0,
    Domain = 1,
    Overflow = 2,
    Underflow = 3,
    IllConditioned = 4,
    NotPositiveDefinite = 5,
    Convergence = 6,
    Parse = 7,
    Io = 8,
    NullPointer = 9,
    Panic = 10,
}

impl From<&Error> for DkdvStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => DkdvStatus::Domain,
            Error::Overflow(_) => DkdvStatus::Overflow,
            Error::Underflow(_) => DkdvStatus::Underflow,
            Error::IllConditioned { .. } => DkdvStatus::IllConditioned,
            Error::NotPositiveDefinite(_) => DkdvStatus::NotPositiveDefinite,
            Error::Convergence(_) => DkdvStatus::Convergence,
            Error::Parse { .. } => DkdvStatus::Parse,
            Error::Io(_) => DkdvStatus::Io,
        }
    }
}

/// A GIG, Gamma or inverse-Gamma law.
pub struct DkdvLaw(MarginalLaw);

/// A symmetric positive-definite matrix.
pub struct DkdvSpd(SpdMatrix);

/// Result of a Monte-Carlo detailed-balance run.
pub struct DkdvReport(BalanceReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Core(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DkdvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DkdvStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            DkdvStatus::from(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            DkdvStatus::NullPointer
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DkdvStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller passes either NULL or a valid, writable pointer.
    unsafe { p.as_mut() }.ok_or(Failure::Null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: the caller passes either NULL or a live handle from this library.
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

unsafe fn boxed<T>(value: T, dst: *mut *mut T, what: &'static str) -> Result<(), Failure> {
    let slot = out(dst, what)?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failure on this thread ("" if none). The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dkdv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dkdv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `K_nu(z)` for `z > 0`.
#[no_mangle]
pub unsafe extern "C" fn dkdv_bessel_k(nu: f64, z: f64, result: *mut f64) -> DkdvStatus {
    guard(|| {
        *out(result, "result")? = specfun::bessel_k(nu, z)?;
        Ok(())
    })
}

/// `I_nu(z)` for `z > 0`.
#[no_mangle]
pub unsafe extern "C" fn dkdv_bessel_i(nu: f64, z: f64, result: *mut f64) -> DkdvStatus {
    guard(|| {
        *out(result, "result")? = specfun::bessel_i(nu, z)?;
        Ok(())
    })
}

/// Image of `(x, y)` under `F_dK^(alpha, beta)`, or under `psi` when `use_psi`.
#[no_mangle]
pub unsafe extern "C" fn dkdv_map_eval(
    alpha: f64,
    beta: f64,
    x: f64,
    y: f64,
    use_psi: bool,
    u: *mut f64,
    v: *mut f64,
) -> DkdvStatus {
    guard(|| {
        let p = MapParams::new(alpha, beta)?;
        let xy = PositivePair::new(x, y)?;
        let img = if use_psi { psi(p, xy) } else { f_dk(p, xy) };
        let (u, v) = (out(u, "u")?, out(v, "v")?);
        (*u, *v) = (img.first, img.second);
        Ok(())
    })
}

/// GIG(lambda, a, b).
#[no_mangle]
pub unsafe extern "C" fn dkdv_law_gig(
    lambda: f64,
    a: f64,
    b: f64,
    law: *mut *mut DkdvLaw,
) -> DkdvStatus {
    guard(|| boxed(DkdvLaw(MarginalLaw::gig(lambda, a, b)?), law, "law"))
}

/// Gamma(lambda, a) with rate `a`.
#[no_mangle]
pub unsafe extern "C" fn dkdv_law_gamma(lambda: f64, a: f64, law: *mut *mut DkdvLaw) -> DkdvStatus {
    guard(|| boxed(DkdvLaw(MarginalLaw::gamma(lambda, a)?), law, "law"))
}

/// InvGamma(lambda, b) with scale `b`.
#[no_mangle]
pub unsafe extern "C" fn dkdv_law_inv_gamma(
    lambda: f64,
    b: f64,
    law: *mut *mut DkdvLaw,
) -> DkdvStatus {
    guard(|| boxed(DkdvLaw(MarginalLaw::inv_gamma(lambda, b)?), law, "law"))
}

/// Releases a law; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn dkdv_law_free(law: *mut DkdvLaw) {
    if !law.is_null() {
        // SAFETY: non-null handles come from Box::into_raw in this library.
        drop(unsafe { Box::from_raw(law) });
    }
}

#[no_mangle]
pub unsafe extern "C" fn dkdv_law_log_pdf(
    law: *const DkdvLaw,
    x: f64,
    result: *mut f64,
) -> DkdvStatus {
    guard(|| {
        *out(result, "result")? = handle(law, "law")?.0.log_pdf(x)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dkdv_law_cdf(law: *const DkdvLaw, x: f64, result: *mut f64) -> DkdvStatus {
    guard(|| {
        *out(result, "result")? = handle(law, "law")?.0.cdf(x)?;
        Ok(())
    })
}

/// Writes `n` seeded draws into `buffer` (room for `n` doubles).
#[no_mangle]
pub unsafe extern "C" fn dkdv_law_sample(
    law: *const DkdvLaw,
    seed: u64,
    n: usize,
    buffer: *mut f64,
) -> DkdvStatus {
    guard(|| {
        let law = handle(law, "law")?;
        if buffer.is_null() {
            return Err(Failure::Null("buffer"));
        }
        let xs = sample(&law.0, seed, n)?;
        // SAFETY: the caller guarantees room for n doubles at buffer.
        unsafe { std::slice::from_raw_parts_mut(buffer, n) }.copy_from_slice(&xs);
        Ok(())
    })
}

/// SPD matrix from `r*r` row-major entries.
#[no_mangle]
pub unsafe extern "C" fn dkdv_spd_new(
    r: usize,
    row_major: *const f64,
    spd: *mut *mut DkdvSpd,
) -> DkdvStatus {
    guard(|| {
        if row_major.is_null() {
            return Err(Failure::Null("row_major"));
        }
        // SAFETY: the caller guarantees r*r readable doubles.
        let data = unsafe { std::slice::from_raw_parts(row_major, r * r) };
        boxed(DkdvSpd(SpdMatrix::from_row_slice(r, data)?), spd, "spd")
    })
}

#[no_mangle]
pub unsafe extern "C" fn dkdv_spd_free(spd: *mut DkdvSpd) {
    if !spd.is_null() {
        // SAFETY: non-null handles come from Box::into_raw in this library.
        drop(unsafe { Box::from_raw(spd) });
    }
}

/// Dimension `r`, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn dkdv_spd_dim(spd: *const DkdvSpd) -> usize {
    // SAFETY: NULL or a live handle.
    unsafe { spd.as_ref() }.map_or(0, |s| s.0.dim())
}

/// Copies the `r*r` row-major entries into `buffer`.
#[no_mangle]
pub unsafe extern "C" fn dkdv_spd_entries(spd: *const DkdvSpd, buffer: *mut f64) -> DkdvStatus {
    guard(|| {
        let m = handle(spd, "spd")?;
        if buffer.is_null() {
            return Err(Failure::Null("buffer"));
        }
        let vals = m.0.row_major();
        // SAFETY: the caller guarantees room for r*r doubles.
        unsafe { std::slice::from_raw_parts_mut(buffer, vals.len()) }.copy_from_slice(&vals);
        Ok(())
    })
}

/// Matrix `F_dK^(alpha, beta)(x, y) = (u, v)`; `u` and `v` are new handles.
#[no_mangle]
pub unsafe extern "C" fn dkdv_matrix_map(
    alpha: f64,
    beta: f64,
    x: *const DkdvSpd,
    y: *const DkdvSpd,
    u: *mut *mut DkdvSpd,
    v: *mut *mut DkdvSpd,
) -> DkdvStatus {
    guard(|| {
        let pair = SpdPair::new(handle(x, "x")?.0.clone(), handle(y, "y")?.0.clone())?;
        let img = f_dk_matrix(MapParams::new(alpha, beta)?, &pair)?;
        let (us, vs) = (out(u, "u")?, out(v, "v")?);
        *us = Box::into_raw(Box::new(DkdvSpd(img.x)));
        *vs = Box::into_raw(Box::new(DkdvSpd(img.y)));
        Ok(())
    })
}

/// Scalar detailed-balance run: `variant` 0 for `F_dK`, 1 for `psi`.
#[no_mangle]
pub unsafe extern "C" fn dkdv_balance_verify(
    variant: u32,
    alpha: f64,
    beta: f64,
    c1: f64,
    c2: f64,
    lambda: f64,
    seed: u64,
    n: usize,
    permutations: usize,
    report: *mut *mut DkdvReport,
) -> DkdvStatus {
    guard(|| {
        let spec = match variant {
            0 => BalanceSpec::scalar_fdk(alpha, beta, c1, c2, lambda)?,
            1 => BalanceSpec::scalar_psi(alpha, beta, c1, c2, lambda)?,
            other => return Err(Error::Domain(format!("unknown variant {other}")).into()),
        };
        let opts = BalanceOptions {
            permutations,
            ..BalanceOptions::default()
        };
        boxed(
            DkdvReport(monte_carlo_balance_with(&spec, seed, n, opts)?),
            report,
            "report",
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn dkdv_report_free(report: *mut DkdvReport) {
    if !report.is_null() {
        // SAFETY: non-null handles come from Box::into_raw in this library.
        drop(unsafe { Box::from_raw(report) });
    }
}

/// Overall verdict of a report.
#[no_mangle]
pub unsafe extern "C" fn dkdv_report_pass(
    report: *const DkdvReport,
    pass: *mut bool,
) -> DkdvStatus {
    guard(|| {
        *out(pass, "pass")? = handle(report, "report")?.0.pass;
        Ok(())
    })
}

/// The report as a JSON string, released with [`dkdv_string_free`].
#[no_mangle]
pub unsafe extern "C" fn dkdv_report_json(
    report: *const DkdvReport,
    json: *mut *mut c_char,
) -> DkdvStatus {
    guard(|| {
        let text = serde_json::to_string(&handle(report, "report")?.0)
            .map_err(|e| Error::Io(e.to_string()))?;
        *out(json, "json")? = CString::new(text).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn dkdv_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: non-null strings come from CString::into_raw in this library.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Last error on this thread as an owned Rust string (for Rust callers and tests).
pub fn last_error() -> String {
    // SAFETY: the pointer refers to the thread-local CString.
    unsafe { CStr::from_ptr(dkdv_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}
