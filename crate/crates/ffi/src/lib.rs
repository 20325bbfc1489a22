//! C ABI for `prandtl-core`.
//!
//! Objects are opaque handles created by `prandtl_geometry_*` and
//! `prandtl_solve` and released with the matching `*_free`. Fallible calls return a
//! [`PrandtlStatus`]; the message of the last failure on the calling thread
//! is available from [`prandtl_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use prandtl_core::discretization::Grid;
use prandtl_core::geometry::{custom_geometry, disk_geometry, ellipse_geometry};
use prandtl_core::iteration::{fl_leading, wood_disk};
use prandtl_core::{picard_solve, BoundaryGeometry, Error, PicardOptions, PicardSolution, SlipForcing};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrandtlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGeometry = 3,
    Parabolicity = 4,
    Compatibility = 5,
    StagnantLayer = 6,
    NotConverged = 7,
    OracleFailure = 8,
    Io = 9,
    BufferTooSmall = 10,
    Panic = 11,
    Internal = 12,
}

impl From<&Error> for PrandtlStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidGeometry(_) | Error::SlipVanishes { .. } | Error::NonMonotoneMap { .. } => {
                PrandtlStatus::InvalidGeometry
            }
            Error::InvalidGrid(_) | Error::LengthMismatch { .. } | Error::Config(_) | Error::Parse(_) => {
                PrandtlStatus::InvalidArgument
            }
            Error::CollarTooWide { .. } | Error::ZeroWavenumber => PrandtlStatus::InvalidArgument,
            Error::Parabolicity { .. } => PrandtlStatus::Parabolicity,
            Error::Compatibility { .. } => PrandtlStatus::Compatibility,
            Error::StagnantLayer { .. } => PrandtlStatus::StagnantLayer,
            Error::NotConverged { .. } => PrandtlStatus::NotConverged,
            Error::NoContraction { .. } | Error::NoSignChange { .. } | Error::NonMonotoneDrift(_) => {
                PrandtlStatus::OracleFailure
            }
            Error::Io(_) => PrandtlStatus::Io,
            Error::NegativeDiscriminant(_) | Error::InconsistentState(_) => PrandtlStatus::Internal,
        }
    }
}

/// Boundary data: arc-length grid and Euler slip `q_e`.
pub struct PrandtlGeometry {
    inner: BoundaryGeometry,
}

/// A converged boundary layer.
pub struct PrandtlSolution {
    inner: PicardSolution,
}

/// Solver settings; obtain defaults from [`prandtl_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PrandtlOptions {
    pub n_psi: usize,
    pub psi_max: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub compat_tol: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), (PrandtlStatus, String)>) -> PrandtlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PrandtlStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside prandtl".into());
            PrandtlStatus::Panic
        }
    }
}

fn fail(e: Error) -> (PrandtlStatus, String) {
    (PrandtlStatus::from(&e), e.to_string())
}

fn null(what: &str) -> (PrandtlStatus, String) {
    (PrandtlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], (PrandtlStatus, String)> {
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

fn put_geometry(out: *mut *mut PrandtlGeometry, g: prandtl_core::Result<BoundaryGeometry>) -> PrandtlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = g.map_err(fail)?;
        unsafe { *out = Box::into_raw(Box::new(PrandtlGeometry { inner })) };
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn prandtl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn prandtl_status_name(status: PrandtlStatus) -> *const c_char {
    let s: &'static std::ffi::CStr = match status {
        PrandtlStatus::Ok => c"ok",
        PrandtlStatus::NullPointer => c"null_pointer",
        PrandtlStatus::InvalidArgument => c"invalid_argument",
        PrandtlStatus::InvalidGeometry => c"invalid_geometry",
        PrandtlStatus::Parabolicity => c"parabolicity",
        PrandtlStatus::Compatibility => c"compatibility",
        PrandtlStatus::StagnantLayer => c"stagnant_layer",
        PrandtlStatus::NotConverged => c"not_converged",
        PrandtlStatus::OracleFailure => c"oracle_failure",
        PrandtlStatus::Io => c"io",
        PrandtlStatus::BufferTooSmall => c"buffer_too_small",
        PrandtlStatus::Panic => c"panic",
        PrandtlStatus::Internal => c"internal",
    };
    s.as_ptr()
}

#[no_mangle]
pub extern "C" fn prandtl_geometry_disk(radius: f64, n_s: usize, out: *mut *mut PrandtlGeometry) -> PrandtlStatus {
    put_geometry(out, disk_geometry(radius, n_s))
}

/// Ellipse with semi-axes `a` and 1.
#[no_mangle]
pub extern "C" fn prandtl_geometry_ellipse(a: f64, n_s: usize, out: *mut *mut PrandtlGeometry) -> PrandtlStatus {
    put_geometry(out, ellipse_geometry(a, n_s))
}

/// Tabulated slip on `n` equally spaced arc lengths of a boundary of length `length`.
///
/// # Safety
/// `q_e` must point to `n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn prandtl_geometry_custom(
    length: f64,
    q_e: *const f64,
    n: usize,
    out: *mut *mut PrandtlGeometry,
) -> PrandtlStatus {
    let q = match slice(q_e, n, "q_e") {
        Ok(q) => q.to_vec(),
        Err(e) => return guard(|| Err(e)),
    };
    put_geometry(out, custom_geometry(length, q))
}

/// # Safety
/// `geometry` must come from a `prandtl_geometry_*` constructor and not be
/// freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn prandtl_geometry_free(geometry: *mut PrandtlGeometry) {
    if !geometry.is_null() {
        drop(Box::from_raw(geometry));
    }
}

/// Number of arc-length samples, or 0 for null.
///
/// # Safety
/// `geometry` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prandtl_geometry_n_s(geometry: *const PrandtlGeometry) -> usize {
    geometry.as_ref().map_or(0, |g| g.inner.n_s())
}

/// Boundary length, or NaN for null.
///
/// # Safety
/// `geometry` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prandtl_geometry_length(geometry: *const PrandtlGeometry) -> f64 {
    geometry.as_ref().map_or(f64::NAN, |g| g.inner.length())
}

/// Copies `q_e` into `out` (capacity `len`).
///
/// # Safety
/// `geometry` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn prandtl_geometry_q_e(geometry: *const PrandtlGeometry, out: *mut f64, len: usize) -> PrandtlStatus {
    guard(|| {
        let g = geometry.as_ref().ok_or_else(|| null("geometry"))?;
        copy_out(g.inner.q_e(), out, len)
    })
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), (PrandtlStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len < src.len() {
        return Err((PrandtlStatus::BufferTooSmall, format!("need {} doubles, got {len}", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

#[no_mangle]
pub extern "C" fn prandtl_options_default() -> PrandtlOptions {
    let p = PicardOptions::default();
    let g = Grid::default();
    PrandtlOptions { n_psi: g.n_psi(), psi_max: g.psi_max(), tol: p.tol, max_iter: p.max_iter, compat_tol: p.compat_tol }
}

/// Solves for the boundary layer with slip `q_e + epsilon g`, `g` sampled on
/// the geometry's arc-length grid (`n_g` must equal its `n_s`).
///
/// # Safety
/// `geometry` must be a live handle, `g` must point to `n_g` doubles, and
/// `options` must be null (defaults) or valid.
#[no_mangle]
pub unsafe extern "C" fn prandtl_solve(
    geometry: *const PrandtlGeometry,
    epsilon: f64,
    g: *const f64,
    n_g: usize,
    options: *const PrandtlOptions,
    out: *mut *mut PrandtlSolution,
) -> PrandtlStatus {
    guard(|| {
        let geom = &geometry.as_ref().ok_or_else(|| null("geometry"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let g = slice(g, n_g, "g")?.to_vec();
        let o = options.as_ref().copied().unwrap_or_else(|| prandtl_options_default());
        let grid = Grid::uniform(o.n_psi, o.psi_max).map_err(fail)?;
        let forcing = SlipForcing::new(geom, epsilon, g).map_err(fail)?;
        let opts = PicardOptions { tol: o.tol, max_iter: o.max_iter, compat_tol: o.compat_tol, ..Default::default() };
        let inner = picard_solve(geom, &forcing, &grid, &opts).map_err(fail)?;
        *out = Box::into_raw(Box::new(PrandtlSolution { inner }));
        Ok(())
    })
}

/// # Safety
/// `solution` must come from [`prandtl_solve`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn prandtl_solution_free(solution: *mut PrandtlSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Selected vorticity, or NaN for null.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prandtl_solution_omega0(solution: *const PrandtlSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.inner.state.omega0)
}

/// Leading-order and nonlinear parts of `omega_bar`, with
/// `1 - omega0^2 = epsilon (star + err)`.
///
/// # Safety
/// `solution` must be a live handle; `star` and `err` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prandtl_solution_omega_bar(
    solution: *const PrandtlSolution,
    star: *mut f64,
    err: *mut f64,
) -> PrandtlStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if star.is_null() || err.is_null() {
            return Err(null("out"));
        }
        *star = s.inner.state.omega_bar_star;
        *err = s.inner.state.omega_bar_err;
        Ok(())
    })
}

/// Number of Picard iterations, or 0 for null.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn prandtl_solution_iterations(solution: *const PrandtlSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.inner.trace.iterations())
}

/// Field dimensions `(n_s, n_psi)`.
///
/// # Safety
/// `solution` must be a live handle; `n_s` and `n_psi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prandtl_solution_shape(
    solution: *const PrandtlSolution,
    n_s: *mut usize,
    n_psi: *mut usize,
) -> PrandtlStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if n_s.is_null() || n_psi.is_null() {
            return Err(null("out"));
        }
        *n_s = s.inner.q.n_s();
        *n_psi = s.inner.q.n_psi();
        Ok(())
    })
}

/// Copies `Q` row-major by s into `out` (capacity `len`).
///
/// # Safety
/// `solution` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn prandtl_solution_field(solution: *const PrandtlSolution, out: *mut f64, len: usize) -> PrandtlStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        copy_out(s.inner.q.as_slice(), out, len)
    })
}

/// Closed-form disk vorticity `sqrt(mean f^2) / (R / 2)` for slip samples `f`.
/// NaN on null or empty input.
///
/// # Safety
/// `f` must point to `n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn prandtl_wood_disk(f: *const f64, n: usize, radius: f64) -> f64 {
    if f.is_null() || n == 0 {
        return f64::NAN;
    }
    wood_disk(std::slice::from_raw_parts(f, n), radius)
}

/// Leading-order vorticity `sqrt(int q_e f^2 / int q_e^3)` on `geometry`.
///
/// # Safety
/// `geometry` must be a live handle, `f` must point to `n` readable doubles
/// and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn prandtl_fl_leading(
    geometry: *const PrandtlGeometry,
    f: *const f64,
    n: usize,
    out: *mut f64,
) -> PrandtlStatus {
    guard(|| {
        let g = &geometry.as_ref().ok_or_else(|| null("geometry"))?.inner;
        let f = slice(f, n, "f")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if n != g.n_s() {
            return Err(fail(Error::LengthMismatch { expected: g.n_s(), got: n }));
        }
        *out = fl_leading(f, g);
        Ok(())
    })
}
