//! C ABI over `polarize`.
//!
//! Objects are opaque heap handles released with their `_free` function.
//! Every fallible call returns a [`PolarizeStatus`]; on failure the message is
//! available from [`polarize_last_error`] on the same thread until the next
//! failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use polarize::bounds;
use polarize::cell_solver::{self, HomogenizationResult, Microstructure, NamedGeometry};
use polarize::laminate::{self, LaminateSpec, MatrixPhase};
use polarize::{Error, PhasePair, SymTensor};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarizeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SolverFailure = 3,
    Io = 4,
    Panic = 5,
}

/// Which phase is the matrix of a laminate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarizeMatrixPhase {
    Gamma0 = 0,
    Gamma1 = 1,
}

/// Symmetric tensor handle.
pub struct PolarizeTensor(SymTensor);

/// Sequential laminate handle.
pub struct PolarizeLaminate(LaminateSpec);

/// Periodic pixel cell handle.
pub struct PolarizeMicrostructure(Microstructure);

/// Cell homogenization result handle.
pub struct PolarizeHomogenization(HomogenizationResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PolarizeStatus {
    match e {
        Error::SolverDiverged { .. } | Error::EigenNoConvergence { .. } => PolarizeStatus::SolverFailure,
        Error::Io(_) => PolarizeStatus::Io,
        _ => PolarizeStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (PolarizeStatus, String)>) -> PolarizeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PolarizeStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PolarizeStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (PolarizeStatus, String)>;
}

impl<T> IntoFfi<T> for polarize::Result<T> {
    fn ffi(self) -> Result<T, (PolarizeStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (PolarizeStatus, String) {
    (PolarizeStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (PolarizeStatus, String) {
    (PolarizeStatus::InvalidArgument, msg.into())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (PolarizeStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (PolarizeStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), (PolarizeStatus, String)> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn phases(gamma0: f64, gamma1: f64) -> Result<PhasePair, (PolarizeStatus, String)> {
    PhasePair::new(gamma0, gamma1).ffi()
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the thread.
#[no_mangle]
pub extern "C" fn polarize_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn polarize_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Tensor from `dim * dim` row-major entries, which must be symmetric.
///
/// # Safety
/// `entries` must point to `dim * dim` doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn polarize_tensor_new(dim: usize, entries: *const f64, out: *mut *mut PolarizeTensor) -> PolarizeStatus {
    guard(|| {
        let v = slice(entries, dim * dim, "entries")?;
        let rows: Vec<Vec<f64>> = v.chunks(dim.max(1)).map(<[f64]>::to_vec).collect();
        let t = SymTensor::from_rows(&rows).ffi()?;
        emit(out, PolarizeTensor(t))
    })
}

/// # Safety
/// `t` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn polarize_tensor_free(t: *mut PolarizeTensor) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Dimension of a tensor; 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn polarize_tensor_dim(t: *const PolarizeTensor) -> usize {
    t.as_ref().map_or(0, |t| t.0.dim())
}

/// Writes the `dim * dim` row-major entries.
///
/// # Safety
/// `t` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn polarize_tensor_entries(t: *const PolarizeTensor, out: *mut f64, len: usize) -> PolarizeStatus {
    guard(|| {
        let t = &deref(t, "tensor")?.0;
        let n = t.dim();
        if out.is_null() {
            return Err(null("output buffer"));
        }
        if len < n * n {
            return Err(invalid(format!("buffer holds {len} values, need {}", n * n)));
        }
        let out = std::slice::from_raw_parts_mut(out, n * n);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = t.get(i, j);
            }
        }
        Ok(())
    })
}

/// Writes the `dim` eigenvalues in ascending order.
///
/// # Safety
/// `t` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn polarize_tensor_eigenvalues(t: *const PolarizeTensor, out: *mut f64, len: usize) -> PolarizeStatus {
    guard(|| {
        let t = &deref(t, "tensor")?.0;
        if out.is_null() {
            return Err(null("output buffer"));
        }
        if len < t.dim() {
            return Err(invalid(format!("buffer holds {len} values, need {}", t.dim())));
        }
        let eig = t.eigenvalues().ffi()?;
        std::slice::from_raw_parts_mut(out, eig.len()).copy_from_slice(&eig);
        Ok(())
    })
}

/// Laminate with `rank` unit directions (row-major, `rank * dim` values),
/// lamination weights summing to one, and volume fraction `theta`.
///
/// # Safety
/// `directions` must hold `rank * dim` doubles, `weights` `rank` doubles.
#[no_mangle]
pub unsafe extern "C" fn polarize_laminate_new(
    dim: usize,
    rank: usize,
    directions: *const f64,
    weights: *const f64,
    theta: f64,
    matrix: PolarizeMatrixPhase,
    out: *mut *mut PolarizeLaminate,
) -> PolarizeStatus {
    guard(|| {
        let d = slice(directions, rank * dim, "directions")?;
        let w = slice(weights, rank, "weights")?.to_vec();
        let dirs: Vec<Vec<f64>> = d.chunks(dim.max(1)).map(<[f64]>::to_vec).collect();
        let matrix = match matrix {
            PolarizeMatrixPhase::Gamma0 => MatrixPhase::Gamma0,
            PolarizeMatrixPhase::Gamma1 => MatrixPhase::Gamma1,
        };
        let spec = LaminateSpec::with_weights(dim, dirs, w, theta, matrix).ffi()?;
        emit(out, PolarizeLaminate(spec))
    })
}

/// # Safety
/// `l` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn polarize_laminate_free(l: *mut PolarizeLaminate) {
    if !l.is_null() {
        drop(Box::from_raw(l));
    }
}

/// Effective conductivity tensor of a laminate.
///
/// # Safety
/// `l` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn polarize_laminate_effective_tensor(
    l: *const PolarizeLaminate,
    gamma0: f64,
    gamma1: f64,
    out: *mut *mut PolarizeTensor,
) -> PolarizeStatus {
    guard(|| {
        let spec = &deref(l, "laminate")?.0;
        let t = laminate::laminate_effective_tensor(spec, phases(gamma0, gamma1)?).ffi()?;
        emit(out, PolarizeTensor(t))
    })
}

/// Polarization tensor of a laminate.
///
/// # Safety
/// `l` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn polarize_laminate_polarization(
    l: *const PolarizeLaminate,
    gamma0: f64,
    gamma1: f64,
    out: *mut *mut PolarizeTensor,
) -> PolarizeStatus {
    guard(|| {
        let spec = &deref(l, "laminate")?.0;
        let t = laminate::laminate_polarization(spec, phases(gamma0, gamma1)?).ffi()?;
        emit(out, PolarizeTensor(t))
    })
}

/// Trace bounds at fraction `theta` in `(0, 1)`: `tr M <= upper` and
/// `tr M^-1 <= lower`.
///
/// # Safety
/// `upper` and `lower` must be writable.
#[no_mangle]
pub unsafe extern "C" fn polarize_trace_bounds(
    dim: usize,
    theta: f64,
    gamma0: f64,
    gamma1: f64,
    upper: *mut f64,
    lower: *mut f64,
) -> PolarizeStatus {
    guard(|| {
        let p = phases(gamma0, gamma1)?;
        if !(theta > 0.0 && theta < 1.0) {
            return Err(invalid(format!("theta {theta} outside (0, 1)")));
        }
        if upper.is_null() || lower.is_null() {
            return Err(null("output"));
        }
        *upper = bounds::trace_upper_bound(dim, theta, p);
        *lower = bounds::trace_lower_bound(dim, theta, p);
        Ok(())
    })
}

/// Checks `m` against the bounds for `theta`: the zero-volume bounds at 0,
/// the trace bounds in `(0, 1)`, the pointwise bounds at 1. Writes 1 to
/// `all_ok` when every bound holds and the worst slack to `worst_slack`.
///
/// # Safety
/// `m` must be a live handle; `all_ok` and `worst_slack` writable.
#[no_mangle]
pub unsafe extern "C" fn polarize_check_bounds(
    m: *const PolarizeTensor,
    theta: f64,
    gamma0: f64,
    gamma1: f64,
    all_ok: *mut i32,
    worst_slack: *mut f64,
) -> PolarizeStatus {
    guard(|| {
        let m = &deref(m, "tensor")?.0;
        let p = phases(gamma0, gamma1)?;
        let report = if theta == 0.0 {
            bounds::check_trace_zero(m, p)
        } else if theta < 1.0 {
            bounds::check_trace_theta(m, theta, p)
        } else {
            bounds::check_pointwise(m, theta, p)
        }
        .ffi()?;
        if all_ok.is_null() || worst_slack.is_null() {
            return Err(null("output"));
        }
        *all_ok = report.all_ok() as i32;
        *worst_slack = report.slacks.min().unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Cell from a named geometry such as `disk(0.3)` or `random(0.3,7,4)`.
/// `seed` is used only when `has_seed` is nonzero.
///
/// # Safety
/// `name` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn polarize_microstructure_named(
    name: *const c_char,
    dim: usize,
    resolution: usize,
    seed: u64,
    has_seed: i32,
    out: *mut *mut PolarizeMicrostructure,
) -> PolarizeStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name).to_str().map_err(|e| invalid(format!("name: {e}")))?;
        let geometry = NamedGeometry::parse(name).ffi()?;
        let m = geometry.build(dim, resolution, (has_seed != 0).then_some(seed)).ffi()?;
        emit(out, PolarizeMicrostructure(m))
    })
}

/// Cell from `resolution^dim` indicator bytes, axis 0 fastest; nonzero bytes
/// mark the inclusion phase.
///
/// # Safety
/// `chi` must hold `resolution^dim` bytes and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn polarize_microstructure_from_mask(
    dim: usize,
    resolution: usize,
    chi: *const u8,
    out: *mut *mut PolarizeMicrostructure,
) -> PolarizeStatus {
    guard(|| {
        let n = u32::try_from(dim)
            .ok()
            .and_then(|d| resolution.checked_pow(d))
            .ok_or_else(|| invalid("cell size overflows"))?;
        let bytes = slice(chi, n, "mask")?;
        let m = Microstructure::new(dim, resolution, bytes.iter().map(|&b| b != 0).collect()).ffi()?;
        emit(out, PolarizeMicrostructure(m))
    })
}

/// # Safety
/// `m` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn polarize_microstructure_free(m: *mut PolarizeMicrostructure) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Inclusion volume fraction; NaN for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn polarize_microstructure_theta(m: *const PolarizeMicrostructure) -> f64 {
    m.as_ref().map_or(f64::NAN, |m| m.0.theta())
}

/// Solves the cell problems to relative residual `tol`.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn polarize_homogenize(
    m: *const PolarizeMicrostructure,
    gamma0: f64,
    gamma1: f64,
    tol: f64,
    out: *mut *mut PolarizeHomogenization,
) -> PolarizeStatus {
    guard(|| {
        let micro = &deref(m, "microstructure")?.0;
        let res = cell_solver::homogenize(micro, phases(gamma0, gamma1)?, tol).ffi()?;
        emit(out, PolarizeHomogenization(res))
    })
}

/// # Safety
/// `h` must be null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn polarize_homogenization_free(h: *mut PolarizeHomogenization) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Effective tensor of a homogenization result.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn polarize_homogenization_effective_tensor(
    h: *const PolarizeHomogenization,
    out: *mut *mut PolarizeTensor,
) -> PolarizeStatus {
    guard(|| {
        let h = &deref(h, "homogenization")?.0;
        emit(out, PolarizeTensor(h.gamma_star.clone()))
    })
}

/// Polarization tensor from the inclusion average of the corrector gradients.
/// Fails for a cell without inclusions.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn polarize_homogenization_polarization(
    h: *const PolarizeHomogenization,
    out: *mut *mut PolarizeTensor,
) -> PolarizeStatus {
    guard(|| {
        let h = &deref(h, "homogenization")?.0;
        let m = h.m_theta_direct.clone().ok_or_else(|| invalid("cell has no inclusion"))?;
        emit(out, PolarizeTensor(m))
    })
}
