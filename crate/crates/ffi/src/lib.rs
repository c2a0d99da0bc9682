//! C ABI over the `nonsmooth` library.
//!
//! Every function returns an [`NsStatus`]. On failure a message is kept per thread and
//! can be read with [`ns_last_error`]. Handles are opaque and must be released with the
//! matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;
use std::sync::Arc;

use nonsmooth::cli::{load_str, registry, BuiltSystem, SystemConfig};
use nonsmooth::flow::{integrate_filippov, Mode, OdeOptions};
use nonsmooth::psys::{classify_point, convex_coefficient, sliding_vf, PiecewiseField, SigmaKind};
use nonsmooth::regularize::{nonlinear_regularize, r_regularize, st_regularize, SmoothFamily, Transition};
use nonsmooth::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    UnknownExample = 4,
    ParseError = 5,
    DomainError = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsSigmaKind {
    Sewing = 0,
    SlidingAttracting = 1,
    SlidingRepelling = 2,
    TangencyPlus = 3,
    TangencyMinus = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsMode {
    Smooth = 0,
    FlowPlus = 1,
    FlowMinus = 2,
    Sliding = 3,
}

/// A piecewise-smooth system together with its regularization.
pub struct NsSystem {
    field: Arc<dyn PiecewiseField>,
    family: SmoothFamily,
}

/// Samples of a Filippov trajectory.
pub struct NsTrajectory {
    times: Vec<f64>,
    modes: Vec<NsMode>,
    states: Vec<Vec<f64>>,
    dim: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(NsStatus, String);

type Outcome<T> = Result<T, Failure>;

fn fail<T>(status: NsStatus, msg: impl Into<String>) -> Outcome<T> {
    Err(Failure(status, msg.into()))
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Parse(_) => NsStatus::ParseError,
            _ => NsStatus::DomainError,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Outcome<()>) -> NsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NsStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Outcome<&'a str> {
    if p.is_null() {
        return fail(NsStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(NsStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Outcome<&'a T> {
    p.as_ref()
        .map_or_else(|| fail(NsStatus::NullPointer, format!("{what} is null")), Ok)
}

unsafe fn point<'a>(sys: &NsSystem, p: *const f64, len: usize) -> Outcome<&'a [f64]> {
    if p.is_null() {
        return fail(NsStatus::NullPointer, "point is null");
    }
    let n = sys.field.dim();
    if len != n {
        return fail(
            NsStatus::InvalidArgument,
            format!("point has {len} components, system has {n}"),
        );
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn write_vec(v: &[f64], out: *mut f64, out_len: usize) -> Outcome<()> {
    if out.is_null() {
        return fail(NsStatus::NullPointer, "output buffer is null");
    }
    if out_len < v.len() {
        return fail(
            NsStatus::BufferTooSmall,
            format!("output buffer needs {} entries", v.len()),
        );
    }
    ptr::copy_nonoverlapping(v.as_ptr(), out, v.len());
    Ok(())
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Outcome<()> {
    if out.is_null() {
        return fail(NsStatus::NullPointer, "output handle is null");
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn build(config: &SystemConfig) -> Outcome<NsSystem> {
    let sys = config.build()?;
    let t = config.transition.build()?;
    let (field, family): (Arc<dyn PiecewiseField>, SmoothFamily) = match sys {
        BuiltSystem::Ccomb(c) => {
            let slice = c.slice(0.0, 0.0);
            let field: Arc<dyn PiecewiseField> = Arc::new(slice.endpoint_system().clone());
            (field, nonlinear_regularize(slice, t)?)
        }
        other => {
            let field: Arc<dyn PiecewiseField> = match other {
                BuiltSystem::Piecewise(p) => Arc::new(p),
                BuiltSystem::Nsff(n) => Arc::new(n.reduce(0.0)),
                BuiltSystem::Ccomb(_) => unreachable!(),
            };
            let family = match t {
                Transition::Monotone(_) => st_regularize(field.clone(), t)?,
                Transition::NonMonotone(_) => r_regularize(field.clone(), t),
            };
            (field, family)
        }
    };
    Ok(NsSystem { field, family })
}

/// Message of the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn ns_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds one of the built-in examples (`ex-s2-1`, `ex-exblow`, ...).
///
/// # Safety
/// `name` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_system_from_example(name: *const c_char, out: *mut *mut NsSystem) -> NsStatus {
    guard(|| {
        let name = text(name, "name")?;
        let ex =
            registry::find(name).map_or_else(|| fail(NsStatus::UnknownExample, format!("no example `{name}`")), Ok)?;
        store(out, build(&(ex.config)())?)
    })
}

/// Builds a system from configuration text.
///
/// # Safety
/// `config` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ns_system_from_config(config: *const c_char, out: *mut *mut NsSystem) -> NsStatus {
    guard(|| {
        let src = text(config, "config")?;
        let cfg = load_str(src).or_else(|e| fail(NsStatus::ParseError, e.to_string()))?;
        store(out, build(&cfg)?)
    })
}

/// # Safety
/// `sys` must come from `ns_system_from_*` and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ns_system_free(sys: *mut NsSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// # Safety
/// `sys` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ns_system_dim(sys: *const NsSystem, out: *mut usize) -> NsStatus {
    guard(|| {
        let sys = handle(sys, "system")?;
        if out.is_null() {
            return fail(NsStatus::NullPointer, "out is null");
        }
        *out = sys.field.dim();
        Ok(())
    })
}

/// Filippov class of a point of the switching manifold.
///
/// # Safety
/// `point` must hold `len` doubles; `sys` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ns_classify_point(
    sys: *const NsSystem,
    point: *const f64,
    len: usize,
    out: *mut NsSigmaKind,
) -> NsStatus {
    guard(|| {
        let sys = handle(sys, "system")?;
        let p = self::point(sys, point, len)?;
        if out.is_null() {
            return fail(NsStatus::NullPointer, "out is null");
        }
        *out = match classify_point(sys.field.as_ref(), p)?.kind {
            SigmaKind::Sewing => NsSigmaKind::Sewing,
            SigmaKind::SlidingAttracting => NsSigmaKind::SlidingAttracting,
            SigmaKind::SlidingRepelling => NsSigmaKind::SlidingRepelling,
            SigmaKind::TangencyPlus => NsSigmaKind::TangencyPlus,
            SigmaKind::TangencyMinus => NsSigmaKind::TangencyMinus,
        };
        Ok(())
    })
}

/// Sliding vector field at a sliding point, written to `out[0..dim]`.
///
/// # Safety
/// `point` must hold `len` doubles and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ns_sliding_vf(
    sys: *const NsSystem,
    point: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> NsStatus {
    guard(|| {
        let sys = handle(sys, "system")?;
        let p = self::point(sys, point, len)?;
        write_vec(&sliding_vf(sys.field.as_ref(), p)?, out, out_len)
    })
}

/// Weight `s` with `X^s = s X⁺ + (1 − s) X⁻` tangent to the switching manifold.
///
/// # Safety
/// `point` must hold `len` doubles; `sys` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ns_convex_coefficient(
    sys: *const NsSystem,
    point: *const f64,
    len: usize,
    out: *mut f64,
) -> NsStatus {
    guard(|| {
        let sys = handle(sys, "system")?;
        let p = self::point(sys, point, len)?;
        let s = convex_coefficient(sys.field.as_ref(), p)?;
        write_vec(&[s], out, 1)
    })
}

/// Regularized field `X^δ` at any point, with the system's configured transition.
///
/// # Safety
/// `point` must hold `len` doubles and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ns_regularized_eval(
    sys: *const NsSystem,
    point: *const f64,
    len: usize,
    delta: f64,
    out: *mut f64,
    out_len: usize,
) -> NsStatus {
    guard(|| {
        let sys = handle(sys, "system")?;
        let p = self::point(sys, point, len)?;
        if !(delta > 0.0 && delta.is_finite()) {
            return fail(NsStatus::InvalidArgument, "delta must be positive");
        }
        write_vec(&sys.family.eval(p, delta)?, out, out_len)
    })
}

/// Integrates the Filippov flow from `x0` over `[t0, t1]`.
///
/// # Safety
/// `x0` must hold `len` doubles; `sys` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ns_integrate_filippov(
    sys: *const NsSystem,
    x0: *const f64,
    len: usize,
    t0: f64,
    t1: f64,
    rtol: f64,
    atol: f64,
    out: *mut *mut NsTrajectory,
) -> NsStatus {
    guard(|| {
        let sys = handle(sys, "system")?;
        let x = point(sys, x0, len)?;
        if !(rtol > 0.0 && atol > 0.0) {
            return fail(NsStatus::InvalidArgument, "tolerances must be positive");
        }
        let tr = integrate_filippov(sys.field.as_ref(), x, (t0, t1), &OdeOptions::tol(rtol, atol))?;
        let mut res = NsTrajectory {
            times: vec![],
            modes: vec![],
            states: vec![],
            dim: len,
        };
        for (t, mode, y) in tr.samples() {
            res.times.push(t);
            res.modes.push(match mode {
                Mode::Smooth => NsMode::Smooth,
                Mode::FlowPlus => NsMode::FlowPlus,
                Mode::FlowMinus => NsMode::FlowMinus,
                Mode::Sliding => NsMode::Sliding,
            });
            res.states.push(y.to_vec());
        }
        store(out, res)
    })
}

/// Number of samples.
///
/// # Safety
/// `traj` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn ns_trajectory_len(traj: *const NsTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.times.len())
}

/// State dimension of every sample.
///
/// # Safety
/// `traj` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn ns_trajectory_dim(traj: *const NsTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.dim)
}

/// Copies sample `index`: time, mode and `dim` state components.
///
/// # Safety
/// `traj` must be valid; `state` must hold `state_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ns_trajectory_sample(
    traj: *const NsTrajectory,
    index: usize,
    t: *mut f64,
    mode: *mut NsMode,
    state: *mut f64,
    state_len: usize,
) -> NsStatus {
    guard(|| {
        let tr = handle(traj, "trajectory")?;
        if index >= tr.times.len() {
            return fail(
                NsStatus::InvalidArgument,
                format!("index {index} out of range ({} samples)", tr.times.len()),
            );
        }
        if t.is_null() || mode.is_null() {
            return fail(NsStatus::NullPointer, "t or mode is null");
        }
        write_vec(&tr.states[index], state, state_len)?;
        *t = tr.times[index];
        *mode = tr.modes[index];
        Ok(())
    })
}

/// # Safety
/// `traj` must come from `ns_integrate_filippov` and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ns_trajectory_free(traj: *mut NsTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_status_codes() {
        assert_eq!(guard(|| panic!("boom")), NsStatus::Panic);
        let msg = unsafe { CStr::from_ptr(ns_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "internal panic");
        assert_eq!(guard(|| Ok(())), NsStatus::Ok);
        assert!(ns_last_error().is_null());
    }

    #[test]
    fn nul_bytes_in_messages_are_replaced() {
        assert_eq!(
            guard(|| fail(NsStatus::InvalidArgument, "a\0b")),
            NsStatus::InvalidArgument
        );
        let msg = unsafe { CStr::from_ptr(ns_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "a b");
    }
}
