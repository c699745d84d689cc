//! C ABI over the `fadsim` library.
//!
//! Models and traces are opaque handles owned by the caller and released with
//! the matching `_free` function. Every fallible call returns a [`FadsStatus`];
//! the message for the most recent failure on the calling thread is available
//! from [`fads_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use fadsim::analytics::{summarize_trace, RestrictedFadRule};
use fadsim::oracle::{default_depth, expected_gap_interval};
use fadsim::{simulate, Likelihood, Model, ModelParams, RunConfig, Trace};

/// Status codes returned by every fallible function. Stable across releases.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FadsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    OutOfRange = 3,
    Internal = 4,
}

/// Opaque model handle.
pub struct FadsModel {
    inner: Model,
}

/// Opaque trace handle.
pub struct FadsTrace {
    inner: Trace,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FadsConstants {
    pub c_alpha: f64,
    pub c_u: f64,
    pub cap_k: f64,
    pub cap_k_floor: u64,
    pub fad_bound_m: f64,
}

/// One period of a trace. Signs are `+1` / `-1`; region is
/// 0 = up cascade, 1 = down cascade, 2 = learning.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FadsStep {
    pub t: u64,
    pub theta: i8,
    pub signal: i8,
    pub action: i8,
    pub region: u8,
    pub l_pub: f64,
    pub l_post: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FadsSummary {
    pub action_changes: u64,
    pub state_changes: u64,
    pub q_a: f64,
    pub q_theta: f64,
    pub fads_emerged: bool,
    /// Mean gap between sign switches of the public likelihood, NaN if none.
    pub mean_gap: f64,
    pub restricted_fad_count: u64,
    pub max_cascade_len: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FadsInterval {
    pub low: f64,
    pub high: f64,
    pub depth: u64,
    pub mass_unresolved: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let mut bytes = msg.into();
    bytes.retain(|&b| b != 0);
    let c = CString::new(bytes).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &fadsim::Error) -> FadsStatus {
    match err {
        fadsim::Error::EnumerationRange(_) | fadsim::Error::Horizon(_) => FadsStatus::OutOfRange,
        e if e.is_validation() => FadsStatus::InvalidParameter,
        _ => FadsStatus::Internal,
    }
}

fn guard<F>(f: F) -> FadsStatus
where
    F: FnOnce() -> Result<(), FadsStatus>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FadsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            FadsStatus::Internal
        }
    }
}

fn fail(err: fadsim::Error) -> FadsStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn null(what: &str) -> FadsStatus {
    set_error(format!("null pointer: {what}"));
    FadsStatus::NullPointer
}

unsafe fn model_ref<'a>(m: *const FadsModel) -> Result<&'a Model, FadsStatus> {
    m.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), FadsStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(value);
    Ok(())
}

/// Message for the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fads_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn fads_status_str(status: FadsStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        FadsStatus::Ok => b"ok\0",
        FadsStatus::NullPointer => b"null pointer\0",
        FadsStatus::InvalidParameter => b"invalid parameter\0",
        FadsStatus::OutOfRange => b"out of range\0",
        FadsStatus::Internal => b"internal error\0",
    };
    s.as_ptr().cast()
}

/// Creates a model for signal accuracy `alpha` and switching rate `epsilon`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn fads_model_new(
    alpha: f64,
    epsilon: f64,
    out: *mut *mut FadsModel,
) -> FadsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let params = ModelParams::new(alpha, epsilon).map_err(fail)?;
        let handle = Box::into_raw(Box::new(FadsModel {
            inner: Model::new(params),
        }));
        out.write(handle);
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`fads_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fads_model_free(model: *mut FadsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fads_model_constants(
    model: *const FadsModel,
    out: *mut FadsConstants,
) -> FadsStatus {
    guard(|| {
        let c = model_ref(model)?.constants;
        write_out(
            out,
            FadsConstants {
                c_alpha: c.c_alpha,
                c_u: c.c_u,
                cap_k: c.cap_k,
                cap_k_floor: c.cap_k_floor,
                fad_bound_m: c.fad_bound_m,
            },
        )
    })
}

unsafe fn map_call(
    model: *const FadsModel,
    l: f64,
    out: *mut f64,
    f: fn(&Model, Likelihood) -> Likelihood,
) -> FadsStatus {
    guard(|| {
        let m = model_ref(model)?;
        if l.is_nan() {
            set_error("likelihood is NaN");
            return Err(FadsStatus::InvalidParameter);
        }
        write_out(out, f(m, Likelihood(l)).0)
    })
}

/// Public likelihood after an up action in the learning region.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fads_f1(model: *const FadsModel, l: f64, out: *mut f64) -> FadsStatus {
    map_call(model, l, out, |m, l| m.f1(l))
}

/// Public likelihood after a down action in the learning region.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fads_f0(model: *const FadsModel, l: f64, out: *mut f64) -> FadsStatus {
    map_call(model, l, out, |m, l| m.f0(l))
}

/// One period of deterministic decay inside a cascade.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fads_cascade_decay(
    model: *const FadsModel,
    l: f64,
    out: *mut f64,
) -> FadsStatus {
    map_call(model, l, out, |m, l| m.cascade_decay(l))
}

/// Probability of an up signal given public likelihood `l`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fads_signal_prob_up(
    model: *const FadsModel,
    l: f64,
    out: *mut f64,
) -> FadsStatus {
    map_call(model, l, out, |m, l| Likelihood(m.signal_prob_up(l)))
}

/// Simulates `horizon` periods from `seed`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fads_simulate(
    model: *const FadsModel,
    horizon: u64,
    seed: u64,
    out: *mut *mut FadsTrace,
) -> FadsStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = RunConfig::new(m.params, horizon, seed).map_err(fail)?;
        let trace = simulate(&cfg).map_err(fail)?;
        out.write(Box::into_raw(Box::new(FadsTrace { inner: trace })));
        Ok(())
    })
}

/// # Safety
/// `trace` must be null or a handle from [`fads_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fads_trace_free(trace: *mut FadsTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of periods in the trace, 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fads_trace_len(trace: *const FadsTrace) -> u64 {
    trace.as_ref().map_or(0, |t| t.inner.len() as u64)
}

/// Copies period `index` (0-based) into `out`.
///
/// # Safety
/// `trace` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fads_trace_step(
    trace: *const FadsTrace,
    index: u64,
    out: *mut FadsStep,
) -> FadsStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        let s = usize::try_from(index)
            .ok()
            .and_then(|i| t.inner.steps.get(i))
            .ok_or_else(|| {
                set_error(format!(
                    "index {index} out of range for trace of length {}",
                    t.inner.len()
                ));
                FadsStatus::OutOfRange
            })?;
        write_out(
            out,
            FadsStep {
                t: s.t,
                theta: s.theta.value(),
                signal: s.signal.value(),
                action: s.action.value(),
                region: match s.region {
                    fadsim::Region::UpCascade => 0,
                    fadsim::Region::DownCascade => 1,
                    fadsim::Region::Learning => 2,
                },
                l_pub: s.l_pub.0,
                l_post: s.l_post.0,
            },
        )
    })
}

/// Change frequencies and fad statistics for a trace.
///
/// # Safety
/// `trace` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fads_trace_summary(
    trace: *const FadsTrace,
    out: *mut FadsSummary,
) -> FadsStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        let s = summarize_trace(&t.inner).map_err(fail)?;
        write_out(
            out,
            FadsSummary {
                action_changes: s.action_changes,
                state_changes: s.state_changes,
                q_a: s.q_a,
                q_theta: s.q_theta,
                fads_emerged: s.fads_emerged,
                mean_gap: s.mean_gap.unwrap_or(f64::NAN),
                restricted_fad_count: s.restricted(RestrictedFadRule::default()),
                max_cascade_len: s.max_cascade_len,
            },
        )
    })
}

/// Certified interval for the expected time until the public likelihood
/// changes sign, starting from `l0`. `depth == 0` selects the default depth.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fads_expected_gap_interval(
    model: *const FadsModel,
    l0: f64,
    depth: u64,
    out: *mut FadsInterval,
) -> FadsStatus {
    guard(|| {
        let m = model_ref(model)?;
        let depth = if depth == 0 { default_depth(m) } else { depth };
        let r = expected_gap_interval(Likelihood(l0), &m.params, depth).map_err(fail)?;
        write_out(
            out,
            FadsInterval {
                low: r.value_low,
                high: r.value_high,
                depth: r.depth,
                mass_unresolved: r.mass_unresolved,
            },
        )
    })
}
