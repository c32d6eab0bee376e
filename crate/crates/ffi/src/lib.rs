//! C ABI for trained hec-adapt artifacts.
//!
//! Detectors and policies are opaque handles created by the `*_load`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`HecStatus`]; on failure the message is available from
//! [`hec_last_error_message`] on the same thread. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use hec_adapt::cost::{self, DelayBreakdown, TierSpec};
use hec_adapt::data::{DAYS_PER_WEEK, WEEK_LEN};
use hec_adapt::detectors::TrainedDetector;
use hec_adapt::features::{extract_state, PolicyState, STATE_DIM};
use hec_adapt::policy::PolicyNet;
use hec_adapt::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HecStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Io = 4,
    Format = 5,
    MissingArtifact = 6,
    Degenerate = 7,
    Panic = 8,
}

impl From<&Error> for HecStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension { .. } => HecStatus::DimensionMismatch,
            Error::Io { .. } => HecStatus::Io,
            Error::Parse { .. } | Error::Format { .. } => HecStatus::Format,
            Error::MissingArtifact(_) => HecStatus::MissingArtifact,
            Error::Degenerate(_) => HecStatus::Degenerate,
            Error::Spec(_) | Error::InvalidArgument(_) => HecStatus::InvalidArgument,
        }
    }
}

/// Trained autoencoder with its error model.
pub struct HecDetector(TrainedDetector);

/// Trained tier-selection policy.
pub struct HecPolicy(PolicyNet);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn fail(status: HecStatus, msg: impl Into<String>) -> HecStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> HecStatus {
    let status = HecStatus::from(&e);
    fail(status, e.to_string())
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), HecStatus>) -> HecStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HecStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(HecStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], HecStatus> {
    if ptr.is_null() {
        return Err(fail(HecStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], HecStatus> {
    if ptr.is_null() {
        return Err(fail(HecStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn out_ref<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, HecStatus> {
    ptr.as_mut()
        .ok_or_else(|| fail(HecStatus::NullPointer, format!("{what} is null")))
}

fn expect_len(got: usize, expected: usize, what: &str) -> Result<(), HecStatus> {
    if got != expected {
        return Err(fail(
            HecStatus::DimensionMismatch,
            format!("{what} has length {got}, expected {expected}"),
        ));
    }
    Ok(())
}

unsafe fn path_arg(ptr: *const c_char) -> Result<PathBuf, HecStatus> {
    if ptr.is_null() {
        return Err(fail(HecStatus::NullPointer, "path is null"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(HecStatus::InvalidArgument, "path is not valid UTF-8"))
}

fn finite(v: f64, what: &str) -> Result<f64, HecStatus> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(fail(
            HecStatus::InvalidArgument,
            format!("{what} must be finite"),
        ))
    }
}

/// Library version as a static NUL-terminated string. Do not free.
#[no_mangle]
pub extern "C" fn hec_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length
/// excluding the NUL, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn hec_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(msg) = slot.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Loads a detector bundle directory written by `hec-adapt train-detectors`.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hec_detector_load(
    dir: *const c_char,
    out: *mut *mut HecDetector,
) -> HecStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        let dir = path_arg(dir)?;
        let det = TrainedDetector::load(&dir).map_err(from_error)?;
        *out = Box::into_raw(Box::new(HecDetector(det)));
        Ok(())
    })
}

/// Releases a detector. Null is ignored.
///
/// # Safety
/// `detector` must come from [`hec_detector_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hec_detector_free(detector: *mut HecDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}

/// Number of trainable parameters, or 0 for a null handle.
///
/// # Safety
/// `detector` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hec_detector_param_count(detector: *const HecDetector) -> usize {
    detector.as_ref().map_or(0, |d| d.0.spec.param_count())
}

/// Inference FLOP used by the delay model, or 0 for a null handle.
///
/// # Safety
/// `detector` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hec_detector_flop(detector: *const HecDetector) -> usize {
    detector.as_ref().map_or(0, |d| d.0.flop())
}

/// Reconstructs one standardized week window (`len` must be 672) into `out`.
///
/// # Safety
/// `window` must hold `len` doubles and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hec_detector_reconstruct(
    detector: *const HecDetector,
    window: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> HecStatus {
    guard(|| {
        let det = detector
            .as_ref()
            .ok_or_else(|| fail(HecStatus::NullPointer, "detector is null"))?;
        expect_len(len, WEEK_LEN, "window")?;
        expect_len(out_len, WEEK_LEN, "out")?;
        let window = slice(window, len, "window")?;
        let out = slice_mut(out, out_len, "out")?;
        let rec = det.0.reconstruct(window).map_err(from_error)?;
        out.copy_from_slice(&rec);
        Ok(())
    })
}

/// Classifies the seven days of a standardized week window.
///
/// `anomalous` and `min_logpd` receive seven entries each (either may be
/// null). `confident` (nullable) is set to 1 when every flagged day clears
/// the confidence bar for `factor`, which must be at least 1.
///
/// # Safety
/// `window` must hold `len` doubles; non-null outputs must hold seven
/// entries (one for `confident`).
#[no_mangle]
pub unsafe extern "C" fn hec_detector_classify(
    detector: *const HecDetector,
    window: *const f64,
    len: usize,
    factor: f64,
    anomalous: *mut u8,
    min_logpd: *mut f64,
    confident: *mut u8,
) -> HecStatus {
    guard(|| {
        let det = detector
            .as_ref()
            .ok_or_else(|| fail(HecStatus::NullPointer, "detector is null"))?;
        expect_len(len, WEEK_LEN, "window")?;
        let window = slice(window, len, "window")?;
        let verdict = det.0.classify_days(window).map_err(from_error)?;
        let is_confident = verdict.is_confident(factor).map_err(from_error)?;
        if !anomalous.is_null() {
            let out = slice_mut(anomalous, DAYS_PER_WEEK, "anomalous")?;
            for (o, d) in out.iter_mut().zip(&verdict.days) {
                *o = u8::from(d.anomalous);
            }
        }
        if !min_logpd.is_null() {
            let out = slice_mut(min_logpd, DAYS_PER_WEEK, "min_logpd")?;
            for (o, d) in out.iter_mut().zip(&verdict.days) {
                *o = d.min_logpd;
            }
        }
        if let Some(c) = confident.as_mut() {
            *c = u8::from(is_confident);
        }
        Ok(())
    })
}

/// Loads a policy directory written by `hec-adapt train-policy`.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hec_policy_load(
    dir: *const c_char,
    out: *mut *mut HecPolicy,
) -> HecStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        let dir = path_arg(dir)?;
        let policy = PolicyNet::load(&dir).map_err(from_error)?;
        *out = Box::into_raw(Box::new(HecPolicy(policy)));
        Ok(())
    })
}

/// Releases a policy. Null is ignored.
///
/// # Safety
/// `policy` must come from [`hec_policy_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hec_policy_free(policy: *mut HecPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Number of arms (tiers), or 0 for a null handle.
///
/// # Safety
/// `policy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hec_policy_arms(policy: *const HecPolicy) -> usize {
    policy.as_ref().map_or(0, |p| p.0.arms())
}

unsafe fn state_arg(state: *const f64, len: usize) -> Result<PolicyState, HecStatus> {
    expect_len(len, STATE_DIM, "state")?;
    let s = slice(state, len, "state")?;
    if s.iter().any(|v| !v.is_finite()) {
        return Err(fail(
            HecStatus::InvalidArgument,
            "state has non-finite entries",
        ));
    }
    let mut arr = [0.0; STATE_DIM];
    arr.copy_from_slice(s);
    Ok(PolicyState(arr))
}

/// Softmax likelihood of each tier for a 28-value context.
///
/// # Safety
/// `state` must hold `len` doubles and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hec_policy_likelihoods(
    policy: *const HecPolicy,
    state: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> HecStatus {
    guard(|| {
        let p = policy
            .as_ref()
            .ok_or_else(|| fail(HecStatus::NullPointer, "policy is null"))?;
        let state = state_arg(state, len)?;
        expect_len(out_len, p.0.arms(), "out")?;
        let out = slice_mut(out, out_len, "out")?;
        out.copy_from_slice(&p.0.likelihoods(&state).0);
        Ok(())
    })
}

/// Greedy tier choice, written as a one-based tier number.
///
/// # Safety
/// `state` must hold `len` doubles and `tier` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hec_policy_select_tier(
    policy: *const HecPolicy,
    state: *const f64,
    len: usize,
    tier: *mut u32,
) -> HecStatus {
    guard(|| {
        let p = policy
            .as_ref()
            .ok_or_else(|| fail(HecStatus::NullPointer, "policy is null"))?;
        let state = state_arg(state, len)?;
        let tier = out_ref(tier, "tier")?;
        *tier = p.0.greedy(&state).tier() as u32;
        Ok(())
    })
}

/// Per-day (min, max, mean, std) context of a week window, day-major.
///
/// # Safety
/// `window` must hold `len` doubles and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hec_extract_state(
    window: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> HecStatus {
    guard(|| {
        expect_len(len, WEEK_LEN, "window")?;
        expect_len(out_len, STATE_DIM, "out")?;
        let window = slice(window, len, "window")?;
        let out = slice_mut(out, out_len, "out")?;
        let state = extract_state(window).map_err(from_error)?;
        out.copy_from_slice(state.as_slice());
        Ok(())
    })
}

/// Delay penalty `alpha * t / (1 + alpha * t)` for a delay in milliseconds.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hec_f_cost(t_ms: f64, alpha: f64, out: *mut f64) -> HecStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let t = finite(t_ms, "t_ms")?;
        if t < 0.0 {
            return Err(fail(
                HecStatus::InvalidArgument,
                "t_ms must be non-negative",
            ));
        }
        cost::validate_alpha(alpha).map_err(from_error)?;
        *out = cost::f_cost(t, alpha);
        Ok(())
    })
}

/// Accuracy minus the delay penalty.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hec_reward(
    accuracy: f64,
    t_ms: f64,
    alpha: f64,
    out: *mut f64,
) -> HecStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let accuracy = finite(accuracy, "accuracy")?;
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(fail(
                HecStatus::InvalidArgument,
                "accuracy must lie in [0, 1]",
            ));
        }
        let t = finite(t_ms, "t_ms")?;
        if t < 0.0 {
            return Err(fail(
                HecStatus::InvalidArgument,
                "t_ms must be non-negative",
            ));
        }
        cost::validate_alpha(alpha).map_err(from_error)?;
        let delay = DelayBreakdown {
            t_comm_ms: 0.0,
            t_comp_ms: t,
            total_ms: t,
        };
        *out = cost::reward(accuracy, &delay, alpha);
        Ok(())
    })
}

/// Latency plus compute delay of a `model_flop` model on a tier.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hec_t_total_ms(
    model_flop: f64,
    tier_flops: f64,
    latency_ms: f64,
    out: *mut f64,
) -> HecStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let flop = finite(model_flop, "model_flop")?;
        if flop < 0.0 {
            return Err(fail(
                HecStatus::InvalidArgument,
                "model_flop must be non-negative",
            ));
        }
        let tier = TierSpec {
            flops: tier_flops,
            latency_ms,
        };
        tier.validate().map_err(from_error)?;
        *out = cost::t_total(flop, &tier).total_ms;
        Ok(())
    })
}
