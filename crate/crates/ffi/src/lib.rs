//! C ABI over the chanest library: opaque channel handles, integer status
//! codes, and plain structs for reports.
//!
//! Conventions:
//! - Every fallible call returns a status code (`CHANEST_OK` = 0); outputs go
//!   through pointers. Codes mirror the CLI exit codes: 2 validation,
//!   3 numeric/runtime, 4 divergent Fisher term, 1 internal panic.
//! - `chanest_last_error` returns a thread-local message for the most recent
//!   failure on the calling thread; the pointer is valid until the next
//!   failing call on that thread.
//! - Channels are created from the same flat `key=value` text the CLI
//!   accepts (keys: channel, n_max, dim, theta_max, extend, input) and must
//!   be released with `chanest_channel_free`.

#![allow(non_camel_case_types, clippy::not_unsafe_ptr_arg_deref)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use chanest::canonical::canonical_decompose;
use chanest::channel::{ParamKrausFamily, QuantumState};
use chanest::cli::resolve_povm;
use chanest::config::{parse_kv, ChannelSpec, InputSpec, PovmSpec};
use chanest::error::Error;
use chanest::estimate::crlb_experiment;
use chanest::fisher::{classical_fisher, kraus_bound, kraus_bound_frame, sld_fisher};

pub const CHANEST_OK: c_int = 0;
pub const CHANEST_ERR_PANIC: c_int = 1;
pub const CHANEST_ERR_INVALID: c_int = 2;
pub const CHANEST_ERR_NUMERIC: c_int = 3;
pub const CHANEST_ERR_DIVERGENT: c_int = 4;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = RefCell::new(None);
}

fn set_error(message: &str) {
    let cstring = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn code_of(err: &Error) -> c_int {
    err.exit_code() as c_int
}

/// Opaque handle: a channel family together with its probe input state.
pub struct chanest_channel_t {
    family: ParamKrausFamily,
    input: QuantumState,
}

/// Summary statistics of a Monte Carlo estimation run.
#[repr(C)]
#[derive(Default, Clone, Copy)]
pub struct chanest_estimation_report_t {
    pub n_shots: u64,
    pub n_trials: u64,
    pub empirical_variance: f64,
    pub crlb: f64,
    pub ratio: f64,
    pub bias: f64,
}

fn guard<F: FnOnce() -> c_int>(body: F) -> c_int {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            CHANEST_ERR_PANIC
        }
    }
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

/// Message for the most recent failure on this thread, or an empty string.
#[no_mangle]
pub extern "C" fn chanest_last_error() -> *const c_char {
    static EMPTY: &[u8] = b"\0";
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|s| s.as_ptr())
            .unwrap_or(EMPTY.as_ptr() as *const c_char)
    })
}

/// Creates a channel handle from a flat key=value spec, e.g.
/// `"channel=damping\nn_max=2\ninput=basis:2"`.
#[no_mangle]
pub extern "C" fn chanest_channel_new(
    spec: *const c_char,
    out: *mut *mut chanest_channel_t,
) -> c_int {
    guard(|| {
        let Some(text) = (unsafe { cstr(spec) }) else {
            set_error("spec pointer is null or not UTF-8");
            return CHANEST_ERR_INVALID;
        };
        if out.is_null() {
            set_error("output pointer is null");
            return CHANEST_ERR_INVALID;
        }
        let build = || -> Result<chanest_channel_t, Error> {
            let kv = parse_kv(text)?;
            let family = ChannelSpec::from_kv(&kv)?.build()?;
            let input_spec = kv
                .get("input")
                .ok_or_else(|| Error::InvalidConfig("missing 'input' key".into()))?;
            let input = InputSpec::parse(input_spec)?.build(family.dim())?;
            Ok(chanest_channel_t { family, input })
        };
        match build() {
            Ok(channel) => {
                unsafe { *out = Box::into_raw(Box::new(channel)) };
                CHANEST_OK
            }
            Err(err) => {
                set_error(&err.to_string());
                code_of(&err)
            }
        }
    })
}

/// Releases a handle created by `chanest_channel_new`. Null is a no-op.
#[no_mangle]
pub extern "C" fn chanest_channel_free(channel: *mut chanest_channel_t) {
    if !channel.is_null() {
        drop(unsafe { Box::from_raw(channel) });
    }
}

/// Hilbert-space dimension of the channel.
#[no_mangle]
pub extern "C" fn chanest_channel_dim(channel: *const chanest_channel_t) -> usize {
    if channel.is_null() {
        return 0;
    }
    unsafe { &*channel }.family.dim()
}

fn with_channel<F>(channel: *const chanest_channel_t, out: *mut f64, body: F) -> c_int
where
    F: FnOnce(&chanest_channel_t) -> Result<f64, Error>,
{
    guard(|| {
        if channel.is_null() || out.is_null() {
            set_error("null pointer argument");
            return CHANEST_ERR_INVALID;
        }
        match body(unsafe { &*channel }) {
            Ok(value) => {
                unsafe { *out = value };
                CHANEST_OK
            }
            Err(err) => {
                set_error(&err.to_string());
                code_of(&err)
            }
        }
    })
}

/// Fisher-information bound of the channel's own Kraus set at `theta`.
#[no_mangle]
pub extern "C" fn chanest_kraus_bound(
    channel: *const chanest_channel_t,
    theta: f64,
    out: *mut f64,
) -> c_int {
    with_channel(channel, out, |ch| kraus_bound(&ch.family, theta, &ch.input))
}

/// Fisher-information bound of the canonical decomposition at `theta`
/// (requires a pure input state).
#[no_mangle]
pub extern "C" fn chanest_canonical_bound(
    channel: *const chanest_channel_t,
    theta: f64,
    out: *mut f64,
) -> c_int {
    with_channel(channel, out, |ch| {
        let frame = canonical_decompose(&ch.family, theta, &ch.input)?;
        kraus_bound_frame(&frame, &ch.input)
    })
}

/// Quantum Fisher information through the symmetric logarithmic derivative.
#[no_mangle]
pub extern "C" fn chanest_sld_fisher(
    channel: *const chanest_channel_t,
    theta: f64,
    out: *mut f64,
) -> c_int {
    with_channel(channel, out, |ch| sld_fisher(&ch.family, theta, &ch.input))
}

/// Classical Fisher information of a named POVM
/// (z-basis, x-basis, bell-basis, photon-number, position, eigenframe,
/// file:PATH) at `theta`.
#[no_mangle]
pub extern "C" fn chanest_classical_fisher(
    channel: *const chanest_channel_t,
    povm: *const c_char,
    theta: f64,
    out: *mut f64,
) -> c_int {
    let Some(povm_text) = (unsafe { cstr(povm) }) else {
        set_error("povm pointer is null or not UTF-8");
        return CHANEST_ERR_INVALID;
    };
    let povm_text = povm_text.to_string();
    with_channel(channel, out, move |ch| {
        let spec = PovmSpec::parse(&povm_text)?;
        let povm = resolve_povm(&spec, &ch.family, theta, &ch.input)?;
        classical_fisher(&povm, &ch.family, theta, &ch.input)
    })
}

/// Runs a deterministic Monte Carlo maximum-likelihood experiment and fills
/// `report`.
#[no_mangle]
pub extern "C" fn chanest_crlb_experiment(
    channel: *const chanest_channel_t,
    povm: *const c_char,
    theta: f64,
    shots: u64,
    trials: u64,
    seed: u64,
    report: *mut chanest_estimation_report_t,
) -> c_int {
    guard(|| {
        if channel.is_null() || report.is_null() {
            set_error("null pointer argument");
            return CHANEST_ERR_INVALID;
        }
        let Some(povm_text) = (unsafe { cstr(povm) }) else {
            set_error("povm pointer is null or not UTF-8");
            return CHANEST_ERR_INVALID;
        };
        let ch = unsafe { &*channel };
        let run = || -> Result<chanest_estimation_report_t, Error> {
            let spec = PovmSpec::parse(povm_text)?;
            let povm = resolve_povm(&spec, &ch.family, theta, &ch.input)?;
            let full = crlb_experiment(&povm, &ch.family, theta, &ch.input, shots, trials, seed)?;
            Ok(chanest_estimation_report_t {
                n_shots: full.n_shots,
                n_trials: full.n_trials,
                empirical_variance: full.empirical_variance,
                crlb: full.crlb,
                ratio: full.ratio,
                bias: full.bias,
            })
        };
        match run() {
            Ok(summary) => {
                unsafe { *report = summary };
                CHANEST_OK
            }
            Err(err) => {
                set_error(&err.to_string());
                code_of(&err)
            }
        }
    })
}
