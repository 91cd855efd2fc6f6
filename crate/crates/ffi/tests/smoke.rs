//! Exercises the C ABI from Rust: handle lifecycle, status codes, values.

use std::ffi::{CStr, CString};
use std::ptr;

use chanest_ffi::*;

fn new_channel(spec: &str) -> *mut chanest_channel_t {
    let spec = CString::new(spec).unwrap();
    let mut handle: *mut chanest_channel_t = ptr::null_mut();
    let code = chanest_channel_new(spec.as_ptr(), &mut handle);
    assert_eq!(code, CHANEST_OK, "last error: {}", last_error());
    assert!(!handle.is_null());
    handle
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(chanest_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn bound_values_through_the_abi() {
    let handle = new_channel("channel=depolarizing-canonical\ninput=basis:0");
    assert_eq!(chanest_channel_dim(handle), 2);
    let mut value = 0.0;
    assert_eq!(chanest_kraus_bound(handle, 0.5, &mut value), CHANEST_OK);
    assert!((value - 2.0).abs() < 1e-9, "bound {value}");
    assert_eq!(chanest_sld_fisher(handle, 0.5, &mut value), CHANEST_OK);
    assert!((value - 2.0).abs() < 1e-7);
    // Canonical decomposition of the textbook form matches.
    let textbook = new_channel("channel=depolarizing\ninput=basis:0");
    assert_eq!(chanest_canonical_bound(textbook, 0.5, &mut value), CHANEST_OK);
    assert!((value - 2.0).abs() < 1e-7, "canonical bound {value}");
    chanest_channel_free(textbook);
    chanest_channel_free(handle);
}

#[test]
fn classical_fisher_and_simulation() {
    let handle = new_channel("channel=dephasing\ninput=plus");
    let povm = CString::new("x-basis").unwrap();
    let mut value = 0.0;
    assert_eq!(
        chanest_classical_fisher(handle, povm.as_ptr(), 0.5, &mut value),
        CHANEST_OK
    );
    let expect = 4.0 / (2.0_f64).exp_m1().mul_add(0.0, (2.0_f64).exp() - 1.0);
    assert!((value - 4.0 / ((2.0_f64).exp() - 1.0)).abs() < 1e-12, "{value} vs {expect}");

    let mut report = chanest_estimation_report_t::default();
    let code = chanest_crlb_experiment(handle, povm.as_ptr(), 0.5, 2_000, 30, 9, &mut report);
    assert_eq!(code, CHANEST_OK, "last error: {}", last_error());
    assert_eq!(report.n_shots, 2_000);
    assert_eq!(report.n_trials, 30);
    assert!(report.crlb > 0.0);
    assert!(report.ratio > 0.0);

    // Determinism through the ABI.
    let mut again = chanest_estimation_report_t::default();
    chanest_crlb_experiment(handle, povm.as_ptr(), 0.5, 2_000, 30, 9, &mut again);
    assert_eq!(report.empirical_variance, again.empirical_variance);
    assert_eq!(report.bias, again.bias);
    chanest_channel_free(handle);
}

#[test]
fn error_paths_and_codes() {
    let mut handle: *mut chanest_channel_t = ptr::null_mut();
    let bad = CString::new("channel=warp-drive\ninput=basis:0").unwrap();
    assert_eq!(
        chanest_channel_new(bad.as_ptr(), &mut handle),
        CHANEST_ERR_INVALID
    );
    assert!(last_error().contains("warp-drive"));
    assert!(handle.is_null());

    assert_eq!(
        chanest_channel_new(ptr::null(), &mut handle),
        CHANEST_ERR_INVALID
    );

    let channel = new_channel("channel=depolarizing\ninput=basis:0");
    let mut value = 0.0;
    // Out-of-domain parameter is a validation error.
    assert_eq!(
        chanest_kraus_bound(channel, 5.0, &mut value),
        CHANEST_ERR_INVALID
    );
    assert_eq!(
        chanest_kraus_bound(ptr::null(), 0.5, &mut value),
        CHANEST_ERR_INVALID
    );
    chanest_channel_free(channel);
    chanest_channel_free(ptr::null_mut());
}

#[test]
fn generated_header_exists_and_names_the_surface() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/chanest.h");
    let text = std::fs::read_to_string(header).expect("header generated at build time");
    for symbol in [
        "chanest_channel_new",
        "chanest_channel_free",
        "chanest_kraus_bound",
        "chanest_canonical_bound",
        "chanest_sld_fisher",
        "chanest_classical_fisher",
        "chanest_crlb_experiment",
        "chanest_last_error",
        "chanest_estimation_report_t",
        "CHANEST_H",
    ] {
        assert!(text.contains(symbol), "header missing {symbol}");
    }
}
