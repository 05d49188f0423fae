use std::ffi::{CStr, CString};
use std::ptr;

use gridcascade_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(gc_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn five_node_cascade_through_the_abi() {
    unsafe {
        let mut case = ptr::null_mut();
        assert_eq!(gc_case_builtin_five_node(&mut case), GcStatus::Ok);
        assert_eq!(gc_case_node_count(case), 5);
        assert_eq!(gc_case_line_count(case), 7);
        let (mut a, mut b) = (0, 0);
        assert_eq!(gc_case_line(case, 4, &mut a, &mut b), GcStatus::Ok);
        assert_eq!((a, b), (2, 4));
        assert_eq!(gc_case_line(case, 7, &mut a, &mut b), GcStatus::OutOfRange);

        let mut report = ptr::null_mut();
        assert_eq!(
            gc_simulate(case, 2, 4, GcControlMode::Off, 0.0, ptr::null(), 0, &mut report),
            GcStatus::Ok
        );
        assert_eq!(gc_report_n_c(report), 5);
        assert_eq!(gc_report_outcome(report), GcOutcome::IslandedUnbalanced);
        let mut t = 0.0;
        assert_eq!(gc_report_trip(report, 0, &mut a, &mut b, &mut t), GcStatus::Ok);
        assert_eq!((a, b), (4, 5));
        assert!(t > 0.0);
        gc_report_free(report);

        let pinned = [2u32, 5];
        let mut pin = ptr::null_mut();
        assert_eq!(
            gc_simulate(case, 2, 4, GcControlMode::Pinning, 20.0, pinned.as_ptr(), 2, &mut pin),
            GcStatus::Ok
        );
        assert_eq!(gc_report_n_c(pin), 0);
        gc_report_free(pin);

        let mut k = 0.0;
        assert_eq!(gc_critical_gain(case, 2, 3, &mut k), GcStatus::Ok);
        assert!((k - 1.7555).abs() < 5e-4);
        gc_case_free(case);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut case = ptr::null_mut();
        let bad = CString::new("format = = 1").unwrap();
        assert_eq!(gc_case_from_native(bad.as_ptr(), &mut case), GcStatus::Parse);
        assert!(case.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(gc_case_builtin_five_node(&mut case), GcStatus::Ok);
        assert!(last_error().is_empty());
        let mut report = ptr::null_mut();
        assert_eq!(
            gc_simulate(case, 1, 4, GcControlMode::Full, 1.0, ptr::null(), 0, &mut report),
            GcStatus::Validation
        );
        assert!(last_error().contains("not found") || !last_error().is_empty());
        assert_eq!(
            gc_simulate(case, 1, 2, GcControlMode::Full, -1.0, ptr::null(), 0, &mut report),
            GcStatus::Validation
        );
        let overrides = CString::new("[[nodes]]\nid = 999\ninertia = 1.0\n").unwrap();
        assert_eq!(gc_case_apply_overrides(case, overrides.as_ptr()), GcStatus::Validation);
        assert_eq!(gc_case_from_cdf(ptr::null(), &mut case), GcStatus::NullPointer);
        gc_case_free(case);
        gc_case_free(ptr::null_mut());
    }
}

#[test]
fn cdf_case_with_sidecar() {
    let dir = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let cdf = CString::new(std::fs::read_to_string(dir.join("ieee118cdf.txt")).unwrap()).unwrap();
    let sidecar = CString::new(std::fs::read_to_string(dir.join("ieee118_inertia.toml")).unwrap()).unwrap();
    unsafe {
        let mut case = ptr::null_mut();
        assert_eq!(gc_case_from_cdf(cdf.as_ptr(), &mut case), GcStatus::Ok);
        assert_eq!(gc_case_node_count(case), 118);
        assert_eq!(gc_case_apply_overrides(case, sidecar.as_ptr()), GcStatus::Ok);
        let mut report = ptr::null_mut();
        assert_eq!(
            gc_simulate(case, 23, 25, GcControlMode::Full, 0.5, ptr::null(), 0, &mut report),
            GcStatus::Ok
        );
        assert_eq!(gc_report_n_c(report), 0);
        let mut t = 0.0;
        assert_eq!(gc_report_settle_time(report, &mut t), GcStatus::Ok);
        gc_report_free(report);
        gc_case_free(case);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(
        std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/gridcascade.h"),
    )
    .unwrap();
    for name in ["gc_simulate", "gc_case_free", "gc_last_error_message", "typedef struct GcCase GcCase", "GC_STATUS_OK"] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
