//! C ABI over the `gridcascade` library.
//!
//! Cases and reports are opaque handles owned by the caller and released
//! with `gc_case_free` / `gc_report_free`. Every fallible call returns a
//! `GcStatus`; on failure `gc_last_error_message` describes the error for
//! the calling thread. Node numbers are the case's external labels.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use gridcascade::dynamics::{simulate_cascade, CascadeReport, ControlConfig, Outcome};
use gridcascade::error::{ErrorCategory, GridError};
use gridcascade::ingest::{
    apply_overrides, builtin_five_node, parse_grid_file, parse_ieee_cdf, CdfOptions, GridCase,
    Overrides,
};
use gridcascade::spectral::critical_gain;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Solver = 5,
    Integration = 6,
    Io = 7,
    OutOfRange = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcControlMode {
    Off = 0,
    Full = 1,
    Pinning = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcOutcome {
    Settled = 0,
    HorizonExhausted = 1,
    IslandedUnbalanced = 2,
}

/// Opaque grid case.
pub struct GcCase(GridCase);

/// Opaque cascade result; keeps the labels of the case it came from.
pub struct GcReport {
    report: CascadeReport,
    labels: Vec<u32>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: GcStatus, message: &str) -> GcStatus {
    set_error(message);
    status
}

fn grid_error(e: GridError) -> GcStatus {
    let status = match e.category() {
        ErrorCategory::Parse => GcStatus::Parse,
        ErrorCategory::Validation => GcStatus::Validation,
        ErrorCategory::Solver => GcStatus::Solver,
        ErrorCategory::Integration => GcStatus::Integration,
        ErrorCategory::Io => GcStatus::Io,
    };
    fail(status, &e.to_string())
}

fn guard(f: impl FnOnce() -> GcStatus) -> GcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == GcStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(GcStatus::Panic, "internal panic"),
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, GcStatus> {
    if p.is_null() {
        return Err(fail(GcStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(GcStatus::InvalidUtf8, "string is not UTF-8"))
}

unsafe fn emit_case(case: GridCase, out: *mut *mut GcCase) -> GcStatus {
    *out = Box::into_raw(Box::new(GcCase(case)));
    GcStatus::Ok
}

macro_rules! non_null {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            return fail(GcStatus::NullPointer, concat!("null argument: ", stringify!($p)));
        })+
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn gc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn gc_case_builtin_five_node(out: *mut *mut GcCase) -> GcStatus {
    non_null!(out);
    guard(|| emit_case(builtin_five_node(), out))
}

/// Parses a case in the native TOML format.
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_case_from_native(text_ptr: *const c_char, out: *mut *mut GcCase) -> GcStatus {
    non_null!(out);
    guard(|| match text(text_ptr) {
        Err(s) => s,
        Ok(t) => match parse_grid_file(t) {
            Ok(case) => emit_case(case, out),
            Err(e) => grid_error(e),
        },
    })
}

/// Parses an IEEE common-format file with default options (K = 1/x, swing
/// bus absorbs the imbalance, I = 1, γ = 0.1, α = 0.6).
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_case_from_cdf(text_ptr: *const c_char, out: *mut *mut GcCase) -> GcStatus {
    non_null!(out);
    guard(|| match text(text_ptr) {
        Err(s) => s,
        Ok(t) => match parse_ieee_cdf(t, &CdfOptions::default()) {
            Ok(parsed) => emit_case(parsed.case, out),
            Err(e) => grid_error(e),
        },
    })
}

/// Applies a parameter overrides document in place.
///
/// # Safety
/// `case` must be a live handle; `text` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gc_case_apply_overrides(case: *mut GcCase, text_ptr: *const c_char) -> GcStatus {
    non_null!(case);
    guard(|| {
        let t = match text(text_ptr) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let result = Overrides::parse(t).and_then(|o| apply_overrides(&(*case).0, &o));
        match result {
            Ok(updated) => {
                (*case).0 = updated;
                GcStatus::Ok
            }
            Err(e) => grid_error(e),
        }
    })
}

/// # Safety
/// `case` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gc_case_free(case: *mut GcCase) {
    if !case.is_null() {
        drop(Box::from_raw(case));
    }
}

/// # Safety
/// `case` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gc_case_node_count(case: *const GcCase) -> usize {
    case.as_ref().map_or(0, |c| c.0.node_count())
}

/// # Safety
/// `case` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gc_case_line_count(case: *const GcCase) -> usize {
    case.as_ref().map_or(0, |c| c.0.topology.line_count())
}

/// Endpoints of line `index` in the case's sorted line order.
///
/// # Safety
/// `case` must be a live handle; `from` and `to` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_case_line(case: *const GcCase, index: usize, from: *mut u32, to: *mut u32) -> GcStatus {
    non_null!(case, from, to);
    guard(|| {
        let c = &(*case).0;
        match c.topology.lines().get(index) {
            None => fail(GcStatus::OutOfRange, "line index out of range"),
            Some(l) => {
                let (a, b) = c.line_labels(l.key);
                *from = a;
                *to = b;
                GcStatus::Ok
            }
        }
    })
}

/// Runs the dynamic cascade started by removing line `(from, to)`.
/// `pinned` lists node labels and is read only in pinning mode.
///
/// # Safety
/// `case` must be a live handle; `pinned` must point to `pinned_len` values
/// (or be null when `pinned_len` is 0); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_simulate(
    case: *const GcCase,
    from: u32,
    to: u32,
    mode: GcControlMode,
    gain: f64,
    pinned: *const u32,
    pinned_len: usize,
    out: *mut *mut GcReport,
) -> GcStatus {
    non_null!(case, out);
    if pinned_len > 0 && pinned.is_null() {
        return fail(GcStatus::NullPointer, "null pinned list");
    }
    guard(|| {
        let c = &(*case).0;
        let n = c.node_count();
        let pins: &[u32] = if pinned_len == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(pinned, pinned_len)
        };
        let run = || -> Result<CascadeReport, GridError> {
            let fault = c.line_key(from, to)?;
            let control = match mode {
                GcControlMode::Off => ControlConfig::off(n),
                GcControlMode::Full => ControlConfig::full(n, gain)?,
                GcControlMode::Pinning => {
                    let idx = pins.iter().map(|&l| c.index_of(l)).collect::<Result<Vec<_>, _>>()?;
                    ControlConfig::pinning(n, gain, idx)?
                }
            };
            simulate_cascade(&c.topology, &c.params, fault, &c.sim, &control)
        };
        match run() {
            Ok(report) => {
                *out = Box::into_raw(Box::new(GcReport {
                    report,
                    labels: c.labels.clone(),
                }));
                GcStatus::Ok
            }
            Err(e) => grid_error(e),
        }
    })
}

/// Critical full-control gain of the grid with line `(from, to)` removed.
///
/// # Safety
/// `case` must be a live handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_critical_gain(case: *const GcCase, from: u32, to: u32, value: *mut f64) -> GcStatus {
    non_null!(case, value);
    guard(|| {
        let c = &(*case).0;
        let result = c
            .line_key(from, to)
            .and_then(|k| c.topology.remove_line(k))
            .and_then(|post| critical_gain(&post, c.linear_params()?));
        match result {
            Ok(g) => {
                *value = g.value;
                GcStatus::Ok
            }
            Err(e) => grid_error(e),
        }
    })
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gc_report_free(report: *mut GcReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Number of lines that failed after the initial fault.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gc_report_n_c(report: *const GcReport) -> usize {
    report.as_ref().map_or(0, |r| r.report.n_c)
}

/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gc_report_outcome(report: *const GcReport) -> GcOutcome {
    match report.as_ref().map(|r| r.report.outcome) {
        Some(Outcome::Settled) | None => GcOutcome::Settled,
        Some(Outcome::HorizonExhausted) => GcOutcome::HorizonExhausted,
        Some(Outcome::IslandedUnbalanced) => GcOutcome::IslandedUnbalanced,
    }
}

/// Time at which the run settled; `OutOfRange` when it never did.
///
/// # Safety
/// `report` must be a live handle; `time` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_report_settle_time(report: *const GcReport, time: *mut f64) -> GcStatus {
    non_null!(report, time);
    match (*report).report.settle_time {
        Some(t) => {
            *time = t;
            GcStatus::Ok
        }
        None => fail(GcStatus::OutOfRange, "run did not settle"),
    }
}

/// Trip `index` in trip order: endpoints and trip time.
///
/// # Safety
/// `report` must be a live handle; the output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_report_trip(
    report: *const GcReport,
    index: usize,
    from: *mut u32,
    to: *mut u32,
    time: *mut f64,
) -> GcStatus {
    non_null!(report, from, to, time);
    let r = &*report;
    match r.report.tripped.get(index) {
        None => fail(GcStatus::OutOfRange, "trip index out of range"),
        Some(t) => {
            let (a, b) = (r.labels[t.line.lo()], r.labels[t.line.hi()]);
            *from = a.min(b);
            *to = a.max(b);
            *time = t.mark.value();
            GcStatus::Ok
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_codes_match_cli_exit_codes() {
        for (cat, status) in [
            (ErrorCategory::Parse, GcStatus::Parse),
            (ErrorCategory::Validation, GcStatus::Validation),
            (ErrorCategory::Solver, GcStatus::Solver),
            (ErrorCategory::Integration, GcStatus::Integration),
            (ErrorCategory::Io, GcStatus::Io),
        ] {
            assert_eq!(cat.exit_code(), status as i32);
        }
    }
}
