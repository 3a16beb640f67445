//! C ABI for the bellsim simulator.
//!
//! # Handles
//!
//! Experiments and Monte Carlo results are opaque heap objects. Create an
//! experiment with `bellsim_experiment_new` or `bellsim_experiment_from_json`,
//! run it with `bellsim_experiment_run`, and release both with the matching
//! `*_free` function. Strings returned by the library are freed with
//! `bellsim_string_free`.
//!
//! # Errors
//!
//! Fallible calls return a [`BellsimStatus`]. On anything other than
//! `BELLSIM_STATUS_OK`, `bellsim_last_error` returns a description that stays
//! valid until the next call on the same thread. Panics never cross the
//! boundary; they surface as `BELLSIM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bellsim::config::{parse_config, to_json};
use bellsim::engine::{run_chsh, Lanes};
use bellsim::exact::{sweep_common_part, sweep_pair};
use bellsim::inequality::{self, run_suite, Suite};
use bellsim::lhv::ModelSpec;
use bellsim::report::{exact_section, RunReport};
use bellsim::{ChshEstimate, ChshSettings, CoincidenceWindow, ExperimentConfig, RunSeed};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A conditional correlation is undefined because a pair never coincided.
    NoCoincidence = 3,
    /// The operation needs a piecewise-constant model.
    NotPiecewise = 4,
    /// A property suite found a counterexample.
    CheckFailed = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellsimModelKind {
    Octant = 0,
    Classic = 1,
    Qm = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellsimSuite {
    Theorem2 = 0,
    ProofChain = 1,
    DeltaGamma = 2,
    Saturation = 3,
}

/// Exact statistics for one setting pair.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BellsimPairStatistics {
    pub p_coincidence: f64,
    pub p_equal_and_coincident: f64,
    pub p_unequal_and_coincident: f64,
    /// Meaningful only when `has_correlation` is true.
    pub conditional_correlation: f64,
    pub has_correlation: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BellsimBounds {
    pub delta_lb: f64,
    pub s_bound: f64,
}

/// Opaque experiment configuration.
pub struct BellsimExperiment {
    config: ExperimentConfig,
}

/// Opaque Monte Carlo result.
pub struct BellsimChshResult {
    estimate: ChshEstimate,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: BellsimStatus, msg: impl Into<String>) -> BellsimStatus {
    set_error(msg);
    status
}

/// Run `f`, converting panics into `BELLSIM_STATUS_PANIC`.
fn guard(f: impl FnOnce() -> BellsimStatus) -> BellsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(BellsimStatus::Panic, "internal panic"),
    }
}

fn boxed<T>(value: T, out: *mut *mut T) -> BellsimStatus {
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    BellsimStatus::Ok
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Description of the last error on this thread; empty if none. Do not free.
#[no_mangle]
pub extern "C" fn bellsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bellsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Build an experiment from explicit parameters. `l` is ignored unless `model`
/// is `BELLSIM_MODEL_KIND_OCTANT`. Angles are radians.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn bellsim_experiment_new(
    model: BellsimModelKind,
    l: f64,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    delta_t: f64,
    trials_per_pair: u64,
    seed: u64,
    stream: u64,
    out: *mut *mut BellsimExperiment,
) -> BellsimStatus {
    guard(|| {
        if out.is_null() {
            return fail(BellsimStatus::NullPointer, "out is null");
        }
        let model = match model {
            BellsimModelKind::Octant => ModelSpec::Octant { l },
            BellsimModelKind::Classic => ModelSpec::Classic,
            BellsimModelKind::Qm => ModelSpec::Qm,
        };
        if let Err(e) = model.build() {
            return fail(BellsimStatus::InvalidArgument, e.to_string());
        }
        let settings = match ChshSettings::new(a, b, c, d) {
            Ok(s) => s,
            Err(e) => return fail(BellsimStatus::InvalidArgument, e.to_string()),
        };
        let window = match CoincidenceWindow::new(delta_t) {
            Ok(w) => w,
            Err(e) => return fail(BellsimStatus::InvalidArgument, e.to_string()),
        };
        if trials_per_pair == 0 {
            return fail(BellsimStatus::InvalidArgument, "trials_per_pair must be >= 1");
        }
        let config = ExperimentConfig {
            model,
            settings,
            window,
            trials_per_pair,
            seed: RunSeed::new(seed, stream),
        };
        boxed(BellsimExperiment { config }, out)
    })
}

/// Build an experiment from the JSON configuration format used by the CLI.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bellsim_experiment_from_json(
    json: *const c_char,
    out: *mut *mut BellsimExperiment,
) -> BellsimStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(BellsimStatus::NullPointer, "json or out is null");
        }
        let Ok(text) = unsafe { CStr::from_ptr(json) }.to_str() else {
            return fail(BellsimStatus::InvalidArgument, "config is not valid UTF-8");
        };
        match parse_config(text) {
            Ok(config) => boxed(BellsimExperiment { config }, out),
            Err(e) => fail(BellsimStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Canonical JSON form of the configuration; free with `bellsim_string_free`.
/// Returns null if `experiment` is null.
///
/// # Safety
/// `experiment` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bellsim_experiment_to_json(experiment: *const BellsimExperiment) -> *mut c_char {
    match unsafe { experiment.as_ref() } {
        Some(e) => catch_unwind(|| into_c_string(to_json(&e.config))).unwrap_or(ptr::null_mut()),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `experiment` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bellsim_experiment_free(experiment: *mut BellsimExperiment) {
    if !experiment.is_null() {
        drop(unsafe { Box::from_raw(experiment) });
    }
}

/// Monte Carlo run over the four setting pairs. `lanes` = 0 uses the
/// environment default (`BELLSIM_THREADS`). Results do not depend on `lanes`.
///
/// # Safety
/// `experiment` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bellsim_experiment_run(
    experiment: *const BellsimExperiment,
    lanes: u32,
    out: *mut *mut BellsimChshResult,
) -> BellsimStatus {
    guard(|| {
        let Some(e) = (unsafe { experiment.as_ref() }) else {
            return fail(BellsimStatus::NullPointer, "experiment is null");
        };
        if out.is_null() {
            return fail(BellsimStatus::NullPointer, "out is null");
        }
        let lanes = if lanes == 0 {
            Lanes::from_env()
        } else {
            Lanes::new(lanes as usize)
        };
        match run_chsh(&e.config, lanes) {
            Ok(estimate) => boxed(BellsimChshResult { estimate }, out),
            Err(err) => fail(BellsimStatus::InvalidArgument, err.to_string()),
        }
    })
}

/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bellsim_chsh_result_free(result: *mut BellsimChshResult) {
    if !result.is_null() {
        drop(unsafe { Box::from_raw(result) });
    }
}

unsafe fn read_result<'a>(result: *const BellsimChshResult, out: *mut f64) -> Result<&'a ChshEstimate, BellsimStatus> {
    match unsafe { result.as_ref() } {
        Some(r) if !out.is_null() => Ok(&r.estimate),
        _ => Err(fail(BellsimStatus::NullPointer, "result or out is null")),
    }
}

fn write_opt(value: Option<f64>, out: *mut f64, what: &str) -> BellsimStatus {
    match value {
        Some(v) => {
            // SAFETY: checked non-null by `read_result`.
            unsafe { *out = v };
            BellsimStatus::Ok
        }
        None => fail(
            BellsimStatus::NoCoincidence,
            format!("{what} undefined: a pair had no coincidences"),
        ),
    }
}

/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bellsim_chsh_s_value(result: *const BellsimChshResult, out: *mut f64) -> BellsimStatus {
    match unsafe { read_result(result, out) } {
        Ok(r) => write_opt(r.s_value, out, "S"),
        Err(s) => s,
    }
}

/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bellsim_chsh_s_std_error(result: *const BellsimChshResult, out: *mut f64) -> BellsimStatus {
    match unsafe { read_result(result, out) } {
        Ok(r) => write_opt(r.s_std_error, out, "S std error"),
        Err(s) => s,
    }
}

/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bellsim_chsh_gamma_min(result: *const BellsimChshResult, out: *mut f64) -> BellsimStatus {
    match unsafe { read_result(result, out) } {
        Ok(r) => write_opt(Some(r.gamma_min), out, "gamma"),
        Err(s) => s,
    }
}

/// Conditional correlation of pair 0..3 (AC', AD', BC', BD').
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bellsim_chsh_pair_correlation(
    result: *const BellsimChshResult,
    pair: u32,
    out: *mut f64,
) -> BellsimStatus {
    match unsafe { read_result(result, out) } {
        Ok(_) if pair > 3 => fail(BellsimStatus::InvalidArgument, format!("pair index {pair} > 3")),
        Ok(r) => write_opt(r.pairs[pair as usize].e_conditional, out, "correlation"),
        Err(s) => s,
    }
}

/// Observed coincidence fraction of pair 0..3.
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bellsim_chsh_pair_gamma(
    result: *const BellsimChshResult,
    pair: u32,
    out: *mut f64,
) -> BellsimStatus {
    match unsafe { read_result(result, out) } {
        Ok(_) if pair > 3 => fail(BellsimStatus::InvalidArgument, format!("pair index {pair} > 3")),
        Ok(r) => write_opt(Some(r.pairs[pair as usize].gamma_hat), out, "gamma"),
        Err(s) => s,
    }
}

/// Full JSON run report (same schema as `bellsim simulate`). With `canonical`
/// the timestamp is omitted. Free with `bellsim_string_free`; null on error.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn bellsim_chsh_report_json(
    experiment: *const BellsimExperiment,
    result: *const BellsimChshResult,
    canonical: bool,
) -> *mut c_char {
    let (Some(e), Some(r)) = (unsafe { experiment.as_ref() }, unsafe { result.as_ref() }) else {
        set_error("experiment or result is null");
        return ptr::null_mut();
    };
    catch_unwind(|| {
        let exact = e
            .config
            .model
            .build()
            .ok()
            .and_then(|m| exact_section(&e.config, &m).ok().flatten());
        into_c_string(RunReport::new(&e.config, &r.estimate, exact, canonical).to_json())
    })
    .unwrap_or(ptr::null_mut())
}

/// Exact statistics of pair 0..3 for a piecewise-constant model.
///
/// # Safety
/// `experiment` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn bellsim_exact_pair(
    experiment: *const BellsimExperiment,
    pair: u32,
    out: *mut BellsimPairStatistics,
) -> BellsimStatus {
    guard(|| {
        let Some(e) = (unsafe { experiment.as_ref() }) else {
            return fail(BellsimStatus::NullPointer, "experiment is null");
        };
        if out.is_null() {
            return fail(BellsimStatus::NullPointer, "out is null");
        }
        if pair > 3 {
            return fail(BellsimStatus::InvalidArgument, format!("pair index {pair} > 3"));
        }
        let Some(pw) = e.config.model.build().ok().and_then(|m| m.piecewise()) else {
            return fail(BellsimStatus::NotPiecewise, "model has no piecewise-constant form");
        };
        let (a, c) = e.config.settings.pair(pair as usize);
        let st = sweep_pair(&pw, a, c, e.config.window);
        // SAFETY: checked non-null above.
        unsafe {
            *out = BellsimPairStatistics {
                p_coincidence: st.p_coincidence,
                p_equal_and_coincident: st.p_equal_and_coincident,
                p_unequal_and_coincident: st.p_unequal_and_coincident,
                conditional_correlation: st.conditional_correlation.unwrap_or(0.0),
                has_correlation: st.conditional_correlation.is_some(),
            }
        };
        BellsimStatus::Ok
    })
}

/// Exact S, γ and δ over the four pairs. Any output pointer may be null.
///
/// # Safety
/// `experiment` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn bellsim_exact_chsh(
    experiment: *const BellsimExperiment,
    s_value: *mut f64,
    gamma: *mut f64,
    delta: *mut f64,
) -> BellsimStatus {
    guard(|| {
        let Some(e) = (unsafe { experiment.as_ref() }) else {
            return fail(BellsimStatus::NullPointer, "experiment is null");
        };
        let Some(pw) = e.config.model.build().ok().and_then(|m| m.piecewise()) else {
            return fail(BellsimStatus::NotPiecewise, "model has no piecewise-constant form");
        };
        match sweep_common_part(&pw, &e.config.settings, e.config.window) {
            Ok(cp) => {
                for (p, v) in [(s_value, cp.s_value), (gamma, cp.gamma), (delta, cp.delta)] {
                    if let Some(slot) = unsafe { p.as_mut() } {
                        *slot = v;
                    }
                }
                BellsimStatus::Ok
            }
            Err(err) => fail(BellsimStatus::NoCoincidence, err.to_string()),
        }
    })
}

/// `delta_lb = max(0, 4 − 3/γ)` and `s_bound = 6/γ − 4` for γ in (0, 1].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bellsim_bounds(gamma: f64, out: *mut BellsimBounds) -> BellsimStatus {
    guard(|| {
        if out.is_null() {
            return fail(BellsimStatus::NullPointer, "out is null");
        }
        match inequality::bounds(gamma) {
            Ok(b) => {
                unsafe {
                    *out = BellsimBounds {
                        delta_lb: b.delta_lb,
                        s_bound: b.s_bound,
                    }
                };
                BellsimStatus::Ok
            }
            Err(e) => fail(BellsimStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Coincidence probability threshold `3 − 3/√2`.
#[no_mangle]
pub extern "C" fn bellsim_critical_gamma() -> f64 {
    inequality::critical_gamma()
}

/// Detector-efficiency threshold `1/√2`, for comparison.
#[no_mangle]
pub extern "C" fn bellsim_efficiency_reference() -> f64 {
    inequality::efficiency_reference()
}

/// Run a property suite over `models` random finite models. Returns
/// `BELLSIM_STATUS_CHECK_FAILED` if any model failed. Output pointers may be null.
///
/// # Safety
/// Non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn bellsim_verify(
    suite: BellsimSuite,
    models: u64,
    seed: u64,
    passed: *mut u64,
    failed: *mut u64,
) -> BellsimStatus {
    guard(|| {
        if models == 0 {
            return fail(BellsimStatus::InvalidArgument, "models must be >= 1");
        }
        let suite = match suite {
            BellsimSuite::Theorem2 => Suite::Theorem2,
            BellsimSuite::ProofChain => Suite::ProofChain,
            BellsimSuite::DeltaGamma => Suite::DeltaGamma,
            BellsimSuite::Saturation => Suite::Saturation,
        };
        let report = run_suite(suite, models as usize, seed, Lanes::from_env());
        for (p, v) in [(passed, report.passed), (failed, report.failed)] {
            if let Some(slot) = unsafe { p.as_mut() } {
                *slot = v as u64;
            }
        }
        if report.failed > 0 {
            fail(
                BellsimStatus::CheckFailed,
                format!("{} models failed {}", report.failed, suite.name()),
            )
        } else {
            BellsimStatus::Ok
        }
    })
}
