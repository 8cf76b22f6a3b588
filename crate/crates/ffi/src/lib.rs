//! C ABI over the dispatch engine.
//!
//! Objects cross the boundary as opaque handles created and freed here.
//! Every fallible call returns a [`CpdStatus`]; on failure the message is
//! kept per thread and read with [`cpd_last_error`]. Panics are caught at
//! the boundary and reported as [`CpdStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use chrono::NaiveDate;
use cpdispatch::benchmark::benchmark_schedule;
use cpdispatch::ingest::synth::{generate_synth_world, SynthWorldSpec};
use cpdispatch::ingest::{self, DatasetBundle};
use cpdispatch::model::{DayContext, Entity, PeakProbabilities, ScenarioSet, Schedule};
use cpdispatch::pipeline::{self, RunConfig, RunningLevels};
use cpdispatch::{peakprob, schedopt, Error};

/// Result of every fallible call. The data, solver and config codes match
/// the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpdStatus {
    Ok = 0,
    DataError = 2,
    SolverError = 3,
    ConfigError = 4,
    NullArgument = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Run configuration: battery, tariff, scenario count, seed and solver
/// options.
pub struct CpdConfig {
    inner: RunConfig,
}

/// Loaded or synthetic historical data.
pub struct CpdBundle {
    inner: DatasetBundle,
}

/// One optimized (or rule-based) day.
pub struct CpdDay {
    schedule: Schedule,
    battery_mw: Vec<f64>,
    objective: f64,
    p_cp: f64,
    p_ncp: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    let c = CString::new(msg).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: CpdStatus, msg: impl Into<String>) -> CpdStatus {
    set_error(msg);
    status
}

fn from_error(e: &Error) -> CpdStatus {
    let status = match e.exit_code() {
        3 => CpdStatus::SolverError,
        4 => CpdStatus::ConfigError,
        _ => CpdStatus::DataError,
    };
    fail(status, e.to_string())
}

/// Runs `f` with panics turned into a status.
fn guard(f: impl FnOnce() -> CpdStatus) -> CpdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(CpdStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, CpdStatus> {
    if p.is_null() {
        return Err(fail(CpdStatus::NullArgument, format!("{name} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(CpdStatus::ConfigError, format!("{name} is not UTF-8")))
}

unsafe fn date_arg(p: *const c_char) -> Result<NaiveDate, CpdStatus> {
    let s = str_arg(p, "date")?;
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|e| fail(CpdStatus::ConfigError, format!("date {s:?}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, CpdStatus> {
    p.as_ref()
        .ok_or_else(|| fail(CpdStatus::NullArgument, format!("{name} is NULL")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], CpdStatus> {
    if p.is_null() {
        return Err(fail(CpdStatus::NullArgument, format!("{name} is NULL")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, CpdStatus> {
    p.as_mut()
        .ok_or_else(|| fail(CpdStatus::NullArgument, format!("{name} is NULL")))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! try_core {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return from_error(&e),
        }
    };
}

/// The message of the last failed call on this thread, or NULL. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cpd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cpd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default configuration: reference battery, synthetic tariff, 1000
/// scenarios.
#[no_mangle]
pub extern "C" fn cpd_config_default() -> *mut CpdConfig {
    Box::into_raw(Box::new(CpdConfig {
        inner: RunConfig::default(),
    }))
}

/// Parses a TOML configuration; missing keys take their defaults.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cpd_config_from_toml(toml: *const c_char, out: *mut *mut CpdConfig) -> CpdStatus {
    guard(|| {
        let out = try_ffi!(out_arg(out, "out"));
        let text = try_ffi!(str_arg(toml, "toml"));
        let inner = try_core!(RunConfig::from_toml(text));
        try_core!(inner.validate());
        *out = Box::into_raw(Box::new(CpdConfig { inner }));
        CpdStatus::Ok
    })
}

/// Sets the scenario count and seed.
///
/// # Safety
/// `config` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn cpd_config_set_sampling(config: *mut CpdConfig, n_scenarios: usize, seed: u64) -> CpdStatus {
    guard(|| {
        let c = try_ffi!(out_arg(config, "config"));
        if n_scenarios == 0 {
            return fail(CpdStatus::ConfigError, "n_scenarios must be positive");
        }
        c.inner.n_scenarios = n_scenarios;
        c.inner.seed = seed;
        CpdStatus::Ok
    })
}

/// # Safety
/// `config` must come from this library or be NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cpd_config_free(config: *mut CpdConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Opens a bundle directory written by `ingest` or `synth`.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cpd_bundle_open(dir: *const c_char, out: *mut *mut CpdBundle) -> CpdStatus {
    guard(|| {
        let out = try_ffi!(out_arg(out, "out"));
        let dir = try_ffi!(str_arg(dir, "dir"));
        let inner = try_core!(ingest::open_bundle(Path::new(dir)));
        *out = Box::into_raw(Box::new(CpdBundle { inner }));
        CpdStatus::Ok
    })
}

/// Generates the default synthetic world with the given seed.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cpd_bundle_synth(seed: u64, out: *mut *mut CpdBundle) -> CpdStatus {
    guard(|| {
        let out = try_ffi!(out_arg(out, "out"));
        let spec = SynthWorldSpec {
            seed,
            ..SynthWorldSpec::default()
        };
        let (inner, _) = try_core!(generate_synth_world(&spec));
        *out = Box::into_raw(Box::new(CpdBundle { inner }));
        CpdStatus::Ok
    })
}

/// # Safety
/// `bundle` must come from this library or be NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cpd_bundle_free(bundle: *mut CpdBundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}

fn day_handle(schedule: Schedule, config: &RunConfig, objective: f64, p_cp: f64, p_ncp: f64) -> *mut CpdDay {
    let battery_mw = (0..schedule.hours())
        .map(|h| schedule.battery_mw(h, &config.battery))
        .collect();
    Box::into_raw(Box::new(CpdDay {
        schedule,
        battery_mw,
        objective,
        p_cp,
        p_ncp,
    }))
}

/// Runs the full day pipeline for `date` ("YYYY-MM-DD"): PV forecast,
/// scenarios, probabilities and the MILP. Running peaks come from the
/// bundle's history with an idle battery.
///
/// # Safety
/// Handles must come from this library; `date` must be NUL-terminated and
/// `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cpd_optimize_day(
    config: *const CpdConfig,
    bundle: *const CpdBundle,
    date: *const c_char,
    out: *mut *mut CpdDay,
) -> CpdStatus {
    guard(|| {
        let out = try_ffi!(out_arg(out, "out"));
        let c = &try_ffi!(ref_arg(config, "config")).inner;
        let b = &try_ffi!(ref_arg(bundle, "bundle")).inner;
        let d = try_ffi!(date_arg(date));
        let levels = RunningLevels::from_history(b, d, &c.tariff);
        let o = try_core!(pipeline::run_day(c, b, d, &levels, &c.battery));
        *out = day_handle(o.schedule, c, o.objective, o.probs.cp.p_day_nrm, o.probs.ncp_day);
        CpdStatus::Ok
    })
}

/// Optimizes one day from caller-supplied inputs: `n_scenarios` × `hours`
/// microgrid load paths (row-major), the PV forecast, the CP day and
/// per-hour probabilities and the NCP-day probability.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cpd_optimize_scenarios(
    config: *const CpdConfig,
    load_paths: *const f64,
    n_scenarios: usize,
    hours: usize,
    pv: *const f64,
    p_cp_day: f64,
    p_cp_hour: *const f64,
    p_ncp_day: f64,
    out: *mut *mut CpdDay,
) -> CpdStatus {
    guard(|| {
        let out = try_ffi!(out_arg(out, "out"));
        let c = &try_ffi!(ref_arg(config, "config")).inner;
        let Some(total) = n_scenarios.checked_mul(hours) else {
            return fail(CpdStatus::ConfigError, "n_scenarios × hours overflows");
        };
        let paths = try_ffi!(slice_arg(load_paths, total, "load_paths"));
        let pv = try_ffi!(slice_arg(pv, hours, "pv"));
        let p_hour = try_ffi!(slice_arg(p_cp_hour, hours, "p_cp_hour"));
        if n_scenarios == 0 || hours == 0 {
            return fail(CpdStatus::DataError, "empty scenario set");
        }
        // the date only labels the sets
        let d = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let rows: Vec<Vec<f64>> = paths.chunks(hours).map(<[f64]>::to_vec).collect();
        let scen = try_core!(ScenarioSet::from_rows(Entity::new(Entity::MG), d, &rows, c.seed));
        let cp = try_core!(PeakProbabilities::new(d, Entity::new(Entity::PS), p_cp_day, p_hour.to_vec()));
        let ctx = try_core!(DayContext::new(scen, pv.to_vec(), cp, None, p_ncp_day, 0.0, 0.0));
        let sol = try_core!(schedopt::optimize_day(&ctx, &c.battery, &c.tariff, &c.solver));
        *out = day_handle(sol.schedule, c, sol.mip.objective, p_cp_day, p_ncp_day);
        CpdStatus::Ok
    })
}

/// The rule-based schedule with or without the CP alert window. Its
/// objective is reported as NaN.
///
/// # Safety
/// `config` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cpd_benchmark_day(config: *const CpdConfig, alert: bool, out: *mut *mut CpdDay) -> CpdStatus {
    guard(|| {
        let out = try_ffi!(out_arg(out, "out"));
        let c = &try_ffi!(ref_arg(config, "config")).inner;
        let s = benchmark_schedule(&c.benchmark.policy, alert, &c.battery);
        *out = day_handle(s, c, f64::NAN, f64::NAN, f64::NAN);
        CpdStatus::Ok
    })
}

/// Number of hours in the day.
///
/// # Safety
/// `day` must come from this library or be NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cpd_day_hours(day: *const CpdDay) -> usize {
    day.as_ref().map_or(0, |d| d.schedule.hours())
}

/// Optimal objective in USD, NaN for a rule-based day or a NULL handle.
///
/// # Safety
/// `day` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn cpd_day_objective(day: *const CpdDay) -> f64 {
    day.as_ref().map_or(f64::NAN, |d| d.objective)
}

/// The CP-day and NCP-day probabilities the day was optimized with.
///
/// # Safety
/// `day` must come from this library; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cpd_day_probabilities(day: *const CpdDay, p_cp: *mut f64, p_ncp: *mut f64) -> CpdStatus {
    guard(|| {
        let d = try_ffi!(ref_arg(day, "day"));
        *try_ffi!(out_arg(p_cp, "p_cp")) = d.p_cp;
        *try_ffi!(out_arg(p_ncp, "p_ncp")) = d.p_ncp;
        CpdStatus::Ok
    })
}

unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize) -> CpdStatus {
    if dst.is_null() {
        return fail(CpdStatus::NullArgument, "output buffer is NULL");
    }
    if len < src.len() {
        return fail(
            CpdStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        );
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    CpdStatus::Ok
}

/// Copies the battery output per hour in MW (positive = discharge).
///
/// # Safety
/// `day` must come from this library; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cpd_day_battery_mw(day: *const CpdDay, out: *mut f64, len: usize) -> CpdStatus {
    guard(|| copy_out(&try_ffi!(ref_arg(day, "day")).battery_mw, out, len))
}

/// Copies the end-of-hour state of charge as a fraction of capacity.
///
/// # Safety
/// `day` must come from this library; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cpd_day_soc(day: *const CpdDay, out: *mut f64, len: usize) -> CpdStatus {
    guard(|| copy_out(&try_ffi!(ref_arg(day, "day")).schedule.soc, out, len))
}

/// # Safety
/// `day` must come from this library or be NULL; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cpd_day_free(day: *mut CpdDay) {
    if !day.is_null() {
        drop(Box::from_raw(day));
    }
}

/// Counts, over `n_scenarios` × `hours` paths (row-major), the share whose
/// maximum exceeds `running_max` and the share peaking at each hour.
/// Pass `-INFINITY` when nothing has been observed yet.
///
/// # Safety
/// `paths` must hold `n_scenarios * hours` doubles, `p_hour` `hours`
/// doubles, and `p_day` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cpd_peak_probabilities(
    paths: *const f64,
    n_scenarios: usize,
    hours: usize,
    running_max: f64,
    p_day: *mut f64,
    p_hour: *mut f64,
) -> CpdStatus {
    guard(|| {
        let Some(total) = n_scenarios.checked_mul(hours) else {
            return fail(CpdStatus::ConfigError, "n_scenarios × hours overflows");
        };
        let values = try_ffi!(slice_arg(paths, total, "paths"));
        let p_day = try_ffi!(out_arg(p_day, "p_day"));
        if hours == 0 {
            return fail(CpdStatus::DataError, "empty scenario set");
        }
        let d = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
        let rows: Vec<Vec<f64>> = values.chunks(hours).map(<[f64]>::to_vec).collect();
        let set = try_core!(ScenarioSet::from_rows(Entity::new(Entity::PS), d, &rows, 0));
        let p = try_core!(peakprob::peak_probabilities(&set, running_max));
        let status = copy_out(&p.p_hour, p_hour, hours);
        if status == CpdStatus::Ok {
            *p_day = p.p_day_nrm;
        }
        status
    })
}
