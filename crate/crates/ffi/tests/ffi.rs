use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use cpdispatch_ffi::*;

fn last_error() -> String {
    let p = cpd_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn status_codes_match_cli_exit_codes() {
    assert_eq!(CpdStatus::Ok as i32, 0);
    assert_eq!(CpdStatus::DataError as i32, 2);
    assert_eq!(CpdStatus::SolverError as i32, 3);
    assert_eq!(CpdStatus::ConfigError as i32, 4);
}

#[test]
fn null_arguments_are_reported() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(cpd_config_from_toml(ptr::null(), &mut out), CpdStatus::NullArgument);
        assert!(last_error().contains("toml"));
        assert_eq!(cpd_day_hours(ptr::null()), 0);
        assert!(cpd_day_objective(ptr::null()).is_nan());
        cpd_day_free(ptr::null_mut());
        cpd_config_free(ptr::null_mut());
        cpd_bundle_free(ptr::null_mut());
    }
}

#[test]
fn bad_config_is_a_config_error() {
    let toml = CString::new("n_scenarios = 0\n").unwrap();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(cpd_config_from_toml(toml.as_ptr(), &mut out), CpdStatus::ConfigError);
    }
    assert!(out.is_null());
    let toml = CString::new("n_scenarios = [").unwrap();
    unsafe {
        assert_eq!(cpd_config_from_toml(toml.as_ptr(), &mut out), CpdStatus::ConfigError);
    }
}

#[test]
fn missing_bundle_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("nope").to_str().unwrap()).unwrap();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(cpd_bundle_open(path.as_ptr(), &mut out), CpdStatus::DataError);
    }
    assert!(!last_error().is_empty());
}

#[test]
fn peak_probabilities_count_paths() {
    // three paths over two hours against a running max of 5
    let paths = [1.0, 6.0, 7.0, 2.0, 3.0, 4.0];
    let mut p_day = -1.0;
    let mut p_hour = [0.0; 2];
    let s = unsafe { cpd_peak_probabilities(paths.as_ptr(), 3, 2, 5.0, &mut p_day, p_hour.as_mut_ptr()) };
    assert_eq!(s, CpdStatus::Ok);
    assert!((p_day - 2.0 / 3.0).abs() < 1e-15);
    assert!((p_hour[0] - 1.0 / 3.0).abs() < 1e-15);
    assert!((p_hour[1] - 2.0 / 3.0).abs() < 1e-15);

    let s = unsafe { cpd_peak_probabilities(paths.as_ptr(), 3, 2, 5.0, ptr::null_mut(), p_hour.as_mut_ptr()) };
    assert_eq!(s, CpdStatus::NullArgument);
}

#[test]
fn benchmark_day_round_trip() {
    let config = cpd_config_default();
    let mut day = ptr::null_mut();
    unsafe {
        assert_eq!(cpd_benchmark_day(config, false, &mut day), CpdStatus::Ok);
        let n = cpd_day_hours(day);
        assert_eq!(n, 24);
        assert!(cpd_day_objective(day).is_nan());
        let mut mw = vec![0.0; n];
        let mut soc = vec![0.0; n];
        assert_eq!(cpd_day_battery_mw(day, mw.as_mut_ptr(), n), CpdStatus::Ok);
        assert_eq!(cpd_day_soc(day, soc.as_mut_ptr(), n), CpdStatus::Ok);
        assert_eq!(cpd_day_soc(day, soc.as_mut_ptr(), n - 1), CpdStatus::BufferTooSmall);
        // charging in the small hours, discharging in the morning
        assert!(mw[0] < 0.0 && mw[5] > 0.0);
        assert!(soc.iter().all(|s| (0.2 - 1e-9..=0.96 + 1e-9).contains(s)));
        cpd_day_free(day);
        cpd_config_free(config);
    }
}

#[test]
fn scenario_optimization_discharges_at_the_likely_peak() {
    let hours = 24;
    let n = 20;
    let mut paths = Vec::with_capacity(n * hours);
    for i in 0..n {
        for h in 0..hours {
            paths.push(30.0 + 10.0 * ((h as f64 - 6.0) / 4.0).sin() + i as f64 * 0.3);
        }
    }
    let pv = vec![0.0; hours];
    let mut p_hour = vec![0.0; hours];
    p_hour[17] = 1.0;
    let config = cpd_config_default();
    let mut day = ptr::null_mut();
    unsafe {
        let s = cpd_optimize_scenarios(config, paths.as_ptr(), n, hours, pv.as_ptr(), 0.5, p_hour.as_ptr(), 0.2, &mut day);
        assert_eq!(s, CpdStatus::Ok, "{}", last_error());
        assert!(cpd_day_objective(day).is_finite());
        let mut mw = vec![0.0; hours];
        assert_eq!(cpd_day_battery_mw(day, mw.as_mut_ptr(), hours), CpdStatus::Ok);
        // with half a chance of a CP at 17:00 the battery discharges then
        assert!(mw[17] > 0.0, "{mw:?}");
        let (mut p_cp, mut p_ncp) = (0.0, 0.0);
        assert_eq!(cpd_day_probabilities(day, &mut p_cp, &mut p_ncp), CpdStatus::Ok);
        assert_eq!((p_cp, p_ncp), (0.5, 0.2));
        cpd_day_free(day);

        // probabilities that do not sum to the day probability are rejected
        p_hour[17] = 0.3;
        let s = cpd_optimize_scenarios(config, paths.as_ptr(), n, hours, pv.as_ptr(), 0.5, p_hour.as_ptr(), 0.2, &mut day);
        assert_ne!(s, CpdStatus::Ok);
        cpd_config_free(config);
    }
}

#[test]
fn optimize_day_on_synthetic_bundle() {
    let config = cpd_config_default();
    let mut bundle = ptr::null_mut();
    let mut day = ptr::null_mut();
    let date = CString::new("2023-07-12").unwrap();
    unsafe {
        assert_eq!(cpd_config_set_sampling(config, 100, 5), CpdStatus::Ok);
        assert_eq!(cpd_config_set_sampling(config, 0, 5), CpdStatus::ConfigError);
        assert_eq!(cpd_bundle_synth(1, &mut bundle), CpdStatus::Ok, "{}", last_error());
        let s = cpd_optimize_day(config, bundle, date.as_ptr(), &mut day);
        assert_eq!(s, CpdStatus::Ok, "{}", last_error());
        assert_eq!(cpd_day_hours(day), 24);
        let (mut p_cp, mut p_ncp) = (-1.0, -1.0);
        assert_eq!(cpd_day_probabilities(day, &mut p_cp, &mut p_ncp), CpdStatus::Ok);
        assert!((0.0..=1.0).contains(&p_cp) && (0.0..=1.0).contains(&p_ncp));
        cpd_day_free(day);

        let bad = CString::new("12/07/2023").unwrap();
        assert_eq!(cpd_optimize_day(config, bundle, bad.as_ptr(), &mut day), CpdStatus::ConfigError);
        let early = CString::new("2021-02-01").unwrap();
        assert_eq!(cpd_optimize_day(config, bundle, early.as_ptr(), &mut day), CpdStatus::DataError);
        cpd_bundle_free(bundle);
        cpd_config_free(config);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(cpd_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/cpdispatch.h");
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn header_declares_the_api() {
    let h = header();
    assert!(h.contains("#ifndef CPDISPATCH_H"));
    for name in [
        "typedef struct CpdConfig CpdConfig;",
        "typedef struct CpdBundle CpdBundle;",
        "typedef struct CpdDay CpdDay;",
        "CPD_STATUS_SOLVER_ERROR = 3",
        "cpd_last_error(void)",
        "cpd_optimize_day(",
        "cpd_optimize_scenarios(",
        "cpd_peak_probabilities(",
        "cpd_day_free(",
    ] {
        assert!(h.contains(name), "missing {name}");
    }
}

/// Compiles a small C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    // the test binary sits in target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap();
    // cargo test only refreshes the rlib, so rebuild the static library
    let mut build = Command::new(env!("CARGO"));
    build
        .args(["build", "--lib", "-p", "cpdispatch-ffi", "--target-dir"])
        .arg(lib_dir.parent().unwrap());
    if lib_dir.file_name().unwrap() == "release" {
        build.arg("--release");
    }
    let status = build.status().unwrap();
    assert!(status.success(), "building the static library failed");
    let lib = lib_dir.join("libcpdispatch_ffi.a");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "cpdispatch.h"
int main(void) {
    CpdConfig *cfg = cpd_config_default();
    CpdDay *day = NULL;
    if (cpd_benchmark_day(cfg, true, &day) != CPD_STATUS_OK) return 1;
    double soc[24];
    if (cpd_day_soc(day, soc, 24) != CPD_STATUS_OK) return 2;
    double paths[4] = {1.0, 3.0, 2.0, 0.5};
    double p_day, p_hour[2];
    if (cpd_peak_probabilities(paths, 2, 2, 2.5, &p_day, p_hour) != CPD_STATUS_OK) return 3;
    CpdConfig *bad = NULL;
    if (cpd_config_from_toml(NULL, &bad) != CPD_STATUS_NULL_ARGUMENT) return 4;
    printf("%s %.2f %.2f %.2f\n", cpd_version(), soc[23], p_day, p_hour[1]);
    cpd_day_free(day);
    cpd_config_free(cfg);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let text = String::from_utf8(run.stdout).unwrap();
    assert_eq!(text.trim(), format!("{} 0.20 0.50 0.50", env!("CARGO_PKG_VERSION")));
}
