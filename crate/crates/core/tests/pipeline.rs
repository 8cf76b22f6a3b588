mod common;

use std::process::Command;

use common::date;
use cpdispatch::ingest::synth::{generate_synth_world, SynthWorldSpec};
use cpdispatch::ingest::{self, DatasetBundle};
use cpdispatch::pipeline::{
    day_inputs, run_day, run_season, AttributionMode, PolicySelection, RunConfig, RunningLevels,
};
use cpdispatch::Error;

fn bundle() -> DatasetBundle {
    generate_synth_world(&SynthWorldSpec::default()).unwrap().0
}

fn config(out: &std::path::Path) -> RunConfig {
    let mut c = RunConfig {
        out_dir: out.to_path_buf(),
        start: Some(date(2023, 7, 3)),
        end: Some(date(2023, 7, 9)),
        n_scenarios: 100,
        seed: 3,
        ..RunConfig::default()
    };
    c.settle.attribution = AttributionMode::Running;
    c.benchmark.tune_years = Some((2022, 2022));
    c.artifacts.lp_export = false;
    c
}

#[test]
fn decisions_ignore_data_after_the_day() {
    let b = bundle();
    let c = config(std::path::Path::new("unused"));
    let d = date(2023, 7, 12);
    let levels = RunningLevels::from_history(&b, d, &c.tariff);
    let full = day_inputs(&c, &b, d, &levels).unwrap();
    let cut = b.truncated_through(d);
    let trunc = day_inputs(&c, &cut, d, &RunningLevels::from_history(&cut, d, &c.tariff)).unwrap();
    assert_eq!(full.0, trunc.0);
    assert_eq!(full.1.mg.values(), trunc.1.mg.values());
    assert_eq!(full.2, trunc.2);
    let a = run_day(&c, &b, d, &levels, &c.battery).unwrap();
    let z = run_day(&c, &cut, d, &levels, &c.battery).unwrap();
    assert_eq!(a.schedule, z.schedule);
}

#[test]
fn short_history_is_look_ahead() {
    let b = bundle();
    let c = config(std::path::Path::new("unused"));
    let err = day_inputs(&c, &b, date(2022, 7, 12), &RunningLevels::default()).unwrap_err();
    assert!(matches!(err, Error::LookAhead(_)), "{err}");
    let mut c2 = c.clone();
    c2.start = Some(date(2022, 7, 1));
    c2.end = Some(date(2022, 7, 2));
    c2.benchmark.tune_years = None;
    let dir = tempfile::tempdir().unwrap();
    c2.out_dir = dir.path().to_path_buf();
    let err = run_season(&c2, &b, None).unwrap_err();
    assert!(matches!(err.root(), Error::LookAhead(_)), "{err}");
}

#[test]
fn tuning_on_the_run_year_is_look_ahead() {
    let b = bundle();
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path());
    c.benchmark.tune_years = Some((2022, 2023));
    assert!(matches!(run_season(&c, &b, None).unwrap_err().root(), Error::LookAhead(_)));
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let b = bundle();
    let whole = tempfile::tempdir().unwrap();
    let reference = run_season(&config(whole.path()), &b, None).unwrap();

    let split = tempfile::tempdir().unwrap();
    let c = config(split.path());
    let mut stop = |d| {
        if d == date(2023, 7, 5) {
            Err(Error::Config("stop".into()))
        } else {
            Ok(())
        }
    };
    assert!(run_season(&c, &b, Some(&mut stop)).is_err());
    assert!(split.path().join("checkpoint.json").exists());
    assert!(!split.path().join("report.csv").exists());
    let resumed = run_season(&c, &b, None).unwrap();
    assert_eq!(resumed.ledgers, reference.ledgers);
    assert_eq!(resumed.alerts, reference.alerts);

    // a changed configuration refuses the old checkpoint
    let mut other = c.clone();
    other.seed = 4;
    assert!(matches!(run_season(&other, &b, None), Err(Error::Config(_))));
}

#[test]
fn season_is_deterministic_across_thread_counts() {
    let b = bundle();
    let mut reports = Vec::new();
    for threads in [1, 4] {
        let dir = tempfile::tempdir().unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let out = pool.install(|| run_season(&config(dir.path()), &b, None).unwrap());
        let sched = std::fs::read_to_string(dir.path().join("runs/2023-07-06/schedule.csv")).unwrap();
        reports.push((out.report.to_csv(), sched));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn benchmark_only_run() {
    let b = bundle();
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path());
    c.policy = PolicySelection::Benchmark;
    let out = run_season(&c, &b, None).unwrap();
    let names: Vec<&str> = out.ledgers.iter().map(|l| l.policy.as_str()).collect();
    assert_eq!(names, vec!["benchmark", "idle"]);
    assert!(!dir.path().join("runs").exists());
    assert!(dir.path().join("daily_benchmark.csv").exists());
}

#[test]
fn weekend_solve_ignores_cp_rate() {
    let b = bundle();
    let c = config(std::path::Path::new("unused"));
    let d = date(2023, 7, 15);
    let levels = RunningLevels::from_history(&b, d, &c.tariff);
    let a = run_day(&c, &b, d, &levels, &c.battery).unwrap();
    assert_eq!(a.probs.cp.p_day_nrm, 0.0);
    let mut c0 = c.clone();
    c0.tariff.lambda_cp = 0.0;
    let z = run_day(&c0, &b, d, &levels, &c0.battery).unwrap();
    assert_eq!(a.schedule, z.schedule);
    assert!((a.objective - z.objective).abs() <= 1e-9 * z.objective.abs());
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cpdispatch")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bundle_dir = dir.path().join("bundle");
    let spec = SynthWorldSpec {
        n_days: 40,
        start: date(2023, 6, 1),
        ..SynthWorldSpec::default()
    };
    let (b, _) = generate_synth_world(&spec).unwrap();
    ingest::save_bundle(&b, &bundle_dir, None).unwrap();
    let bd = bundle_dir.to_str().unwrap();
    let out = dir.path().join("out");
    let od = out.to_str().unwrap();

    assert_eq!(cli(&["--help"]).status.code(), Some(0));
    assert_eq!(cli(&["no-such-command"]).status.code(), Some(4));
    // 40 days of data cannot feed a 365-day training window
    let r = cli(&["--out-dir", od, "optimize", "--bundle", bd, "--date", "2023-07-05"]);
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stderr));
    let missing = dir.path().join("missing");
    let r = cli(&["--out-dir", od, "pvfit", "--bundle", missing.to_str().unwrap(), "--as-of", "2023-06-10", "--out", od]);
    assert_eq!(r.status.code(), Some(2));
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "n_scenarios = 0\n").unwrap();
    let r = cli(&["--config", cfg.to_str().unwrap(), "optimize", "--bundle", bd, "--date", "2023-07-05"]);
    assert_eq!(r.status.code(), Some(4), "{}", String::from_utf8_lossy(&r.stderr));
    let r = cli(&["pvfit", "--bundle", bd, "--as-of", "2023-06-20", "--out", od]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
}
