mod common;

use std::fs;
use std::io::Write;

use common::date;
use cpdispatch::ingest::synth::{generate_synth_world, SynthWorldSpec};
use cpdispatch::ingest::{self, REQUIRED};
use cpdispatch::model::{DayMode, Entity, HourlySeries};
use cpdispatch::Error;

/// Three days of every required entity, optionally without one hour of MG
/// or with one row duplicated.
fn fixture(skip_mg_hour: Option<(u32, u32)>, duplicate: bool) -> String {
    let mut out = String::from("timestamp,entity,value\n");
    for entity in REQUIRED {
        for day in 1..=3u32 {
            for h in 0..24u32 {
                if entity == Entity::MG && skip_mg_hour == Some((day, h)) {
                    continue;
                }
                let v = 100.0 + h as f64 + day as f64;
                out.push_str(&format!("2023-07-{day:02}T{h:02}:00:00-04:00,{entity},{v}\n"));
                if duplicate && entity == Entity::PS && day == 2 && h == 5 {
                    out.push_str(&format!("2023-07-{day:02}T{h:02}:00:00-04:00,{entity},{v}\n"));
                }
            }
        }
    }
    out
}

fn write_tmp(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.path().join(name);
    fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
    p
}

#[test]
fn three_day_fixture_loads() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_tmp(&dir, "all.csv", &fixture(None, false));
    let (bundle, gaps) = ingest::load_bundle(&[p], DayMode::Strict).unwrap();
    assert!(gaps.is_empty());
    assert_eq!(bundle.coverage, (date(2023, 7, 1), date(2023, 7, 3)));
    for e in REQUIRED {
        assert_eq!(bundle.get(e).unwrap().len(), 72, "{e}");
    }
    assert_eq!(bundle.mg_load().day_slice(date(2023, 7, 2), DayMode::Strict).unwrap()[13], 115.0);
}

#[test]
fn duplicated_timestamp_is_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_tmp(&dir, "dup.csv", &fixture(None, true));
    let err = ingest::load_bundle(&[p], DayMode::Strict).unwrap_err();
    let Error::Parse { line, detail } = err else {
        panic!("expected a parse error, got {err}")
    };
    assert!(detail.contains("duplicate"), "{detail}");
    // header, MA and MA_FCST, then PS day 1 and hours 0..=5 of day 2
    assert_eq!(line, 1 + 72 * 2 + 24 + 6 + 1);
}

#[test]
fn missing_hour_names_the_hour() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_tmp(&dir, "all.csv", &fixture(Some((2, 13)), false));
    let err = ingest::load_bundle(&[p], DayMode::Strict).unwrap_err();
    assert!(matches!(err, Error::Gap { .. }), "{err}");
    let msg = err.to_string();
    assert!(msg.contains("MG") && msg.contains("2023-07-02") && msg.contains("hour 13"), "{msg}");
}

#[test]
fn missing_entity_is_config_error() {
    let text: String = fixture(None, false)
        .lines()
        .filter(|l| !l.contains(",SSRD,"))
        .map(|l| format!("{l}\n"))
        .collect();
    let series = ingest::read_series_csv(text.as_bytes()).unwrap();
    assert!(matches!(ingest::DatasetBundle::new(series, DayMode::Strict), Err(Error::Config(_))));
}

#[test]
fn bad_value_reports_line() {
    let mut text = fixture(None, false);
    text = text.replacen("2023-07-01T03:00:00-04:00,MA,104", "2023-07-01T03:00:00-04:00,MA,abc", 1);
    let Err(Error::Parse { line, .. }) = ingest::read_series_csv(text.as_bytes()) else {
        panic!("expected a parse error")
    };
    assert_eq!(line, 5);
}

#[test]
fn bundle_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthWorldSpec {
        n_days: 20,
        ..SynthWorldSpec::default()
    };
    let (bundle, _) = generate_synth_world(&spec).unwrap();
    ingest::save_bundle(&bundle, dir.path(), None).unwrap();
    let back = ingest::open_bundle(dir.path()).unwrap();
    assert_eq!(back, bundle);
}

#[test]
fn truncation_drops_later_days() {
    let spec = SynthWorldSpec {
        n_days: 10,
        ..SynthWorldSpec::default()
    };
    let (bundle, _) = generate_synth_world(&spec).unwrap();
    let t = bundle.truncated_through(date(2022, 1, 4));
    assert_eq!(t.coverage.1, date(2022, 1, 4));
    assert_eq!(t.mg_load().len(), 96);
    assert!(t.mg_load().day_slice(date(2022, 1, 5), DayMode::Strict).is_err());
}

#[test]
fn synth_is_deterministic() {
    let spec = SynthWorldSpec {
        n_days: 60,
        ..SynthWorldSpec::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let (bundle, truth) = generate_synth_world(&spec).unwrap();
        let truth = serde_json::to_value(&truth).unwrap();
        ingest::save_bundle(&bundle, dir.path(), Some(&truth)).unwrap();
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 8);
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn synth_seeds_differ() {
    let spec = SynthWorldSpec {
        n_days: 5,
        ..SynthWorldSpec::default()
    };
    let (a, _) = generate_synth_world(&spec).unwrap();
    let (b, _) = generate_synth_world(&SynthWorldSpec { seed: 2, ..spec }).unwrap();
    assert_ne!(a.mg_load().values(), b.mg_load().values());
}

fn quiet(spec: SynthWorldSpec) -> SynthWorldSpec {
    SynthWorldSpec {
        regional_daily_sd: 0.0,
        regional_hourly_sd: 0.0,
        forecast_error_sd: 0.0,
        zone_daily_sd: 0.0,
        zone_hourly_sd: 0.0,
        mg_daily_sd: 0.0,
        mg_hourly_sd: 0.0,
        ..spec
    }
}

#[test]
fn zero_noise_microgrid_is_affine_in_region() {
    let spec = quiet(SynthWorldSpec {
        n_days: 30,
        offsets: [150.0, -20.0],
        ..SynthWorldSpec::default()
    });
    let (bundle, truth) = generate_synth_world(&spec).unwrap();
    assert_eq!(truth.clipped, 0);
    let [_, lz, lm] = spec.loadings;
    for (ma, mg) in bundle.ma_actual().values().iter().zip(bundle.mg_load().values()) {
        let expected = lm * (lz * ma + 150.0) - 20.0;
        assert!((mg - expected).abs() <= 1e-9 * expected.abs(), "{mg} vs {expected}");
    }
    assert_eq!(bundle.ma_actual().values(), bundle.ma_forecast().values());
}

#[test]
fn zone_region_correlation_matches_factor_model() {
    // A flat profile with no calendar effects makes every hour identically
    // distributed, so the pooled correlation has a closed form.
    let spec = SynthWorldSpec {
        n_days: 2400,
        regional_base: vec![30000.0; 24],
        seasonal_amplitude: 0.0,
        weekend_factor: 1.0,
        loadings: [1.0, 0.1, 0.01],
        ..SynthWorldSpec::default()
    };
    let (bundle, _) = generate_synth_world(&spec).unwrap();
    let x = bundle.ma_actual().values();
    let y = bundle.ps_actual().values();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sample = sxy / (sxx * syy).sqrt();

    let s2 = spec.regional_daily_sd.powi(2) + spec.regional_hourly_sd.powi(2);
    let var_r = 30000.0_f64.powi(2) * (s2.exp() - 1.0) * s2.exp();
    let lz = spec.loadings[1];
    let analytic = lz * var_r.sqrt()
        / (lz * lz * var_r + spec.zone_daily_sd.powi(2) + spec.zone_hourly_sd.powi(2)).sqrt();
    assert!((sample - analytic).abs() < 0.02, "sample {sample} analytic {analytic}");
}

#[test]
fn default_world_is_nonnegative_and_rarely_clipped() {
    let (bundle, truth) = generate_synth_world(&SynthWorldSpec::default()).unwrap();
    assert!(truth.clip_fraction() < 1e-3, "{}", truth.clip_fraction());
    for e in REQUIRED {
        assert!(bundle.get(e).unwrap().values().iter().all(|v| *v >= 0.0), "{e}");
    }
    let pv: &HourlySeries = bundle.pv_actual();
    assert!(pv.values().iter().all(|v| *v <= SynthWorldSpec::default().pv_capacity));
}

#[test]
fn subset_zone_stays_below_region() {
    let spec = SynthWorldSpec {
        n_days: 200,
        loadings: [1.0, 0.98, 0.12],
        offsets: [500.0, 0.0],
        subset_zone: true,
        ..SynthWorldSpec::default()
    };
    let (bundle, _) = generate_synth_world(&spec).unwrap();
    for (z, r) in bundle.ps_actual().values().iter().zip(bundle.ma_actual().values()) {
        assert!(z <= r);
    }
}

#[test]
fn invalid_spec_is_rejected() {
    let spec = SynthWorldSpec {
        regional_daily_ar: 1.0,
        ..SynthWorldSpec::default()
    };
    assert!(matches!(generate_synth_world(&spec), Err(Error::Spec(_))));
    let spec = SynthWorldSpec {
        regional_base: vec![1.0; 23],
        ..SynthWorldSpec::default()
    };
    assert!(matches!(generate_synth_world(&spec), Err(Error::Spec(_))));
}
