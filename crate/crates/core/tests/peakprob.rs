mod common;

use chrono::Datelike;
use common::date;
use cpdispatch::ingest::synth::{generate_synth_world, SynthWorldSpec};
use cpdispatch::model::{Entity, HolidayCalendar, ScenarioSet};
use cpdispatch::peakprob::{
    day_nrm_probability, five_cp_day_probability, hour_peak_histogram, ncp_day_probability, peak_probabilities,
};
use cpdispatch::scengen::{fit_models, generate_day_scenarios};
use cpdispatch::Error;
use proptest::prelude::*;

fn set(rows: &[Vec<f64>]) -> ScenarioSet {
    ScenarioSet::from_rows(Entity::new(Entity::PS), date(2023, 7, 27), rows, 0).unwrap()
}

/// Path with `peak` at `hour` over a flat base of 50.
fn peaked(hour: usize, peak: f64) -> Vec<f64> {
    let mut p = vec![50.0; 24];
    p[hour] = peak;
    p
}

use common::counting::{oracle_day, oracle_hist, oracle_max};

#[test]
fn four_scenario_counting_case() {
    let rows: Vec<Vec<f64>> = [(3, 90.0), (10, 110.0), (17, 120.0), (20, 95.0)]
        .iter()
        .map(|&(h, v)| peaked(h, v))
        .collect();
    let s = set(&rows);
    assert_eq!(day_nrm_probability(&s, 100.0).unwrap(), 0.5);
    assert_eq!(day_nrm_probability(&s, 0.0).unwrap(), 1.0);
    assert_eq!(day_nrm_probability(&s, 110.0).unwrap(), 0.25, "ties do not exceed");
    assert_eq!(day_nrm_probability(&s, 120.0).unwrap(), 0.0);
    assert_eq!(day_nrm_probability(&s, 500.0).unwrap(), 0.0);
    assert_eq!(day_nrm_probability(&s, f64::NEG_INFINITY).unwrap(), 1.0);
}

#[test]
fn histogram_cases() {
    let h = hour_peak_histogram(&set(&[peaked(17, 100.0)])).unwrap();
    assert_eq!(h, oracle_hist(&[peaked(17, 100.0)]));
    assert_eq!(h[17], 1.0);
    let h = hour_peak_histogram(&set(&[peaked(16, 100.0), peaked(18, 100.0)])).unwrap();
    assert_eq!((h[16], h[18]), (0.5, 0.5));
    let h = hour_peak_histogram(&set(&[vec![7.0; 24]])).unwrap();
    assert_eq!(h[0], 1.0, "flat paths count at hour 0");
}

#[test]
fn five_cp_cases() {
    let rows: Vec<Vec<f64>> = (0..10).map(|i| peaked(i + 10, 100.0 + 10.0 * i as f64)).collect();
    let s = set(&rows);
    assert_eq!(five_cp_day_probability(&s, None).unwrap(), 1.0);
    assert_eq!(five_cp_day_probability(&s, Some(1000.0)).unwrap(), 0.0);
    for level in [95.0, 100.0, 135.0, 150.0, 189.9, 190.0] {
        assert_eq!(five_cp_day_probability(&s, Some(level)).unwrap(), oracle_day(&rows, level), "{level}");
    }
    assert_eq!(five_cp_day_probability(&s, Some(135.0)).unwrap(), 0.6);
}

#[test]
fn first_day_of_month_is_certain() {
    let s = set(&[peaked(3, 10.0), peaked(5, 20.0)]);
    assert_eq!(ncp_day_probability(&s, f64::NEG_INFINITY).unwrap(), 1.0);
}

#[test]
fn empty_set_is_an_error() {
    assert!(matches!(
        ScenarioSet::from_rows(Entity::new(Entity::PS), date(2023, 7, 1), &[], 0),
        Err(Error::EmptyScenario)
    ));
}

#[test]
fn ncp_probability_matches_recount_on_synthetic_month() {
    let (bundle, _) = generate_synth_world(&SynthWorldSpec::default()).unwrap();
    let day = date(2023, 7, 18);
    let models = fit_models(
        bundle.ma_forecast(),
        bundle.ma_actual(),
        bundle.ps_actual(),
        bundle.mg_load(),
        day,
        365,
        &HolidayCalendar::UsFederal,
    )
    .unwrap();
    let fc = bundle.ma_forecast().day_slice(day, Default::default()).unwrap();
    let pv = vec![0.0; 24];
    let scen = generate_day_scenarios(&models, &fc, &pv, day, 100_000, 9).unwrap();
    // month-to-date maximum of the realized net load
    let mut level = f64::NEG_INFINITY;
    for d in (1..day.day()).map(|k| date(2023, 7, k)) {
        let l = bundle.mg_load().day_slice(d, Default::default()).unwrap();
        let p = bundle.pv_actual().day_slice(d, Default::default()).unwrap();
        for h in 0..24 {
            level = level.max(l[h] - p[h]);
        }
    }
    let rows: Vec<Vec<f64>> = scen.mg_net.paths().map(<[f64]>::to_vec).collect();
    let got = ncp_day_probability(&scen.mg_net, level).unwrap();
    assert!((got - oracle_day(&rows, level)).abs() <= 0.01);
    assert!(got > 0.0 && got < 1.0, "{got}");
}

fn rows_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1000.0, 24), 1..30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn day_probability_is_monotone(rows in rows_strategy(), a in 0.0f64..1200.0, b in 0.0f64..1200.0) {
        let s = set(&rows);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p_lo = day_nrm_probability(&s, lo).unwrap();
        let p_hi = day_nrm_probability(&s, hi).unwrap();
        prop_assert!(p_hi <= p_lo);
        prop_assert_eq!(p_lo, oracle_day(&rows, lo));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn histogram_matches_oracle_and_scale(rows in rows_strategy(), k in -8i32..8, c in 0.01f64..100.0) {
        let s = set(&rows);
        let h = hour_peak_histogram(&s).unwrap();
        prop_assert_eq!(&h, &oracle_hist(&rows));
        let total: f64 = h.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        // a power of two scales exactly; any positive factor keeps order
        for f in [2f64.powi(k), c] {
            let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * f).collect()).collect();
            let hs = hour_peak_histogram(&set(&scaled)).unwrap();
            if f == 2f64.powi(k) {
                prop_assert_eq!(&hs, &h);
            } else {
                // rounding can only merge near-ties, never reorder distinct values
                let distinct = rows.iter().all(|r| {
                    let m = oracle_max(r);
                    r.iter().filter(|v| (**v - m).abs() <= 1e-9 * m).count() == 1
                });
                if distinct {
                    prop_assert_eq!(&hs, &h);
                }
            }
        }
        let pp = peak_probabilities(&s, 500.0).unwrap();
        prop_assert_eq!(pp.p_hour, h);
    }
}
