//! Shared fixtures and independent reference implementations for the
//! integration tests.
#![allow(dead_code)]

use chrono::NaiveDate;
use cpdispatch::milpsolve::MilpInstance;
use cpdispatch::model::{
    BatterySpec, DayContext, EnergyPrice, Entity, PeakProbabilities, ScenarioSet, TariffConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod bridge;
pub mod counting;
pub mod gauss;
pub mod tableau;

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_probs(rng: &mut ChaCha8Rng, hours: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..hours).map(|_| rng.random::<f64>().powi(3)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// A random day with `hours` hours and `n` scenarios around a MW-scale
/// load, with random probabilities.
pub fn random_day(rng: &mut ChaCha8Rng, hours: usize, n: usize) -> DayContext {
    let base: Vec<f64> = (0..hours).map(|_| rng.random_range(700.0..1500.0)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let level = rng.random_range(0.85..1.15);
            base.iter()
                .map(|b| b * level * rng.random_range(0.9..1.1))
                .collect()
        })
        .collect();
    let d = date(2023, 7, 27);
    let scen = ScenarioSet::from_rows(Entity::new(Entity::MG), d, &rows, 0).unwrap();
    let pv: Vec<f64> = (0..hours).map(|_| rng.random_range(0.0..300.0)).collect();
    let p_day = if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() };
    let cp = PeakProbabilities::new(d, Entity::new(Entity::PS), p_day, random_probs(rng, hours))
        .unwrap();
    DayContext::new(scen, pv, cp, None, rng.random::<f64>(), 0.0, 0.0).unwrap()
}

pub fn random_tariff(rng: &mut ChaCha8Rng, hours: usize) -> TariffConfig {
    TariffConfig {
        lambda_cp: rng.random_range(0.0..20_000.0),
        lambda_5cp: None,
        lambda_ncp: rng.random_range(0.0..300.0),
        lambda_deg: rng.random_range(0.0..100.0),
        energy_price: EnergyPrice::Profile((0..hours).map(|_| rng.random_range(20.0..200.0)).collect()),
        cp_season: Default::default(),
    }
}

pub fn random_battery(rng: &mut ChaCha8Rng) -> BatterySpec {
    let mut b = BatterySpec::reference().with_round_trip(rng.random_range(0.7..0.95));
    b.max_charge = rng.random_range(200.0..700.0);
    b.max_discharge = rng.random_range(200.0..700.0);
    b
}

/// Minimum over every binary pattern of the dense LP with the binaries
/// fixed, solved by the textbook tableau oracle.
pub fn exhaustive_min(inst: &MilpInstance) -> Option<f64> {
    let k = inst.binaries.len();
    let mut best: Option<f64> = None;
    for pattern in 0u64..(1u64 << k) {
        let mut lower = inst.lower.clone();
        let mut upper = inst.upper.clone();
        for (bit, &j) in inst.binaries.iter().enumerate() {
            let v = ((pattern >> bit) & 1) as f64;
            lower[j] = v;
            upper[j] = v;
        }
        let lp = tableau::DenseLp::from_instance(inst, &lower, &upper);
        if let tableau::Outcome::Optimal(obj, _) = tableau::solve(&lp) {
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
    }
    best
}
