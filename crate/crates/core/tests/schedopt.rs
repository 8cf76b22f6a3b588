mod common;

use common::date;
use cpdispatch::milpsolve::{self, SolveOptions};
use cpdispatch::model::{
    BatterySpec, DayContext, EnergyPrice, Entity, PeakProbabilities, ScenarioSet, Schedule, TariffConfig,
};
use cpdispatch::schedopt::{build_milp, objective_terms, optimize_day, scenario_peak, DayLayout};
use proptest::prelude::*;

fn flat_tariff(price: f64) -> TariffConfig {
    TariffConfig {
        lambda_cp: 0.0,
        lambda_5cp: None,
        lambda_ncp: 0.0,
        lambda_deg: 0.0,
        energy_price: EnergyPrice::Flat(price),
        cp_season: Default::default(),
    }
}

fn with_p_day(ctx: &DayContext, p: f64) -> DayContext {
    let mut c = ctx.clone();
    c.cp_probs = PeakProbabilities::new(c.date, Entity::new(Entity::PS), p, ctx.cp_probs.p_hour.clone()).unwrap();
    c
}

#[test]
fn full_size_instance_dimensions() {
    let mut rng = common::rng(1);
    let ctx = common::random_day(&mut rng, 24, 1000);
    let inst = build_milp(&ctx, &BatterySpec::reference(), &TariffConfig::synthetic_default()).unwrap();
    assert_eq!(inst.n_vars(), 24 * 6 + 1000);
    assert_eq!(inst.n_rows(), 24 + 24 * 2 + 24 + 24 + 24_000);
    assert_eq!(inst.binaries.len(), 24);
    let lay = DayLayout {
        hours: 24,
        n_scenarios: 1000,
    };
    assert_eq!(lay.n_vars(), inst.n_vars());
}

#[test]
fn do_nothing_cost_is_priced_mean_net_load() {
    let mut rng = common::rng(2);
    let ctx = common::random_day(&mut rng, 24, 50);
    let battery = BatterySpec::reference();
    let tariff = flat_tariff(70.0);
    let inst = build_milp(&ctx, &battery, &tariff).unwrap();
    let mut x = vec![0.0; inst.n_vars()];
    let lay = DayLayout {
        hours: 24,
        n_scenarios: 50,
    };
    for h in 0..24 {
        x[lay.soc(h)] = battery.soc_init;
    }
    let expected: f64 = (0..24).map(|h| 70.0 * (ctx.mg_mean_load[h] - ctx.pv_forecast[h])).sum();
    assert!((inst.evaluate(&x) - expected).abs() < 1e-9 * expected);
}

#[test]
fn rate_rows_cap_actions_at_half_capacity() {
    let mut rng = common::rng(3);
    let ctx = common::random_day(&mut rng, 24, 5);
    let battery = BatterySpec::reference();
    assert_eq!(battery.max_charge_fraction(), 0.5);
    let tariff = TariffConfig {
        energy_price: EnergyPrice::Profile((0..24)
            .map(|h| match h {
                0 => -100.0,
                1..=11 => 200.0,
                _ => 500.0,
            })
            .collect()),
        ..flat_tariff(0.0)
    };
    let sol = optimize_day(&ctx, &battery, &tariff, &SolveOptions::default()).unwrap();
    let max_charge = sol.schedule.pi_minus.iter().fold(0.0f64, |a, b| a.max(*b));
    let max_discharge = sol.schedule.pi_plus.iter().fold(0.0f64, |a, b| a.max(*b));
    assert!((max_charge - 0.5).abs() < 1e-9, "{max_charge}");
    assert!(max_discharge <= 0.5 + 1e-9);
    sol.schedule.validate(&battery).unwrap();
}

#[test]
fn demand_term_of_idle_schedule_is_direct_max() {
    let d = date(2023, 7, 27);
    let load = vec![vec![500.0, 800.0, 900.0, 700.0]];
    let pv = vec![0.0, 50.0, 250.0, 10.0];
    let scen = ScenarioSet::from_rows(Entity::new(Entity::MG), d, &load, 0).unwrap();
    let cp = PeakProbabilities::new(d, Entity::new(Entity::PS), 0.0, vec![0.25; 4]).unwrap();
    let ctx = DayContext::new(scen, pv, cp, None, 0.6, 0.0, 0.0).unwrap();
    let battery = BatterySpec::reference();
    let tariff = TariffConfig {
        lambda_ncp: 110.0,
        ..flat_tariff(0.0)
    };
    let t = objective_terms(&ctx, &battery, &tariff, &Schedule::idle(4, &battery)).unwrap();
    // net loads 500, 750, 650, 690: the maximum is at hour 1
    assert_eq!(t.edc, 110.0 * 0.6 * 750.0);
    assert_eq!(t.edp, 0.0);
}

#[test]
fn constant_action_ramps_only_at_the_start() {
    let mut rng = common::rng(4);
    let ctx = common::random_day(&mut rng, 4, 3);
    let battery = BatterySpec::reference();
    let s = Schedule::from_actions(vec![0.1; 4], vec![0.0; 4], &battery);
    let tariff = TariffConfig {
        lambda_deg: 50.0,
        ..flat_tariff(0.0)
    };
    let t = objective_terms(&ctx, &battery, &tariff, &s).unwrap();
    assert!((t.edp - 50.0 * 0.1).abs() < 1e-12);
}

#[test]
fn energy_cost_is_mean_of_scenario_costs() {
    let mut rng = common::rng(5);
    let ctx = common::random_day(&mut rng, 24, 40);
    let battery = BatterySpec::reference();
    let tariff = common::random_tariff(&mut rng, 24);
    let s = Schedule::from_actions(
        (0..24).map(|h| if h < 4 { 0.15 } else { 0.0 }).collect(),
        (0..24).map(|h| if (17..20).contains(&h) { 0.1 } else { 0.0 }).collect(),
        &battery,
    );
    let price = tariff.energy_price.for_day(ctx.date, 24).unwrap();
    let per_scenario: f64 = ctx
        .mg_scenarios
        .paths()
        .map(|p| {
            (0..24)
                .map(|h| price[h] * (p[h] - ctx.pv_forecast[h] - s.battery_mw(h, &battery)))
                .sum::<f64>()
        })
        .sum::<f64>()
        / 40.0;
    let t = objective_terms(&ctx, &battery, &tariff, &s).unwrap();
    assert!((t.ecc - per_scenario).abs() < 1e-9 * per_scenario.abs());
}

#[test]
fn zero_cp_probability_matches_zero_cp_rate() {
    let mut rng = common::rng(6);
    for _ in 0..5 {
        let ctx = with_p_day(&common::random_day(&mut rng, 24, 30), 0.0);
        let battery = BatterySpec::reference();
        let tariff = TariffConfig::synthetic_default();
        let a = optimize_day(&ctx, &battery, &tariff, &SolveOptions::default()).unwrap();
        let no_cp = TariffConfig {
            lambda_cp: 0.0,
            ..tariff.clone()
        };
        let b = optimize_day(&ctx, &battery, &no_cp, &SolveOptions::default()).unwrap();
        assert_eq!(a.terms.ecp, 0.0);
        assert!((a.mip.objective - b.mip.objective).abs() <= 1e-9 * b.mip.objective.abs());
        assert_eq!(a.schedule, b.schedule);
    }
}

#[test]
fn objective_ignores_scenario_order() {
    let mut rng = common::rng(7);
    let ctx = common::random_day(&mut rng, 24, 25);
    let battery = BatterySpec::reference();
    let tariff = TariffConfig::synthetic_default();
    let mut rows: Vec<Vec<f64>> = ctx.mg_scenarios.paths().map(<[f64]>::to_vec).collect();
    rows.reverse();
    rows.swap(3, 17);
    let mut permuted = ctx.clone();
    permuted.mg_scenarios = ScenarioSet::from_rows(Entity::new(Entity::MG), ctx.date, &rows, 0).unwrap();
    let a = optimize_day(&ctx, &battery, &tariff, &SolveOptions::default()).unwrap();
    let b = optimize_day(&permuted, &battery, &tariff, &SolveOptions::default()).unwrap();
    assert!((a.mip.objective - b.mip.objective).abs() <= 1e-7 * a.mip.objective.abs());
}

#[test]
fn ramp_falls_as_degradation_cost_rises() {
    let mut rng = common::rng(8);
    let ctx = common::random_day(&mut rng, 24, 20);
    let battery = BatterySpec::reference();
    let mut last = f64::INFINITY;
    for deg in [0.0, 10.0, 50.0, 200.0, 1000.0, 5000.0] {
        let tariff = TariffConfig {
            lambda_deg: deg,
            ..TariffConfig::synthetic_default()
        };
        let sol = optimize_day(&ctx, &battery, &tariff, &SolveOptions::default()).unwrap();
        let ramp = sol.schedule.total_ramp();
        assert!(ramp <= last + 1e-7, "lambda_deg {deg}: ramp {ramp} after {last}");
        last = ramp;
    }
}

#[test]
fn solves_are_deterministic_across_batches_and_threads() {
    let mut rng = common::rng(9);
    let ctx = common::random_day(&mut rng, 24, 100);
    let battery = BatterySpec::reference();
    let tariff = TariffConfig::synthetic_default();
    let inst = build_milp(&ctx, &battery, &tariff).unwrap();
    let base = milpsolve::solve_milp(&inst, &SolveOptions::default()).unwrap();
    for threads in [1, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let res = pool.install(|| milpsolve::solve_milp(&inst, &SolveOptions::default()).unwrap());
        assert_eq!(res.values, base.values);
    }
    let cold = milpsolve::solve_milp(
        &inst,
        &SolveOptions {
            warm_start: false,
            ..Default::default()
        },
    )
    .unwrap();
    assert!((cold.objective - base.objective).abs() <= 1e-7 * base.objective.abs());
}

/// Recomputes per-scenario maxima and ramps from the solution vector.
fn check_linearization(ctx: &DayContext, battery: &BatterySpec, tariff: &TariffConfig) {
    let sol = optimize_day(ctx, battery, tariff, &SolveOptions::default()).unwrap();
    let lay = sol.layout;
    let x = &sol.mip.values;
    assert!(sol.mip.root_bound <= sol.mip.objective + 1e-7 * sol.mip.objective.abs());
    if tariff.lambda_ncp * ctx.ncp_day_prob > 0.0 {
        for (i, p) in ctx.mg_scenarios.paths().enumerate() {
            let peak = scenario_peak(p, &ctx.pv_forecast, &sol.schedule, battery);
            assert!((x[lay.s(i)] - peak).abs() <= 1e-7 * peak.max(1.0), "s_{i} {} vs {peak}", x[lay.s(i)]);
        }
    }
    if tariff.lambda_deg > 0.0 {
        let mut prev = 0.0;
        for h in 0..lay.hours {
            let a = x[lay.pi_minus(h)] - x[lay.pi_plus(h)];
            let uv = x[lay.u(h)] + x[lay.v(h)];
            assert!((uv - (a - prev).abs()).abs() <= 1e-7, "hour {h}: u+v {uv} vs {}", (a - prev).abs());
            prev = a;
        }
    }
    let t = sol.terms.total();
    assert!((t - sol.mip.objective).abs() <= 1e-6 * t.abs(), "{t} vs {}", sol.mip.objective);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn epigraph_and_ramp_variables_are_tight(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let ctx = common::random_day(&mut rng, 24, 20);
        let tariff = common::random_tariff(&mut rng, 24);
        let battery = common::random_battery(&mut rng);
        check_linearization(&ctx, &battery, &tariff);
    }
}
