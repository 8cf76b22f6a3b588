//! The day-ahead stochastic program: energy cost, expected CP charge,
//! expected NCP demand charge (linearized through one epigraph variable per
//! scenario) and a ramp penalty, over the battery's feasible actions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milpsolve::{self, MilpInstance, MipResult, MipStatus, Row, SolveOptions};
use crate::model::schedule::soc_path;
use crate::model::{BatterySpec, DayContext, Schedule, TariffConfig};

/// Variable indexing of a day instance: six per hour, then one per scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayLayout {
    pub hours: usize,
    pub n_scenarios: usize,
}

impl DayLayout {
    pub fn pi_minus(&self, h: usize) -> usize {
        6 * h
    }
    pub fn pi_plus(&self, h: usize) -> usize {
        6 * h + 1
    }
    pub fn soc(&self, h: usize) -> usize {
        6 * h + 2
    }
    pub fn b(&self, h: usize) -> usize {
        6 * h + 3
    }
    pub fn u(&self, h: usize) -> usize {
        6 * h + 4
    }
    pub fn v(&self, h: usize) -> usize {
        6 * h + 5
    }
    pub fn s(&self, i: usize) -> usize {
        6 * self.hours + i
    }
    pub fn n_vars(&self) -> usize {
        6 * self.hours + self.n_scenarios
    }
    /// Index of the first peak row; peak rows follow scenario by scenario.
    pub fn first_peak_row(&self) -> usize {
        5 * self.hours
    }
    pub fn peak_row(&self, i: usize, h: usize) -> usize {
        self.first_peak_row() + i * self.hours + h
    }
}

/// Per-hour objective weight on the microgrid's net draw: the energy price
/// plus the expected CP (and optional 5CP) rates.
pub fn hourly_weights(ctx: &DayContext, tariff: &TariffConfig) -> Result<Vec<f64>> {
    let hours = ctx.hours();
    let price = tariff.energy_price.for_day(ctx.date, hours)?;
    let cp = ctx.cp_probs.weights();
    let cp5 = match (tariff.lambda_5cp, &ctx.cp5_probs) {
        (Some(l), Some(p)) => p.weights().into_iter().map(|w| l * w).collect(),
        _ => vec![0.0; hours],
    };
    Ok((0..hours)
        .map(|h| price[h] + tariff.lambda_cp * cp[h] + cp5[h])
        .collect())
}

/// Assembles the day instance.
pub fn build_milp(
    ctx: &DayContext,
    battery: &BatterySpec,
    tariff: &TariffConfig,
) -> Result<MilpInstance> {
    battery.validate()?;
    tariff.validate()?;
    ctx.validate()?;
    let hours = ctx.hours();
    let n_s = ctx.n_scenarios();
    if n_s == 0 {
        return Err(Error::EmptyScenario);
    }
    let lay = DayLayout {
        hours,
        n_scenarios: n_s,
    };
    let cap = battery.capacity;
    let weights = hourly_weights(ctx, tariff)?;
    let net_mean = ctx.mean_net_load();

    let n = lay.n_vars();
    let mut names = vec![String::new(); n];
    let lower = vec![0.0; n];
    let mut upper = vec![1.0; n];
    let mut objective = vec![0.0; n];
    for h in 0..hours {
        names[lay.pi_minus(h)] = format!("pi_minus_{h}");
        names[lay.pi_plus(h)] = format!("pi_plus_{h}");
        names[lay.soc(h)] = format!("soc_{h}");
        names[lay.b(h)] = format!("b_{h}");
        names[lay.u(h)] = format!("u_{h}");
        names[lay.v(h)] = format!("v_{h}");
        upper[lay.u(h)] = f64::INFINITY;
        upper[lay.v(h)] = f64::INFINITY;
        objective[lay.pi_plus(h)] = -cap * weights[h];
        objective[lay.pi_minus(h)] = cap * weights[h];
        objective[lay.u(h)] = tariff.lambda_deg;
        objective[lay.v(h)] = tariff.lambda_deg;
    }
    let s_cost = tariff.lambda_ncp * ctx.ncp_day_prob / n_s as f64;
    for i in 0..n_s {
        names[lay.s(i)] = format!("s_{i}");
        upper[lay.s(i)] = f64::INFINITY;
        objective[lay.s(i)] = s_cost;
    }
    let objective_offset = weights.iter().zip(&net_mean).map(|(w, l)| w * l).sum();

    let mut rows = Vec::with_capacity(5 * hours + hours * n_s);
    for h in 0..hours {
        let mut coefs = vec![
            (lay.soc(h), 1.0),
            (lay.pi_minus(h), -battery.eta_charge),
            (lay.pi_plus(h), 1.0 / battery.eta_discharge),
        ];
        let rhs = if h == 0 {
            battery.soc_init
        } else {
            coefs.push((lay.soc(h - 1), -1.0));
            0.0
        };
        rows.push(Row {
            name: format!("soc_dyn_{h}"),
            coefs,
            lower: rhs,
            upper: rhs,
            lazy_group: None,
        });
    }
    for h in 0..hours {
        rows.push(Row {
            name: format!("charge_rate_{h}"),
            coefs: vec![(lay.pi_minus(h), cap), (lay.b(h), battery.max_charge)],
            lower: f64::NEG_INFINITY,
            upper: battery.max_charge,
            lazy_group: None,
        });
    }
    for h in 0..hours {
        rows.push(Row {
            name: format!("discharge_rate_{h}"),
            coefs: vec![(lay.pi_plus(h), cap), (lay.b(h), -battery.max_discharge)],
            lower: f64::NEG_INFINITY,
            upper: 0.0,
            lazy_group: None,
        });
    }
    for h in 0..hours {
        rows.push(Row {
            name: format!("soc_bounds_{h}"),
            coefs: vec![(lay.soc(h), 1.0)],
            lower: battery.soc_min,
            upper: battery.soc_max,
            lazy_group: None,
        });
    }
    for h in 0..hours {
        let mut coefs = vec![(lay.pi_minus(h), 1.0), (lay.pi_plus(h), -1.0)];
        if h > 0 {
            coefs.push((lay.pi_minus(h - 1), -1.0));
            coefs.push((lay.pi_plus(h - 1), 1.0));
        }
        coefs.push((lay.u(h), -1.0));
        coefs.push((lay.v(h), 1.0));
        rows.push(Row {
            name: format!("ramp_{h}"),
            coefs,
            lower: 0.0,
            upper: 0.0,
            lazy_group: None,
        });
    }
    for (i, path) in ctx.mg_scenarios.paths().enumerate() {
        for h in 0..hours {
            rows.push(Row {
                name: format!("peak_{i}_{h}"),
                coefs: vec![
                    (lay.s(i), 1.0),
                    (lay.pi_minus(h), -cap),
                    (lay.pi_plus(h), cap),
                ],
                lower: path[h] - ctx.pv_forecast[h],
                upper: f64::INFINITY,
                lazy_group: Some(i),
            });
        }
    }
    let binaries = (0..hours).map(|h| lay.b(h)).collect();
    Ok(MilpInstance {
        names,
        lower,
        upper,
        objective,
        objective_offset,
        rows,
        binaries,
    })
}

/// The objective's components evaluated directly from a schedule, with the
/// demand-charge term computed from per-scenario maxima.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub ecc: f64,
    pub ecp: f64,
    pub ecp_pjm: f64,
    pub edc: f64,
    pub edp: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.ecc + self.ecp + self.ecp_pjm + self.edc + self.edp
    }
}

/// Peak net draw of scenario `path` under the schedule, floored at zero.
pub fn scenario_peak(path: &[f64], pv: &[f64], schedule: &Schedule, battery: &BatterySpec) -> f64 {
    path.iter()
        .zip(pv)
        .enumerate()
        .map(|(h, (l, p))| l - p - schedule.battery_mw(h, battery))
        .fold(0.0, f64::max)
}

pub fn objective_terms(
    ctx: &DayContext,
    battery: &BatterySpec,
    tariff: &TariffConfig,
    schedule: &Schedule,
) -> Result<ObjectiveTerms> {
    schedule.validate(battery)?;
    let hours = ctx.hours();
    if schedule.hours() != hours {
        return Err(Error::InfeasibleSchedule(format!(
            "schedule has {} hours, day has {hours}",
            schedule.hours()
        )));
    }
    let price = tariff.energy_price.for_day(ctx.date, hours)?;
    let draw: Vec<f64> = ctx
        .mean_net_load()
        .iter()
        .enumerate()
        .map(|(h, l)| l - schedule.battery_mw(h, battery))
        .collect();
    let dot = |w: &[f64]| w.iter().zip(&draw).map(|(a, b)| a * b).sum::<f64>();
    let ecc = dot(&price);
    let ecp = tariff.lambda_cp * dot(&ctx.cp_probs.weights());
    let ecp_pjm = match (tariff.lambda_5cp, &ctx.cp5_probs) {
        (Some(l), Some(p)) => l * dot(&p.weights()),
        _ => 0.0,
    };
    let peaks: f64 = ctx
        .mg_scenarios
        .paths()
        .map(|p| scenario_peak(p, &ctx.pv_forecast, schedule, battery))
        .sum();
    let edc = tariff.lambda_ncp * ctx.ncp_day_prob * peaks / ctx.n_scenarios() as f64;
    let edp = tariff.lambda_deg * schedule.total_ramp();
    Ok(ObjectiveTerms {
        ecc,
        ecp,
        ecp_pjm,
        edc,
        edp,
    })
}

/// Reads the battery actions out of a solution vector. Sub-tolerance
/// activity in the inactive direction is dropped and the SOC path is
/// recomputed from the actions.
pub fn schedule_from_values(
    layout: &DayLayout,
    values: &[f64],
    battery: &BatterySpec,
) -> Schedule {
    let mut pi_minus = Vec::with_capacity(layout.hours);
    let mut pi_plus = Vec::with_capacity(layout.hours);
    let mut b = Vec::with_capacity(layout.hours);
    for h in 0..layout.hours {
        let mode = values[layout.b(h)] > 0.5;
        let m = values[layout.pi_minus(h)].clamp(0.0, battery.max_charge_fraction());
        let p = values[layout.pi_plus(h)].clamp(0.0, battery.max_discharge_fraction());
        pi_minus.push(if mode { 0.0 } else { m });
        pi_plus.push(if mode { p } else { 0.0 });
        b.push(mode);
    }
    let soc = soc_path(&pi_minus, &pi_plus, battery);
    Schedule {
        pi_plus,
        pi_minus,
        b,
        soc,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySolution {
    pub schedule: Schedule,
    pub terms: ObjectiveTerms,
    pub mip: MipResult,
    pub layout: DayLayout,
}

/// Builds and solves the day instance.
pub fn optimize_day(
    ctx: &DayContext,
    battery: &BatterySpec,
    tariff: &TariffConfig,
    opts: &SolveOptions,
) -> Result<DaySolution> {
    let instance = build_milp(ctx, battery, tariff)?;
    let mip = milpsolve::solve_milp(&instance, opts)?;
    if mip.status != MipStatus::Optimal {
        return Err(Error::Infeasible(format!("day {} has no feasible schedule", ctx.date)));
    }
    let layout = DayLayout {
        hours: ctx.hours(),
        n_scenarios: ctx.n_scenarios(),
    };
    let schedule = schedule_from_values(&layout, &mip.values, battery);
    let terms = objective_terms(ctx, battery, tariff, &schedule)?;
    Ok(DaySolution {
        schedule,
        terms,
        mip,
        layout,
    })
}
