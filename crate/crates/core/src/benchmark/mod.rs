//! The rule-based baseline: fixed charge and discharge windows plus a
//! CP-alert window driven only by the public regional forecast.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{is_cp_business_day, BatterySpec, CpSeason, DayMode, HourlySeries, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Charge,
    Discharge,
}

/// Constant action over hours `start..end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub name: String,
    pub start: usize,
    pub end: usize,
    pub action: Action,
    /// Fraction of capacity per hour. `None` picks the largest rate that
    /// reaches the SOC limit exactly at the window's end.
    #[serde(default)]
    pub rate: Option<f64>,
    /// Active only on alert days.
    #[serde(default)]
    pub alert_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPolicy {
    pub windows: Vec<Window>,
    /// Alert fires when the day-ahead regional peak forecast exceeds this
    /// quantile of the season's earlier forecast peaks.
    pub alert_quantile: f64,
    #[serde(default)]
    pub tuned_on: Option<(i32, i32)>,
}

impl Default for BenchmarkPolicy {
    fn default() -> Self {
        let w = |name: &str, start, end, action, alert_only| Window {
            name: name.into(),
            start,
            end,
            action,
            rate: None,
            alert_only,
        };
        BenchmarkPolicy {
            windows: vec![
                w("night_charge", 0, 3, Action::Charge, false),
                w("peak1_discharge", 5, 8, Action::Discharge, false),
                // read as 11AM to 2PM, after the morning peak
                w("midday_charge", 11, 14, Action::Charge, false),
                w("cp_discharge", 16, 18, Action::Discharge, true),
                w("peak2_discharge", 19, 22, Action::Discharge, false),
            ],
            alert_quantile: 0.95,
            tuned_on: None,
        }
    }
}

impl BenchmarkPolicy {
    pub fn validate(&self, battery: &BatterySpec) -> Result<()> {
        let mut used = [false; 24];
        for w in &self.windows {
            if w.start >= w.end || w.end > 24 {
                return Err(Error::Config(format!(
                    "window {} covers {}..{}, outside 0..24",
                    w.name, w.start, w.end
                )));
            }
            for h in w.start..w.end {
                if used[h] {
                    return Err(Error::Config(format!("window {} overlaps hour {h}", w.name)));
                }
                used[h] = true;
            }
            let limit = match w.action {
                Action::Charge => battery.max_charge_fraction(),
                Action::Discharge => battery.max_discharge_fraction(),
            };
            if let Some(r) = w.rate {
                if !(r >= 0.0 && r <= limit) {
                    return Err(Error::Config(format!(
                        "window {} rate {r} outside [0, {limit}]",
                        w.name
                    )));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.alert_quantile) {
            return Err(Error::Config(format!(
                "alert quantile {} outside [0, 1]",
                self.alert_quantile
            )));
        }
        Ok(())
    }
}

/// The day's schedule. Every hour is clipped so SOC stays within bounds;
/// later windows use whatever energy earlier windows left.
pub fn benchmark_schedule(policy: &BenchmarkPolicy, alert: bool, battery: &BatterySpec) -> Schedule {
    let hours = 24;
    let mut pi_minus = vec![0.0; hours];
    let mut pi_plus = vec![0.0; hours];
    let mut soc = battery.soc_init;
    let mut h = 0;
    while h < hours {
        let Some(w) = policy
            .windows
            .iter()
            .find(|w| w.start == h && (alert || !w.alert_only))
        else {
            h += 1;
            continue;
        };
        let len = (w.end - w.start) as f64;
        match w.action {
            Action::Charge => {
                let rate = w.rate.unwrap_or_else(|| {
                    let need = (battery.soc_max - soc).max(0.0) / battery.eta_charge;
                    (need / len).min(battery.max_charge_fraction())
                });
                for k in w.start..w.end {
                    let room = ((battery.soc_max - soc) / battery.eta_charge).max(0.0);
                    pi_minus[k] = rate.min(room);
                    soc += pi_minus[k] * battery.eta_charge;
                }
            }
            Action::Discharge => {
                let rate = w.rate.unwrap_or_else(|| {
                    let avail = (soc - battery.soc_min).max(0.0) * battery.eta_discharge;
                    (avail / len).min(battery.max_discharge_fraction())
                });
                for k in w.start..w.end {
                    let avail = ((soc - battery.soc_min) * battery.eta_discharge).max(0.0);
                    pi_plus[k] = rate.min(avail);
                    soc -= pi_plus[k] / battery.eta_discharge;
                }
            }
        }
        h = w.end;
    }
    Schedule::from_actions(pi_minus, pi_plus, battery)
}

/// Linear-interpolation quantile of unsorted data.
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

fn day_peak(series: &HourlySeries, d: NaiveDate) -> Option<f64> {
    series
        .day_slice(d, DayMode::Strict)
        .ok()
        .map(|v| v.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Forecast peaks of the season's business days before `date` in its year.
fn prior_peaks(forecast: &HourlySeries, date: NaiveDate, season: &CpSeason) -> Vec<f64> {
    season
        .window
        .days_in_year(date.year())
        .take_while(|d| *d < date)
        .filter(|d| season.is_business_day(*d))
        .filter_map(|d| day_peak(forecast, d))
        .collect()
}

/// Whether the alert fires on `date`. Never fires off-season or before the
/// season has any earlier business day to compare with.
pub fn alert_fires(forecast: &HourlySeries, date: NaiveDate, q: f64, season: &CpSeason) -> Result<bool> {
    if !is_cp_business_day(date, season) {
        return Ok(false);
    }
    let today = day_peak(forecast, date).ok_or_else(|| {
        Error::gap(forecast.entity().as_str(), format!("{date}: no full forecast day"))
    })?;
    let prior = prior_peaks(forecast, date, season);
    if prior.is_empty() {
        return Ok(false);
    }
    Ok(today > quantile(&prior, q))
}

/// Quantiles searched by [`tune_alert`].
pub const ALERT_GRID: [f64; 12] = [
    0.90, 0.91, 0.92, 0.93, 0.94, 0.95, 0.96, 0.97, 0.98, 0.99, 0.995, 0.999,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertTuning {
    pub quantile: f64,
    pub score: f64,
    pub cp_days_caught: usize,
    pub false_alerts: usize,
    pub seasons: usize,
    /// No grid point caught any CP day; the largest quantile was returned.
    pub degenerate: bool,
}

/// Alert outcome of one quantile over the backtest years:
/// `(CP days caught, false alerts)`. The CP day of a season is the business
/// day with the highest actual regional hourly load.
pub fn alert_record(
    forecast: &HourlySeries,
    actual: &HourlySeries,
    years: (i32, i32),
    season: &CpSeason,
    q: f64,
) -> Result<(usize, usize)> {
    let mut caught = 0;
    let mut false_alerts = 0;
    for year in years.0..=years.1 {
        let days: Vec<NaiveDate> = season
            .business_days(year)
            .into_iter()
            .filter(|d| forecast.has_full_day(*d) && actual.has_full_day(*d))
            .collect();
        let cp_day = days
            .iter()
            .copied()
            .map(|d| (d, day_peak(actual, d).unwrap_or(f64::NEG_INFINITY)))
            .fold(None, |best: Option<(NaiveDate, f64)>, (d, v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((d, v)),
            })
            .map(|(d, _)| d);
        for d in days {
            if alert_fires(forecast, d, q, season)? {
                if Some(d) == cp_day {
                    caught += 1;
                } else {
                    false_alerts += 1;
                }
            }
        }
    }
    Ok((caught, false_alerts))
}

/// Grid search for the alert quantile maximizing
/// `caught − penalty × false alerts`; ties go to the larger quantile.
pub fn tune_alert(
    forecast: &HourlySeries,
    actual: &HourlySeries,
    years: (i32, i32),
    season: &CpSeason,
    penalty: f64,
) -> Result<AlertTuning> {
    for year in years.0..=years.1 {
        let covered = season
            .business_days(year)
            .iter()
            .any(|d| forecast.has_full_day(*d) && actual.has_full_day(*d));
        if !covered {
            return Err(Error::InsufficientHistory(format!(
                "no regional forecast and actual data for the {year} season"
            )));
        }
    }
    let mut best: Option<AlertTuning> = None;
    for q in ALERT_GRID {
        let (caught, false_alerts) = alert_record(forecast, actual, years, season, q)?;
        let score = caught as f64 - penalty * false_alerts as f64;
        if best.as_ref().is_none_or(|b| score >= b.score) {
            best = Some(AlertTuning {
                quantile: q,
                score,
                cp_days_caught: caught,
                false_alerts,
                seasons: (years.1 - years.0 + 1) as usize,
                degenerate: false,
            });
        }
    }
    let mut best = best.expect("grid is nonempty");
    if best.cp_days_caught == 0 {
        log::warn!("alert tuning caught no CP day; using the largest quantile");
        let q = ALERT_GRID[ALERT_GRID.len() - 1];
        let (caught, false_alerts) = alert_record(forecast, actual, years, season, q)?;
        best = AlertTuning {
            quantile: q,
            score: caught as f64 - penalty * false_alerts as f64,
            cp_days_caught: caught,
            false_alerts,
            seasons: best.seasons,
            degenerate: true,
        };
    }
    Ok(best)
}
