//! Settlement of realized days: expected-charge P&L with forecast
//! probabilities, final P&L with realized peak indicators, running peak
//! bookkeeping and the season comparison report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    is_cp_business_day, BatterySpec, CpSeason, DayMode, HourlySeries, PeakProbabilities, Schedule,
    TariffConfig,
};
use crate::peakprob::argmax_hour;

/// Grid-side net load per hour: load − PV − battery output.
pub fn net_load(
    schedule: &Schedule,
    mg_load: &[f64],
    pv: &[f64],
    battery: &BatterySpec,
) -> Result<Vec<f64>> {
    let n = schedule.hours();
    for len in [mg_load.len(), pv.len()] {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: len,
            });
        }
    }
    Ok((0..n)
        .map(|h| mg_load[h] - pv[h] - schedule.battery_mw(h, battery))
        .collect())
}

/// The day's probabilities as seen at decision time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayProbabilities {
    pub cp: PeakProbabilities,
    pub cp5: Option<PeakProbabilities>,
    pub ncp_day: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyPnl {
    pub date: NaiveDate,
    pub hourly_ecc: Vec<f64>,
    /// CP and 5CP expected charges per hour.
    pub hourly_ecp: Vec<f64>,
    pub ecc: f64,
    pub ecp: f64,
    pub ecp_pjm: f64,
    pub edc: f64,
    pub total: f64,
}

/// Expected-charge P&L on realized load: energy at P_h, CP charges weighted
/// by the day and hour probabilities, and the NCP charge weighted by the
/// NCP-day probability at the hour of maximum realized net load.
pub fn actual_pnl(
    date: NaiveDate,
    schedule: &Schedule,
    mg_load: &[f64],
    pv: &[f64],
    probs: &DayProbabilities,
    tariff: &TariffConfig,
    battery: &BatterySpec,
) -> Result<DailyPnl> {
    schedule.validate(battery)?;
    let net = net_load(schedule, mg_load, pv, battery)?;
    let n = net.len();
    let price = tariff.energy_price.for_day(date, n)?;
    let cp_w = probs.cp.weights();
    let cp5_w = probs.cp5.as_ref().map(PeakProbabilities::weights);
    let hourly_ecc: Vec<f64> = (0..n).map(|h| price[h] * net[h]).collect();
    let mut hourly_ecp = vec![0.0; n];
    let mut ecp = 0.0;
    let mut ecp_pjm = 0.0;
    for h in 0..n {
        let cp = tariff.lambda_cp * cp_w[h] * net[h];
        let cp5 = match (tariff.lambda_5cp, &cp5_w) {
            (Some(l), Some(w)) => l * w[h] * net[h],
            _ => 0.0,
        };
        ecp += cp;
        ecp_pjm += cp5;
        hourly_ecp[h] = cp + cp5;
    }
    let ecc: f64 = hourly_ecc.iter().sum();
    let edc = tariff.lambda_ncp * probs.ncp_day * net[argmax_hour(&net)];
    Ok(DailyPnl {
        date,
        hourly_ecc,
        hourly_ecp,
        ecc,
        ecp,
        ecp_pjm,
        edc,
        total: ecc + ecp + ecp_pjm + edc,
    })
}

/// An hourly peak: which day, which hour, what level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakMark {
    pub date: NaiveDate,
    pub hour: usize,
    pub level: f64,
}

/// The season's realized system peaks, known after the fact.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SeasonPeaks {
    pub cp: Option<PeakMark>,
    /// Up to five distinct-day peaks, highest first.
    pub five_cp: Vec<PeakMark>,
}

fn day_peak_mark(date: NaiveDate, load: &[f64]) -> PeakMark {
    let hour = argmax_hour(load);
    PeakMark {
        date,
        hour,
        level: load[hour],
    }
}

/// Inserts a day's peak into a distinct-day top-five list. Each day enters
/// at most once with its single highest hour; ties keep the earlier day.
fn insert_top5(list: &mut Vec<PeakMark>, mark: PeakMark) -> bool {
    if list.iter().any(|m| m.date == mark.date) {
        return false;
    }
    let pos = list.iter().position(|m| mark.level > m.level).unwrap_or(list.len());
    if pos >= 5 {
        return false;
    }
    list.insert(pos, mark);
    list.truncate(5);
    true
}

/// Scans the season's business days of `year`. The 1CP comes from the zone
/// load, the 5CP list from the system load (the zone when absent).
pub fn season_peaks(
    zone: &HourlySeries,
    system: Option<&HourlySeries>,
    season: &CpSeason,
    year: i32,
) -> SeasonPeaks {
    let mut out = SeasonPeaks::default();
    for d in season.business_days(year) {
        if let Ok(z) = zone.day_slice(d, DayMode::Strict) {
            let m = day_peak_mark(d, &z);
            if out.cp.is_none_or(|c| m.level > c.level) {
                out.cp = Some(m);
            }
        }
        if let Ok(s) = system.unwrap_or(zone).day_slice(d, DayMode::Strict) {
            insert_top5(&mut out.five_cp, day_peak_mark(d, &s));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NcpAccounting {
    /// Charge the increase of the monthly maximum on each update day, so a
    /// month's charges sum to λ_NCP × its final maximum.
    #[default]
    Incremental,
    /// Charge the full new level on every update day.
    AsWritten,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CpAttribution {
    /// The season's CP hours are known; only those hours are charged.
    ExPost(SeasonPeaks),
    /// Charge whenever the zone sets a new running season maximum.
    #[default]
    Running,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SettleModes {
    pub accounting: NcpAccounting,
    pub attribution: CpAttribution,
}

/// Running peaks threaded through the season.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LedgerState {
    pub last_date: Option<NaiveDate>,
    pub month: Option<(i32, u32)>,
    /// Highest net load of the current month so far.
    pub month_max: Option<PeakMark>,
    pub season_year: Option<i32>,
    /// Highest business-day zone load of the season so far.
    pub season_cp: Option<PeakMark>,
    pub five_cp: Vec<PeakMark>,
}

/// Advances the running peaks by one realized day.
pub fn update_running_peaks(
    state: &LedgerState,
    zone_load: &[f64],
    system_load: Option<&[f64]>,
    mg_net_load: &[f64],
    date: NaiveDate,
    season: &CpSeason,
) -> Result<LedgerState> {
    if let Some(last) = state.last_date {
        if date <= last {
            return Err(Error::OutOfOrder { last, got: date });
        }
    }
    let mut next = state.clone();
    next.last_date = Some(date);
    let month = (date.year(), date.month());
    if next.month != Some(month) {
        next.month = Some(month);
        next.month_max = None;
    }
    let net = day_peak_mark(date, mg_net_load);
    if next.month_max.is_none_or(|m| net.level > m.level) {
        next.month_max = Some(net);
    }
    if next.season_year != Some(date.year()) {
        next.season_year = Some(date.year());
        next.season_cp = None;
        next.five_cp.clear();
    }
    if is_cp_business_day(date, season) {
        let zone = day_peak_mark(date, zone_load);
        if next.season_cp.is_none_or(|c| zone.level > c.level) {
            next.season_cp = Some(zone);
        }
        let sys = day_peak_mark(date, system_load.unwrap_or(zone_load));
        insert_top5(&mut next.five_cp, sys);
    }
    Ok(next)
}

/// Realized loads of one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayActuals {
    pub mg_load: Vec<f64>,
    pub pv: Vec<f64>,
    pub zone_load: Vec<f64>,
    #[serde(default)]
    pub system_load: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayEntry {
    pub date: NaiveDate,
    pub ecc: f64,
    pub cp: f64,
    pub cp5: f64,
    pub ncp: f64,
    pub total: f64,
    /// Realized net load after the battery.
    pub net: Vec<f64>,
    pub ncp_update: bool,
    /// Hour charged for CP on this day, if any.
    pub cp_hour: Option<usize>,
    pub cp5_hour: Option<usize>,
}

/// Final P&L of one day given the running state before it; returns the
/// entry and the state after it.
pub fn final_pnl(
    date: NaiveDate,
    schedule: &Schedule,
    actuals: &DayActuals,
    state: &LedgerState,
    tariff: &TariffConfig,
    battery: &BatterySpec,
    modes: &SettleModes,
) -> Result<(DayEntry, LedgerState)> {
    schedule.validate(battery)?;
    let net = net_load(schedule, &actuals.mg_load, &actuals.pv, battery)?;
    let n = net.len();
    if actuals.zone_load.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: actuals.zone_load.len(),
        });
    }
    let next = update_running_peaks(
        state,
        &actuals.zone_load,
        actuals.system_load.as_deref(),
        &net,
        date,
        &tariff.cp_season,
    )?;
    let price = tariff.energy_price.for_day(date, n)?;
    let ecc: f64 = (0..n).map(|h| price[h] * net[h]).sum();

    let (cp_hour, cp5_hour) = match &modes.attribution {
        CpAttribution::ExPost(peaks) => (
            peaks.cp.filter(|m| m.date == date).map(|m| m.hour),
            peaks.five_cp.iter().find(|m| m.date == date).map(|m| m.hour),
        ),
        CpAttribution::Running => {
            let business = is_cp_business_day(date, &tariff.cp_season);
            let cp = next
                .season_cp
                .filter(|m| business && m.date == date)
                .map(|m| m.hour);
            let cp5 = next
                .five_cp
                .iter()
                .find(|m| business && m.date == date)
                .map(|m| m.hour);
            (cp, cp5)
        }
    };
    let cp = cp_hour.map_or(0.0, |h| tariff.lambda_cp * net[h]);
    let cp5 = match (cp5_hour, tariff.lambda_5cp) {
        (Some(h), Some(l)) => l * net[h],
        _ => 0.0,
    };

    let new_max = next.month_max.expect("set by update");
    let ncp_update = new_max.date == date;
    let ncp = if !ncp_update {
        0.0
    } else {
        let prev = if state.month == next.month {
            state.month_max.map_or(0.0, |m| m.level)
        } else {
            0.0
        };
        match modes.accounting {
            NcpAccounting::Incremental => tariff.lambda_ncp * (new_max.level - prev),
            NcpAccounting::AsWritten => tariff.lambda_ncp * new_max.level,
        }
    };
    Ok((
        DayEntry {
            date,
            ecc,
            cp,
            cp5,
            ncp,
            total: ecc + cp + cp5 + ncp,
            net,
            ncp_update,
            cp_hour,
            cp5_hour: cp5_hour.filter(|_| tariff.lambda_5cp.is_some()),
        },
        next,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthEntry {
    pub year: i32,
    pub month: u32,
    pub ncp_level_mw: f64,
    pub ncp_date: NaiveDate,
    pub ncp_hour: usize,
    pub demand_charge_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonEntry {
    pub cp_date: NaiveDate,
    pub cp_hour: usize,
    /// Microgrid net load at the CP hour.
    pub cp_net_mw: f64,
    pub cp_charge_usd: f64,
    pub cp5_charge_usd: f64,
}

/// Day-by-day settlement of one policy over a season.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BillLedger {
    pub policy: String,
    pub modes: SettleModes,
    pub days: Vec<DayEntry>,
    pub state: LedgerState,
}

impl BillLedger {
    pub fn new(policy: impl Into<String>, modes: SettleModes) -> Self {
        BillLedger {
            policy: policy.into(),
            modes,
            days: Vec::new(),
            state: LedgerState::default(),
        }
    }

    /// Settles the next day in chronological order.
    pub fn settle(
        &mut self,
        date: NaiveDate,
        schedule: &Schedule,
        actuals: &DayActuals,
        tariff: &TariffConfig,
        battery: &BatterySpec,
    ) -> Result<&DayEntry> {
        let (entry, next) = final_pnl(date, schedule, actuals, &self.state, tariff, battery, &self.modes)?;
        self.state = next;
        self.days.push(entry);
        Ok(self.days.last().expect("just pushed"))
    }

    /// Each month's true demand charge: λ_NCP × its highest net load.
    pub fn months(&self, tariff: &TariffConfig) -> Vec<MonthEntry> {
        let mut by_month: BTreeMap<(i32, u32), PeakMark> = BTreeMap::new();
        for d in &self.days {
            let m = day_peak_mark(d.date, &d.net);
            by_month
                .entry((d.date.year(), d.date.month()))
                .and_modify(|best| {
                    if m.level > best.level {
                        *best = m;
                    }
                })
                .or_insert(m);
        }
        by_month
            .into_iter()
            .map(|((year, month), m)| MonthEntry {
                year,
                month,
                ncp_level_mw: m.level,
                ncp_date: m.date,
                ncp_hour: m.hour,
                demand_charge_usd: tariff.lambda_ncp * m.level,
            })
            .collect()
    }

    /// The season's CP bill. Uses the ex-post peaks when known, otherwise
    /// the final running peaks.
    pub fn season(&self, tariff: &TariffConfig) -> Option<SeasonEntry> {
        let (cp, five) = match &self.modes.attribution {
            CpAttribution::ExPost(p) => (p.cp?, p.five_cp.clone()),
            CpAttribution::Running => (self.state.season_cp?, self.state.five_cp.clone()),
        };
        let net_at = |m: &PeakMark| {
            self.days
                .iter()
                .find(|d| d.date == m.date)
                .map(|d| d.net[m.hour])
        };
        let cp_net = net_at(&cp)?;
        let cp5 = match tariff.lambda_5cp {
            Some(l) => five.iter().map(|m| net_at(m).map(|v| l * v)).sum::<Option<f64>>()?,
            None => 0.0,
        };
        Some(SeasonEntry {
            cp_date: cp.date,
            cp_hour: cp.hour,
            cp_net_mw: cp_net,
            cp_charge_usd: tariff.lambda_cp * cp_net,
            cp5_charge_usd: cp5,
        })
    }

    pub fn total_ecc(&self) -> f64 {
        self.days.iter().map(|d| d.ecc).sum()
    }

    /// Per-day CSV `date,ecc,ecp,edc,total`.
    pub fn daily_csv(&self) -> String {
        let mut out = String::from("date,ecc,ecp,edc,total\n");
        for d in &self.days {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6}",
                d.date,
                d.ecc,
                d.cp + d.cp5,
                d.ncp,
                d.total
            );
        }
        out
    }
}

/// One line of the season comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonReport {
    pub policies: Vec<String>,
    pub rows: Vec<ReportRow>,
    /// Per day, each policy's final P&L total.
    pub daily: Vec<(NaiveDate, Vec<f64>)>,
}

/// Final bill comparison across policies: total energy cost, one demand
/// charge row per month, the CP charge(s) and the total.
pub fn season_report(ledgers: &[BillLedger], tariff: &TariffConfig) -> Result<SeasonReport> {
    let first = ledgers
        .first()
        .ok_or_else(|| Error::IncompleteSeason("no ledgers".into()))?;
    if first.days.is_empty() {
        return Err(Error::IncompleteSeason(format!("{} has no days", first.policy)));
    }
    let dates: Vec<NaiveDate> = first.days.iter().map(|d| d.date).collect();
    if let Some(w) = dates.windows(2).find(|w| w[1] != w[0].succ_opt().unwrap_or(w[0])) {
        return Err(Error::IncompleteSeason(format!(
            "days missing between {} and {}",
            w[0], w[1]
        )));
    }
    for l in ledgers {
        if l.days.iter().map(|d| d.date).ne(dates.iter().copied()) {
            return Err(Error::IncompleteSeason(format!(
                "{} does not cover the same days as {}",
                l.policy, first.policy
            )));
        }
    }
    let seasons: Vec<SeasonEntry> = ledgers
        .iter()
        .map(|l| {
            l.season(tariff).ok_or_else(|| {
                Error::IncompleteSeason(format!("{} has no settled CP day", l.policy))
            })
        })
        .collect::<Result<_>>()?;
    let months: Vec<Vec<MonthEntry>> = ledgers.iter().map(|l| l.months(tariff)).collect();

    let mut rows = vec![ReportRow {
        label: "Total ECC".into(),
        values: ledgers.iter().map(BillLedger::total_ecc).collect(),
    }];
    for (k, m) in months[0].iter().enumerate() {
        rows.push(ReportRow {
            label: format!("Demand charge {}-{:02}", m.year, m.month),
            values: months.iter().map(|ms| ms[k].demand_charge_usd).collect(),
        });
    }
    rows.push(ReportRow {
        label: "CP charge".into(),
        values: seasons.iter().map(|s| s.cp_charge_usd).collect(),
    });
    if tariff.lambda_5cp.is_some() {
        rows.push(ReportRow {
            label: "5CP charge".into(),
            values: seasons.iter().map(|s| s.cp5_charge_usd).collect(),
        });
    }
    let totals: Vec<f64> = (0..ledgers.len())
        .map(|j| rows.iter().map(|r| r.values[j]).sum())
        .collect();
    rows.push(ReportRow {
        label: "Total".into(),
        values: totals,
    });

    let daily = dates
        .iter()
        .enumerate()
        .map(|(i, d)| (*d, ledgers.iter().map(|l| l.days[i].total).collect()))
        .collect();
    Ok(SeasonReport {
        policies: ledgers.iter().map(|l| l.policy.clone()).collect(),
        rows,
        daily,
    })
}

impl SeasonReport {
    fn with_delta(&self, v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        if v.len() >= 2 {
            out.push(v[0] - v[1]);
        }
        out
    }

    /// With two or more policies a delta column (first − second) is appended.
    fn header(&self) -> Vec<String> {
        let mut header = self.policies.clone();
        if header.len() >= 2 {
            header.push(format!("delta({}-{})", self.policies[0], self.policies[1]));
        }
        header
    }

    fn columns(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let values = self.rows.iter().map(|r| self.with_delta(&r.values)).collect();
        (self.header(), values)
    }

    pub fn to_csv(&self) -> String {
        let (header, values) = self.columns();
        let mut out = format!("item,{}\n", header.join(","));
        for (r, v) in self.rows.iter().zip(values) {
            let cells: Vec<String> = v.iter().map(|x| format!("{x:.2}")).collect();
            let _ = writeln!(out, "{},{}", r.label, cells.join(","));
        }
        out
    }

    pub fn to_table(&self) -> String {
        let (header, values) = self.columns();
        let label_w = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(4).max(4);
        let cells: Vec<Vec<String>> = values
            .iter()
            .map(|v| v.iter().map(|x| format!("{x:.2}")).collect())
            .collect();
        let col_w: Vec<usize> = (0..header.len())
            .map(|j| {
                cells
                    .iter()
                    .map(|c| c[j].len())
                    .chain([header[j].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = format!("{:<label_w$}", "item");
        for (h, w) in header.iter().zip(&col_w) {
            let _ = write!(out, "  {h:>w$}");
        }
        out.push('\n');
        for (r, c) in self.rows.iter().zip(&cells) {
            let _ = write!(out, "{:<label_w$}", r.label);
            for (x, w) in c.iter().zip(&col_w) {
                let _ = write!(out, "  {x:>w$}");
            }
            out.push('\n');
        }
        out
    }

    /// `date,<policy>...[,delta]` of daily final P&L totals.
    pub fn daily_csv(&self) -> String {
        let mut out = format!("date,{}\n", self.header().join(","));
        for (d, v) in &self.daily {
            let cells: Vec<String> = self.with_delta(v).iter().map(|x| format!("{x:.6}")).collect();
            let _ = writeln!(out, "{d},{}", cells.join(","));
        }
        out
    }
}
