//! Settles a synthetic season twice: once through the final ledger and once
//! through `actual_pnl` with the probabilities replaced by the realized
//! peak indicators.

use chrono::NaiveDate;
use cpdispatch::ingest::DatasetBundle;
use cpdispatch::model::{BatterySpec, DayMode, Entity, PeakProbabilities, Schedule, TariffConfig};
use cpdispatch::settle::{
    actual_pnl, season_peaks, BillLedger, CpAttribution, DayActuals, DayProbabilities, NcpAccounting, SettleModes,
};

pub fn day_actuals(bundle: &DatasetBundle, d: NaiveDate) -> DayActuals {
    let get = |s: &cpdispatch::model::HourlySeries| s.day_slice(d, DayMode::Strict).unwrap();
    DayActuals {
        mg_load: get(bundle.mg_load()),
        pv: get(bundle.pv_actual()),
        zone_load: get(bundle.ps_actual()),
        system_load: Some(get(bundle.ma_actual())),
    }
}

fn indicator(d: NaiveDate, entity: &str, hour: Option<usize>) -> PeakProbabilities {
    match hour {
        Some(h) => {
            let mut p = vec![0.0; 24];
            p[h] = 1.0;
            PeakProbabilities::new(d, Entity::new(entity), 1.0, p).unwrap()
        }
        None => PeakProbabilities::never(d, Entity::new(entity), 24),
    }
}

/// Largest absolute daily difference in USD between the two routes over
/// the days `from..=to`, with `schedule(d)` dispatched each day.
pub fn max_bridge_gap(
    bundle: &DatasetBundle,
    tariff: &TariffConfig,
    battery: &BatterySpec,
    (from, to): (NaiveDate, NaiveDate),
    schedule: impl Fn(NaiveDate) -> Schedule,
) -> (f64, usize) {
    let year = chrono::Datelike::year(&from);
    let peaks = season_peaks(bundle.ps_actual(), Some(bundle.ma_actual()), &tariff.cp_season, year);
    let modes = SettleModes {
        accounting: NcpAccounting::AsWritten,
        attribution: CpAttribution::ExPost(peaks.clone()),
    };
    let mut ledger = BillLedger::new("bridge", modes);
    let mut worst: f64 = 0.0;
    let mut days = 0;
    for d in from.iter_days().take_while(|d| *d <= to) {
        let s = schedule(d);
        let a = day_actuals(bundle, d);
        let entry = ledger.settle(d, &s, &a, tariff, battery).unwrap().clone();
        let cp_hour = peaks.cp.filter(|m| m.date == d).map(|m| m.hour);
        let cp5_hour = peaks.five_cp.iter().find(|m| m.date == d).map(|m| m.hour);
        let probs = DayProbabilities {
            cp: indicator(d, Entity::PS, cp_hour),
            cp5: tariff.lambda_5cp.map(|_| indicator(d, Entity::MA, cp5_hour)),
            ncp_day: if entry.ncp_update { 1.0 } else { 0.0 },
        };
        let pnl = actual_pnl(d, &s, &a.mg_load, &a.pv, &probs, tariff, battery).unwrap();
        worst = worst.max((pnl.total - entry.total).abs());
        days += 1;
    }
    (worst, days)
}
