use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use chrono::{DateTime, Duration, FixedOffset, NaiveDate, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HOURS_PER_DAY: usize = 24;

/// Series identifier such as `MA`, `PS`, `MG`, `PV`, `SSRD` or `PRICE`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Entity(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Megawatt,
    MegawattHour,
    UsdPerMwh,
    WattPerSquareMetre,
}

impl Entity {
    pub const MA: &'static str = "MA";
    pub const MA_FORECAST: &'static str = "MA_FCST";
    pub const PS: &'static str = "PS";
    pub const MG: &'static str = "MG";
    pub const MG_NET: &'static str = "MG_NET";
    pub const PV: &'static str = "PV";
    pub const SSRD: &'static str = "SSRD";
    pub const PRICE: &'static str = "PRICE";

    pub fn new(name: impl Into<String>) -> Self {
        Entity(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Native unit, inferred from the identifier. Anything suffixed `_MWH`
    /// is an energy series; unknown names default to power.
    pub fn unit(&self) -> Unit {
        match self.0.as_str() {
            Self::PRICE => Unit::UsdPerMwh,
            Self::SSRD => Unit::WattPerSquareMetre,
            s if s.ends_with("_MWH") => Unit::MegawattHour,
            _ => Unit::Megawatt,
        }
    }

    /// Whether values must be non-negative. Net loads and prices may go below zero.
    pub fn nonnegative(&self) -> bool {
        !matches!(self.0.as_str(), Self::PRICE | Self::MG_NET)
    }
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Entity {
    fn from(s: &str) -> Self {
        Entity(s.to_string())
    }
}

/// How to aggregate quarter-hour slots into an hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleMode {
    Mean,
    Sum,
}

/// Treatment of days that do not have exactly 24 local hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayMode {
    #[default]
    Strict,
    /// Pads a single missing local hour (spring forward) by linear
    /// interpolation and averages a single repeated hour (fall back).
    Lenient,
}

/// Calendar-aligned hourly values for one entity.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    entity: Entity,
    timestamps: Vec<DateTime<FixedOffset>>,
    values: Vec<f64>,
    days: BTreeMap<NaiveDate, Range<usize>>,
}

impl HourlySeries {
    pub fn new(
        entity: Entity,
        timestamps: Vec<DateTime<FixedOffset>>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::LengthMismatch {
                expected: timestamps.len(),
                got: values.len(),
            });
        }
        let nonneg = entity.nonnegative();
        for (t, v) in timestamps.iter().zip(&values) {
            if !v.is_finite() {
                return Err(Error::Unit(format!("{entity}: non-finite value at {t}")));
            }
            if nonneg && *v < 0.0 {
                return Err(Error::Unit(format!("{entity}: negative value {v} at {t}")));
            }
            if t.minute() != 0 || t.second() != 0 {
                return Err(Error::gap(entity.as_str(), format!("{t} is not on the hour")));
            }
        }
        let mut days: BTreeMap<NaiveDate, Range<usize>> = BTreeMap::new();
        for i in 0..timestamps.len() {
            let date = timestamps[i].date_naive();
            if i > 0 {
                let prev = timestamps[i - 1];
                if timestamps[i] <= prev {
                    return Err(Error::gap(
                        entity.as_str(),
                        format!("timestamps not strictly increasing at {}", timestamps[i]),
                    ));
                }
                if prev.date_naive() == date && timestamps[i] - prev != Duration::hours(1) {
                    let missing = prev.hour() + 1;
                    return Err(Error::gap(
                        entity.as_str(),
                        format!("{date}: missing hour {missing}"),
                    ));
                }
            }
            days.entry(date)
                .and_modify(|r| r.end = i + 1)
                .or_insert(i..i + 1);
        }
        Ok(HourlySeries {
            entity,
            timestamps,
            values,
            days,
        })
    }

    /// Builds a series of whole days starting at local midnight of `start`
    /// with a fixed UTC offset. `values.len()` must be a multiple of 24.
    pub fn from_days(
        entity: Entity,
        start: NaiveDate,
        offset: FixedOffset,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() % HOURS_PER_DAY != 0 {
            return Err(Error::Dimension(format!(
                "{} values do not form whole days",
                values.len()
            )));
        }
        let midnight = start
            .and_hms_opt(0, 0, 0)
            .expect("midnight exists")
            .and_local_timezone(offset)
            .single()
            .expect("fixed offsets are unambiguous");
        let timestamps = (0..values.len())
            .map(|i| midnight + Duration::hours(i as i64))
            .collect();
        Self::new(entity, timestamps, values)
    }

    pub fn entity(&self) -> &Entity {
        &self.entity
    }

    pub fn timestamps(&self) -> &[DateTime<FixedOffset>] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.days.keys().next().copied()
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.days.keys().next_back().copied()
    }

    /// Local dates that have at least one observation.
    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.days.keys().copied()
    }

    pub fn has_full_day(&self, date: NaiveDate) -> bool {
        self.day_slice(date, DayMode::Strict).is_ok()
    }

    /// The 24 values of `date` in hour order 0..23.
    pub fn day_slice(&self, date: NaiveDate, mode: DayMode) -> Result<Vec<f64>> {
        let range = self
            .days
            .get(&date)
            .ok_or_else(|| Error::gap(self.entity.as_str(), format!("{date}: no data")))?;
        let mut slots: [Vec<f64>; HOURS_PER_DAY] = Default::default();
        for i in range.clone() {
            slots[self.timestamps[i].hour() as usize].push(self.values[i]);
        }
        let missing: Vec<usize> = (0..HOURS_PER_DAY).filter(|&h| slots[h].is_empty()).collect();
        let repeated: Vec<usize> = (0..HOURS_PER_DAY).filter(|&h| slots[h].len() > 1).collect();
        match mode {
            DayMode::Strict => {
                if let Some(h) = missing.first() {
                    return Err(Error::gap(
                        self.entity.as_str(),
                        format!("{date}: missing hour {h}"),
                    ));
                }
                if let Some(h) = repeated.first() {
                    return Err(Error::gap(
                        self.entity.as_str(),
                        format!("{date}: hour {h} appears more than once"),
                    ));
                }
                Ok(slots.iter().map(|s| s[0]).collect())
            }
            DayMode::Lenient => {
                if missing.len() > 1 || repeated.len() > 1 {
                    return Err(Error::gap(
                        self.entity.as_str(),
                        format!(
                            "{date}: {} missing and {} repeated hours exceed a DST shift",
                            missing.len(),
                            repeated.len()
                        ),
                    ));
                }
                let mut out: Vec<Option<f64>> = slots
                    .iter()
                    .map(|s| {
                        if s.is_empty() {
                            None
                        } else {
                            Some(s.iter().sum::<f64>() / s.len() as f64)
                        }
                    })
                    .collect();
                if let Some(&h) = missing.first() {
                    let before = (0..h).rev().find_map(|k| out[k]);
                    let after = (h + 1..HOURS_PER_DAY).find_map(|k| out[k]);
                    out[h] = match (before, after) {
                        (Some(a), Some(b)) => Some(0.5 * (a + b)),
                        (Some(a), None) | (None, Some(a)) => Some(a),
                        (None, None) => None,
                    };
                }
                out.into_iter()
                    .enumerate()
                    .map(|(h, v)| {
                        v.ok_or_else(|| {
                            Error::gap(self.entity.as_str(), format!("{date}: missing hour {h}"))
                        })
                    })
                    .collect()
            }
        }
    }

    /// A copy restricted to dates strictly before `date`.
    pub fn truncated_before(&self, date: NaiveDate) -> HourlySeries {
        let end = self
            .days
            .range(..date)
            .next_back()
            .map(|(_, r)| r.end)
            .unwrap_or(0);
        HourlySeries::new(
            self.entity.clone(),
            self.timestamps[..end].to_vec(),
            self.values[..end].to_vec(),
        )
        .expect("prefix of a valid series is valid")
    }

    /// A copy restricted to dates up to and including `date`.
    pub fn truncated_through(&self, date: NaiveDate) -> HourlySeries {
        match date.succ_opt() {
            Some(next) => self.truncated_before(next),
            None => self.clone(),
        }
    }

    /// Same timestamps, values transformed pointwise.
    pub fn map_values(&self, entity: Entity, f: impl Fn(f64) -> f64) -> Result<HourlySeries> {
        HourlySeries::new(
            entity,
            self.timestamps.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }
}

/// Collapses a quarter-hour series to hourly values.
///
/// Every hour present must have all four slots at :00, :15, :30 and :45.
pub fn resample_quarter_hour_to_hourly(
    entity: Entity,
    points: &[(DateTime<FixedOffset>, f64)],
    mode: ResampleMode,
) -> Result<HourlySeries> {
    match (entity.unit(), mode) {
        (Unit::MegawattHour, ResampleMode::Mean) => {
            return Err(Error::Unit(format!(
                "{entity} is an energy series and must be summed"
            )))
        }
        (Unit::MegawattHour, ResampleMode::Sum) => {}
        (_, ResampleMode::Sum) => {
            return Err(Error::Unit(format!(
                "{entity} is a rate series and must be averaged"
            )))
        }
        _ => {}
    }
    let mut hours: BTreeMap<DateTime<FixedOffset>, [Option<f64>; 4]> = BTreeMap::new();
    for &(t, v) in points {
        if t.minute() % 15 != 0 || t.second() != 0 || t.nanosecond() != 0 {
            return Err(Error::gap(
                entity.as_str(),
                format!("{t} is not on the 15-minute grid"),
            ));
        }
        let slot = (t.minute() / 15) as usize;
        let hour = t - Duration::minutes(t.minute() as i64);
        let entry = hours.entry(hour).or_insert([None; 4]);
        if entry[slot].is_some() {
            return Err(Error::gap(entity.as_str(), format!("duplicate slot {t}")));
        }
        entry[slot] = Some(v);
    }
    let mut timestamps = Vec::with_capacity(hours.len());
    let mut values = Vec::with_capacity(hours.len());
    for (hour, slots) in hours {
        let present: Vec<f64> = slots.iter().flatten().copied().collect();
        if present.len() != 4 {
            return Err(Error::gap(
                entity.as_str(),
                format!("{hour}: {} of 4 quarter-hour slots present", present.len()),
            ));
        }
        let total: f64 = present.iter().sum();
        values.push(match mode {
            ResampleMode::Mean => total / 4.0,
            ResampleMode::Sum => total,
        });
        timestamps.push(hour);
    }
    HourlySeries::new(entity, timestamps, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn est() -> FixedOffset {
        FixedOffset::west_opt(5 * 3600).unwrap()
    }

    fn quarter(values: &[f64]) -> Vec<(DateTime<FixedOffset>, f64)> {
        let t0 = est().with_ymd_and_hms(2023, 7, 1, 10, 0, 0).unwrap();
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| (t0 + Duration::minutes(15 * i as i64), v))
            .collect()
    }

    #[test]
    fn resample_constant_hour() {
        let s = resample_quarter_hour_to_hourly("MG".into(), &quarter(&[1.0; 4]), ResampleMode::Mean)
            .unwrap();
        assert_eq!(s.values(), &[1.0]);
    }

    #[test]
    fn resample_takes_arithmetic_mean() {
        let s = resample_quarter_hour_to_hourly(
            "MG".into(),
            &quarter(&[0.0, 2.0, 4.0, 6.0]),
            ResampleMode::Mean,
        )
        .unwrap();
        assert_eq!(s.values(), &[3.0]);
    }

    #[test]
    fn resample_rejects_partial_hour() {
        let pts = quarter(&[1.0, 1.0, 1.0]);
        let err = resample_quarter_hour_to_hourly("MG".into(), &pts, ResampleMode::Mean).unwrap_err();
        assert!(matches!(err, Error::Gap { .. }), "{err}");
    }

    #[test]
    fn resample_mode_must_match_unit() {
        let pts = quarter(&[1.0; 4]);
        assert!(matches!(
            resample_quarter_hour_to_hourly("MG".into(), &pts, ResampleMode::Sum),
            Err(Error::Unit(_))
        ));
        assert!(matches!(
            resample_quarter_hour_to_hourly("MG_MWH".into(), &pts, ResampleMode::Mean),
            Err(Error::Unit(_))
        ));
        let s = resample_quarter_hour_to_hourly("MG_MWH".into(), &pts, ResampleMode::Sum).unwrap();
        assert_eq!(s.values(), &[4.0]);
    }

    #[test]
    fn full_day_slice() {
        let vals: Vec<f64> = (0..48).map(|i| i as f64).collect();
        let s = HourlySeries::from_days("MA".into(), NaiveDate::from_ymd_opt(2023, 7, 1).unwrap(), est(), vals)
            .unwrap();
        let d2 = s
            .day_slice(NaiveDate::from_ymd_opt(2023, 7, 2).unwrap(), DayMode::Strict)
            .unwrap();
        assert_eq!(d2.len(), 24);
        assert_eq!(d2[0], 24.0);
        assert_eq!(d2[23], 47.0);
    }

    #[test]
    fn empty_series_slice_is_gap() {
        let s = HourlySeries::new("MA".into(), vec![], vec![]).unwrap();
        let err = s
            .day_slice(NaiveDate::from_ymd_opt(2023, 7, 1).unwrap(), DayMode::Strict)
            .unwrap_err();
        assert!(matches!(err, Error::Gap { .. }));
    }

    #[test]
    fn missing_hour_is_rejected_at_construction() {
        let t0 = est().with_ymd_and_hms(2023, 7, 1, 0, 0, 0).unwrap();
        let ts: Vec<_> = (0..24)
            .filter(|&h| h != 13)
            .map(|h| t0 + Duration::hours(h))
            .collect();
        let n = ts.len();
        let err = HourlySeries::new("MG".into(), ts, vec![1.0; n]).unwrap_err();
        assert!(err.to_string().contains("missing hour 13"), "{err}");
    }

    #[test]
    fn negative_load_rejected_but_net_load_allowed() {
        let d = NaiveDate::from_ymd_opt(2023, 7, 1).unwrap();
        assert!(HourlySeries::from_days("MG".into(), d, est(), vec![-1.0; 24]).is_err());
        assert!(HourlySeries::from_days("MG_NET".into(), d, est(), vec![-1.0; 24]).is_ok());
    }
}
