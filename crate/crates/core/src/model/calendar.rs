use std::collections::BTreeSet;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Non-business weekdays. Defaults to the US federal holidays (with the
/// Saturday→Friday / Sunday→Monday observance rule) when no explicit list
/// is configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HolidayCalendar {
    UsFederal,
    Explicit { dates: BTreeSet<NaiveDate> },
}

impl Default for HolidayCalendar {
    fn default() -> Self {
        HolidayCalendar::UsFederal
    }
}

impl HolidayCalendar {
    pub fn explicit(dates: impl IntoIterator<Item = NaiveDate>) -> Self {
        HolidayCalendar::Explicit {
            dates: dates.into_iter().collect(),
        }
    }

    pub fn is_holiday(&self, date: NaiveDate) -> bool {
        match self {
            HolidayCalendar::UsFederal => us_federal_holidays(date.year()).contains(&date),
            HolidayCalendar::Explicit { dates } => dates.contains(&date),
        }
    }
}

fn nth_weekday(year: i32, month: u32, weekday: Weekday, n: u8) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, weekday, n).expect("valid nth weekday")
}

fn last_weekday(year: i32, month: u32, weekday: Weekday) -> NaiveDate {
    let first_next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid date");
    let mut d = first_next - Duration::days(1);
    while d.weekday() != weekday {
        d -= Duration::days(1);
    }
    d
}

fn observed(d: NaiveDate) -> NaiveDate {
    match d.weekday() {
        Weekday::Sat => d - Duration::days(1),
        Weekday::Sun => d + Duration::days(1),
        _ => d,
    }
}

/// Observed US federal holidays falling in `year`.
pub fn us_federal_holidays(year: i32) -> BTreeSet<NaiveDate> {
    let ymd = |m, d| NaiveDate::from_ymd_opt(year, m, d).expect("valid date");
    let mut out = BTreeSet::new();
    out.insert(observed(ymd(1, 1)));
    out.insert(nth_weekday(year, 1, Weekday::Mon, 3));
    out.insert(nth_weekday(year, 2, Weekday::Mon, 3));
    out.insert(last_weekday(year, 5, Weekday::Mon));
    if year >= 2021 {
        out.insert(observed(ymd(6, 19)));
    }
    out.insert(observed(ymd(7, 4)));
    out.insert(nth_weekday(year, 9, Weekday::Mon, 1));
    out.insert(nth_weekday(year, 10, Weekday::Mon, 2));
    out.insert(observed(ymd(11, 11)));
    out.insert(nth_weekday(year, 11, Weekday::Thu, 4));
    out.insert(observed(ymd(12, 25)));
    // New Year's Day of the following year can be observed on Dec 31.
    let next_new_year = NaiveDate::from_ymd_opt(year + 1, 1, 1).expect("valid date");
    if observed(next_new_year).year() == year {
        out.insert(observed(next_new_year));
    }
    out.retain(|d| d.year() == year);
    out
}

/// A recurring month/day window, e.g. June 1 through September 30.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeasonWindow {
    pub start_month: u32,
    pub start_day: u32,
    pub end_month: u32,
    pub end_day: u32,
}

impl SeasonWindow {
    pub const SUMMER: SeasonWindow = SeasonWindow {
        start_month: 6,
        start_day: 1,
        end_month: 9,
        end_day: 30,
    };

    pub fn new(start: (u32, u32), end: (u32, u32)) -> Result<Self> {
        let w = SeasonWindow {
            start_month: start.0,
            start_day: start.1,
            end_month: end.0,
            end_day: end.1,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        // 2024 is a leap year, so Feb 29 is accepted.
        let s = NaiveDate::from_ymd_opt(2024, self.start_month, self.start_day);
        let e = NaiveDate::from_ymd_opt(2024, self.end_month, self.end_day);
        match (s, e) {
            (Some(s), Some(e)) if s <= e => Ok(()),
            _ => Err(Error::Config(format!("empty or invalid season window {self:?}"))),
        }
    }

    /// First and last day of the window in `year`.
    pub fn range_for_year(&self, year: i32) -> (NaiveDate, NaiveDate) {
        let clamp = |m: u32, d: u32| {
            NaiveDate::from_ymd_opt(year, m, d)
                .or_else(|| NaiveDate::from_ymd_opt(year, m, d - 1))
                .expect("valid season bound")
        };
        (
            clamp(self.start_month, self.start_day),
            clamp(self.end_month, self.end_day),
        )
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        let (s, e) = self.range_for_year(date.year());
        s <= date && date <= e
    }

    pub fn days_in_year(&self, year: i32) -> impl Iterator<Item = NaiveDate> {
        let (s, e) = self.range_for_year(year);
        s.iter_days().take_while(move |d| *d <= e)
    }
}

/// The coincident-peak season: a recurring window plus the holiday calendar
/// used to decide business days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpSeason {
    pub window: SeasonWindow,
    #[serde(default)]
    pub holidays: HolidayCalendar,
}

impl Default for CpSeason {
    fn default() -> Self {
        CpSeason {
            window: SeasonWindow::SUMMER,
            holidays: HolidayCalendar::UsFederal,
        }
    }
}

impl CpSeason {
    pub fn is_business_day(&self, date: NaiveDate) -> bool {
        !matches!(date.weekday(), Weekday::Sat | Weekday::Sun) && !self.holidays.is_holiday(date)
    }

    /// Business days of the season in `year`.
    pub fn business_days(&self, year: i32) -> Vec<NaiveDate> {
        self.window
            .days_in_year(year)
            .filter(|d| self.is_business_day(*d))
            .collect()
    }
}

/// True iff `date` lies in the CP season, is Monday–Friday and is not a
/// configured holiday.
pub fn is_cp_business_day(date: NaiveDate, season: &CpSeason) -> bool {
    season.window.contains(date) && season.is_business_day(date)
}

/// Weekday vs weekend-or-holiday, the two calendar classes of the load models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayClass {
    Weekday,
    Weekend,
}

impl DayClass {
    pub fn of(date: NaiveDate, holidays: &HolidayCalendar) -> DayClass {
        if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) || holidays.is_holiday(date) {
            DayClass::Weekend
        } else {
            DayClass::Weekday
        }
    }

    pub fn index(self) -> usize {
        match self {
            DayClass::Weekday => 0,
            DayClass::Weekend => 1,
        }
    }
}
