//! Domain types shared by every stage of the pipeline.

pub mod battery;
pub mod calendar;
pub mod day;
pub mod schedule;
pub mod series;
pub mod tariff;

pub use battery::BatterySpec;
pub use calendar::{is_cp_business_day, CpSeason, DayClass, HolidayCalendar, SeasonWindow};
pub use day::{DayContext, PeakProbabilities, ScenarioSet};
pub use schedule::Schedule;
pub use series::{
    resample_quarter_hour_to_hourly, DayMode, Entity, HourlySeries, ResampleMode, Unit,
    HOURS_PER_DAY,
};
pub use tariff::{EnergyPrice, TariffConfig};
