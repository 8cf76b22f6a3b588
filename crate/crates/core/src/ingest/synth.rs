//! A synthetic world with known latent structure.
//!
//! Regional load is a base profile scaled by season and weekday, times a
//! log-normal common factor (AR(1) across days plus hourly noise). The
//! zone is an affine function of the region plus noise, the microgrid an
//! affine function of the zone plus noise. The regional day-ahead forecast
//! is the actual times a log-normal error that is AR(1) across hours.
//! Radiation follows a clipped sine between sunrise and sunset scaled by a
//! daily clearness draw; PV is proportional to true radiation plus noise.

use chrono::{Datelike, Duration, FixedOffset, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DatasetBundle;
use crate::error::{Error, Result};
use crate::model::{DayClass, DayMode, Entity, HolidayCalendar, HourlySeries, HOURS_PER_DAY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthWorldSpec {
    pub seed: u64,
    pub start: NaiveDate,
    pub n_days: usize,
    pub utc_offset_hours: i32,
    /// Regional MW by hour before seasonal and weekday scaling.
    pub regional_base: Vec<f64>,
    /// Peak-to-mean seasonal swing, as a fraction.
    pub seasonal_amplitude: f64,
    /// Day of year where the seasonal cycle peaks.
    pub seasonal_peak_day: u32,
    /// Load multiplier on weekends and holidays.
    pub weekend_factor: f64,
    /// Loadings (region on the factor, zone on region, microgrid on zone).
    pub loadings: [f64; 3],
    /// Intercepts (MW) of the zone and microgrid equations.
    pub offsets: [f64; 2],
    /// Stationary standard deviation of the daily log factor.
    pub regional_daily_sd: f64,
    pub regional_daily_ar: f64,
    pub regional_hourly_sd: f64,
    /// Log-scale standard deviation of the regional forecast error.
    pub forecast_error_sd: f64,
    pub forecast_error_ar: f64,
    /// Zone noise (MW): a common daily shift plus independent hourly noise.
    pub zone_daily_sd: f64,
    pub zone_hourly_sd: f64,
    pub mg_daily_sd: f64,
    pub mg_hourly_sd: f64,
    /// Clip the zone at the regional load.
    pub subset_zone: bool,
    pub pv_capacity: f64,
    /// Clear-sky noon radiation, W/m².
    pub ssrd_peak: f64,
    pub sunrise: f64,
    pub sunset: f64,
    pub clearness_min: f64,
    /// Relative noise of the radiation forecast.
    pub ssrd_forecast_sd: f64,
    pub pv_noise_sd: f64,
    pub holidays: HolidayCalendar,
}

impl Default for SynthWorldSpec {
    fn default() -> Self {
        SynthWorldSpec {
            seed: 1,
            start: NaiveDate::from_ymd_opt(2022, 1, 1).expect("valid date"),
            n_days: 730,
            utc_offset_hours: -5,
            regional_base: vec![
                23500.0, 22600.0, 22100.0, 21900.0, 22200.0, 23300.0, 25200.0, 26900.0, 27900.0,
                28700.0, 29500.0, 30300.0, 31000.0, 31600.0, 32100.0, 32600.0, 33000.0, 33200.0,
                32800.0, 31900.0, 30800.0, 29200.0, 27100.0, 25100.0,
            ],
            seasonal_amplitude: 0.15,
            seasonal_peak_day: 196,
            weekend_factor: 0.88,
            loadings: [1.0, 0.3, 0.12],
            offsets: [0.0, 0.0],
            regional_daily_sd: 0.05,
            regional_daily_ar: 0.6,
            regional_hourly_sd: 0.015,
            forecast_error_sd: 0.02,
            forecast_error_ar: 0.8,
            zone_daily_sd: 60.0,
            zone_hourly_sd: 40.0,
            mg_daily_sd: 15.0,
            mg_hourly_sd: 10.0,
            subset_zone: false,
            pv_capacity: 300.0,
            ssrd_peak: 900.0,
            sunrise: 6.0,
            sunset: 20.0,
            clearness_min: 0.3,
            ssrd_forecast_sd: 0.1,
            pv_noise_sd: 5.0,
            holidays: HolidayCalendar::UsFederal,
        }
    }
}

impl SynthWorldSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Spec(m));
        if self.n_days == 0 {
            return fail("n_days must be positive".into());
        }
        if self.regional_base.len() != HOURS_PER_DAY
            || self.regional_base.iter().any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return fail("regional_base needs 24 finite values >= 0".into());
        }
        if self.loadings.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return fail(format!("loadings {:?} must be >= 0", self.loadings));
        }
        // Each noise block is σ_d²·11ᵀ + σ_h²·I, PSD iff both scales are real.
        let scales = [
            ("regional_daily_sd", self.regional_daily_sd),
            ("regional_hourly_sd", self.regional_hourly_sd),
            ("forecast_error_sd", self.forecast_error_sd),
            ("zone_daily_sd", self.zone_daily_sd),
            ("zone_hourly_sd", self.zone_hourly_sd),
            ("mg_daily_sd", self.mg_daily_sd),
            ("mg_hourly_sd", self.mg_hourly_sd),
            ("ssrd_forecast_sd", self.ssrd_forecast_sd),
            ("pv_noise_sd", self.pv_noise_sd),
        ];
        for (name, v) in scales {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} = {v} is not a valid standard deviation"));
            }
        }
        for (name, v) in [
            ("regional_daily_ar", self.regional_daily_ar),
            ("forecast_error_ar", self.forecast_error_ar),
        ] {
            if !(v.abs() < 1.0) {
                return fail(format!("{name} = {v} must lie in (-1, 1)"));
            }
        }
        if !(0.0 <= self.sunrise && self.sunrise < self.sunset && self.sunset <= 24.0) {
            return fail("need 0 <= sunrise < sunset <= 24".into());
        }
        if !(0.0..=1.0).contains(&self.clearness_min) {
            return fail("clearness_min must lie in [0, 1]".into());
        }
        if !(self.pv_capacity >= 0.0 && self.ssrd_peak >= 0.0 && self.weekend_factor > 0.0) {
            return fail("pv_capacity, ssrd_peak and weekend_factor must be positive".into());
        }
        FixedOffset::east_opt(self.utc_offset_hours * 3600)
            .ok_or_else(|| Error::Spec(format!("bad UTC offset {}", self.utc_offset_hours)))?;
        Ok(())
    }

    /// Deterministic multiplier of the regional base on `date`.
    pub fn calendar_scale(&self, date: NaiveDate) -> f64 {
        let doy = date.ordinal() as f64;
        let phase = 2.0 * std::f64::consts::PI * (doy - self.seasonal_peak_day as f64) / 365.25;
        let week = match DayClass::of(date, &self.holidays) {
            DayClass::Weekday => 1.0,
            DayClass::Weekend => self.weekend_factor,
        };
        (1.0 + self.seasonal_amplitude * phase.cos()) * week
    }
}

/// Latent quantities of a generated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub spec: SynthWorldSpec,
    /// Daily log factor of the regional load.
    pub daily_factor: Vec<f64>,
    pub clearness: Vec<f64>,
    /// Load values clipped at zero, and how many load values were drawn.
    pub clipped: usize,
    pub total: usize,
}

impl SynthTruth {
    pub fn clip_fraction(&self) -> f64 {
        self.clipped as f64 / self.total.max(1) as f64
    }
}

struct DayDraw {
    ma: Vec<f64>,
    ma_fcst: Vec<f64>,
    ps: Vec<f64>,
    mg: Vec<f64>,
    pv: Vec<f64>,
    ssrd: Vec<f64>,
    clearness: f64,
    clipped: usize,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn draw_day(spec: &SynthWorldSpec, date: NaiveDate, factor: f64, rng: &mut ChaCha8Rng) -> DayDraw {
    let scale = spec.calendar_scale(date);
    let [l_region, l_zone, l_mg] = spec.loadings;
    let mut clipped = 0;
    let mut clip = |v: f64| {
        if v < 0.0 {
            clipped += 1;
            0.0
        } else {
            v
        }
    };
    let ma: Vec<f64> = spec
        .regional_base
        .iter()
        .map(|b| l_region * b * scale * (factor + spec.regional_hourly_sd * normal(rng)).exp())
        .collect();
    let rho = spec.forecast_error_ar;
    let mut e = spec.forecast_error_sd * normal(rng);
    let ma_fcst: Vec<f64> = ma
        .iter()
        .enumerate()
        .map(|(h, a)| {
            if h > 0 {
                e = rho * e + (1.0 - rho * rho).sqrt() * spec.forecast_error_sd * normal(rng);
            }
            a * e.exp()
        })
        .collect();
    let zone_shift = spec.zone_daily_sd * normal(rng);
    let ps: Vec<f64> = ma
        .iter()
        .map(|a| {
            let z = l_zone * a + spec.offsets[0] + zone_shift + spec.zone_hourly_sd * normal(rng);
            let z = if spec.subset_zone { z.min(*a) } else { z };
            clip(z)
        })
        .collect();
    let mg_shift = spec.mg_daily_sd * normal(rng);
    let mg: Vec<f64> = ps
        .iter()
        .map(|z| clip(l_mg * z + spec.offsets[1] + mg_shift + spec.mg_hourly_sd * normal(rng)))
        .collect();
    let clearness = spec.clearness_min + (1.0 - spec.clearness_min) * rng.random::<f64>();
    let span = spec.sunset - spec.sunrise;
    let mut ssrd = Vec::with_capacity(HOURS_PER_DAY);
    let mut pv = Vec::with_capacity(HOURS_PER_DAY);
    for h in 0..HOURS_PER_DAY {
        let t = (h as f64 + 0.5 - spec.sunrise) / span;
        let truth = if (0.0..=1.0).contains(&t) {
            spec.ssrd_peak * clearness * (std::f64::consts::PI * t).sin()
        } else {
            0.0
        };
        let (fc, out) = if truth > 0.0 {
            let fc = (truth * (1.0 + spec.ssrd_forecast_sd * normal(rng))).max(0.0);
            let out = spec.pv_capacity * truth / 1000.0 + spec.pv_noise_sd * normal(rng);
            (fc, out.clamp(0.0, spec.pv_capacity))
        } else {
            (0.0, 0.0)
        };
        ssrd.push(fc);
        pv.push(out);
    }
    DayDraw {
        ma,
        ma_fcst,
        ps,
        mg,
        pv,
        ssrd,
        clearness,
        clipped,
    }
}

/// Generates the bundle and its ground truth. Identical seeds give
/// identical output regardless of thread count.
pub fn generate_synth_world(spec: &SynthWorldSpec) -> Result<(DatasetBundle, SynthTruth)> {
    spec.validate()?;
    let mut factor_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    factor_rng.set_stream(u64::MAX);
    let phi = spec.regional_daily_ar;
    let innov = spec.regional_daily_sd * (1.0 - phi * phi).sqrt();
    let mut x = spec.regional_daily_sd * normal(&mut factor_rng);
    let mut daily_factor = Vec::with_capacity(spec.n_days);
    for k in 0..spec.n_days {
        if k > 0 {
            x = phi * x + innov * normal(&mut factor_rng);
        }
        daily_factor.push(x);
    }
    let days: Vec<DayDraw> = (0..spec.n_days)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(k as u64);
            draw_day(spec, spec.start + Duration::days(k as i64), daily_factor[k], &mut rng)
        })
        .collect();
    let offset = FixedOffset::east_opt(spec.utc_offset_hours * 3600).expect("validated");
    let build = |name: &str, pick: fn(&DayDraw) -> &Vec<f64>| {
        let values: Vec<f64> = days.iter().flat_map(|d| pick(d).iter().copied()).collect();
        HourlySeries::from_days(Entity::new(name), spec.start, offset, values)
    };
    let series = vec![
        build(Entity::MA, |d| &d.ma)?,
        build(Entity::MA_FORECAST, |d| &d.ma_fcst)?,
        build(Entity::PS, |d| &d.ps)?,
        build(Entity::MG, |d| &d.mg)?,
        build(Entity::PV, |d| &d.pv)?,
        build(Entity::SSRD, |d| &d.ssrd)?,
    ];
    let (bundle, _) = DatasetBundle::new(series, DayMode::Strict)?;
    let truth = SynthTruth {
        spec: spec.clone(),
        daily_factor,
        clearness: days.iter().map(|d| d.clearness).collect(),
        clipped: days.iter().map(|d| d.clipped).sum(),
        total: 2 * HOURS_PER_DAY * spec.n_days,
    };
    Ok((bundle, truth))
}
