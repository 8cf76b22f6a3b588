use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::series::Entity;
use crate::error::{Error, Result};

/// N_s sampled load paths for one entity on one day, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub entity: Entity,
    pub date: NaiveDate,
    hours: usize,
    paths: Vec<f64>,
    pub seed: u64,
}

impl ScenarioSet {
    /// `paths` holds `n × hours` values, scenario by scenario.
    pub fn new(
        entity: Entity,
        date: NaiveDate,
        hours: usize,
        paths: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        if hours == 0 || paths.is_empty() {
            return Err(Error::EmptyScenario);
        }
        if paths.len() % hours != 0 {
            return Err(Error::Dimension(format!(
                "{} values do not split into paths of {hours} hours",
                paths.len()
            )));
        }
        if let Some(v) = paths.iter().find(|v| !v.is_finite()) {
            return Err(Error::Dimension(format!("non-finite scenario value {v}")));
        }
        if entity.nonnegative() {
            if let Some(v) = paths.iter().find(|v| **v < 0.0) {
                return Err(Error::Dimension(format!(
                    "negative {entity} scenario value {v}"
                )));
            }
        }
        Ok(ScenarioSet {
            entity,
            date,
            hours,
            paths,
            seed,
        })
    }

    pub fn from_rows(entity: Entity, date: NaiveDate, rows: &[Vec<f64>], seed: u64) -> Result<Self> {
        let hours = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != hours) {
            return Err(Error::LengthMismatch {
                expected: hours,
                got: r.len(),
            });
        }
        Self::new(entity, date, hours, rows.concat(), seed)
    }

    pub fn len(&self) -> usize {
        self.paths.len() / self.hours
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn hours(&self) -> usize {
        self.hours
    }

    pub fn path(&self, i: usize) -> &[f64] {
        &self.paths[i * self.hours..(i + 1) * self.hours]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[f64]> {
        self.paths.chunks_exact(self.hours)
    }

    pub fn values(&self) -> &[f64] {
        &self.paths
    }

    /// Scenario-wise mean per hour.
    pub fn mean_path(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.hours];
        for p in self.paths() {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v;
            }
        }
        let n = self.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Pathwise `self − other[h]`, e.g. load minus a PV forecast.
    pub fn minus_profile(&self, entity: Entity, profile: &[f64]) -> Result<ScenarioSet> {
        if profile.len() != self.hours {
            return Err(Error::LengthMismatch {
                expected: self.hours,
                got: profile.len(),
            });
        }
        let paths = self
            .paths()
            .flat_map(|p| p.iter().zip(profile).map(|(a, b)| a - b))
            .collect();
        ScenarioSet::new(entity, self.date, self.hours, paths, self.seed)
    }
}

/// Probability of a new running maximum on `date`, and where in the day the
/// peak falls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakProbabilities {
    pub date: NaiveDate,
    pub entity: Entity,
    pub p_day_nrm: f64,
    pub p_hour: Vec<f64>,
}

impl PeakProbabilities {
    pub fn new(date: NaiveDate, entity: Entity, p_day_nrm: f64, p_hour: Vec<f64>) -> Result<Self> {
        let p = PeakProbabilities {
            date,
            entity,
            p_day_nrm,
            p_hour,
        };
        p.validate()?;
        Ok(p)
    }

    /// Zero day probability with the hourly mass placed uniformly.
    pub fn never(date: NaiveDate, entity: Entity, hours: usize) -> Self {
        PeakProbabilities {
            date,
            entity,
            p_day_nrm: 0.0,
            p_hour: vec![1.0 / hours as f64; hours],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_day_nrm) {
            return Err(Error::Dimension(format!(
                "p_day_nrm {} outside [0, 1]",
                self.p_day_nrm
            )));
        }
        if self.p_hour.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Dimension("hourly probabilities must be >= 0".into()));
        }
        let total: f64 = self.p_hour.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Dimension(format!(
                "hourly probabilities sum to {total}, not 1"
            )));
        }
        Ok(())
    }

    /// Expected CP weight per hour, p_day × p_hour[h].
    pub fn weights(&self) -> Vec<f64> {
        self.p_hour.iter().map(|p| self.p_day_nrm * p).collect()
    }
}

/// Everything the day-ahead optimizer sees for one target day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayContext {
    pub date: NaiveDate,
    /// Microgrid gross load scenarios L^MG.
    pub mg_scenarios: ScenarioSet,
    /// Scenario mean of `mg_scenarios`.
    pub mg_mean_load: Vec<f64>,
    pub pv_forecast: Vec<f64>,
    pub cp_probs: PeakProbabilities,
    pub cp5_probs: Option<PeakProbabilities>,
    pub ncp_day_prob: f64,
    pub running_month_max: f64,
    pub running_cp_level: f64,
}

impl DayContext {
    /// Builds the context, deriving the mean load from the scenarios.
    pub fn new(
        mg_scenarios: ScenarioSet,
        pv_forecast: Vec<f64>,
        cp_probs: PeakProbabilities,
        cp5_probs: Option<PeakProbabilities>,
        ncp_day_prob: f64,
        running_month_max: f64,
        running_cp_level: f64,
    ) -> Result<Self> {
        let ctx = DayContext {
            date: mg_scenarios.date,
            mg_mean_load: mg_scenarios.mean_path(),
            mg_scenarios,
            pv_forecast,
            cp_probs,
            cp5_probs,
            ncp_day_prob,
            running_month_max,
            running_cp_level,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn hours(&self) -> usize {
        self.mg_scenarios.hours()
    }

    pub fn n_scenarios(&self) -> usize {
        self.mg_scenarios.len()
    }

    /// Forecast net load L̄^MG_h − PV_h.
    pub fn mean_net_load(&self) -> Vec<f64> {
        self.mg_mean_load
            .iter()
            .zip(&self.pv_forecast)
            .map(|(l, pv)| l - pv)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hours();
        for (what, len) in [
            ("mg_mean_load", self.mg_mean_load.len()),
            ("pv_forecast", self.pv_forecast.len()),
            ("cp_probs", self.cp_probs.p_hour.len()),
        ] {
            if len != h {
                return Err(Error::Dimension(format!("{what} has {len} hours, expected {h}")));
            }
        }
        if let Some(p5) = &self.cp5_probs {
            if p5.p_hour.len() != h {
                return Err(Error::Dimension("cp5_probs hour count".into()));
            }
            p5.validate()?;
        }
        self.cp_probs.validate()?;
        if !(0.0..=1.0).contains(&self.ncp_day_prob) {
            return Err(Error::Dimension(format!(
                "ncp_day_prob {} outside [0, 1]",
                self.ncp_day_prob
            )));
        }
        if self.pv_forecast.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dimension("non-finite PV forecast".into()));
        }
        let mean = self.mg_scenarios.mean_path();
        for (a, b) in mean.iter().zip(&self.mg_mean_load) {
            if (a - b).abs() > 1e-9 * (1.0 + a.abs()) {
                return Err(Error::Dimension(
                    "mg_mean_load differs from the scenario mean".into(),
                ));
            }
        }
        Ok(())
    }
}
