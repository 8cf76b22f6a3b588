use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::calendar::CpSeason;
use super::series::{DayMode, HourlySeries, HOURS_PER_DAY};
use crate::error::{Error, Result};

/// Energy price P_h in USD/MWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyPrice {
    Flat(f64),
    /// Time-of-use profile repeated every day.
    Profile(Vec<f64>),
    #[serde(skip)]
    Series(HourlySeries),
}

impl EnergyPrice {
    pub fn for_day(&self, date: NaiveDate, hours: usize) -> Result<Vec<f64>> {
        match self {
            EnergyPrice::Flat(p) => Ok(vec![*p; hours]),
            EnergyPrice::Profile(v) => {
                if v.len() != hours {
                    return Err(Error::LengthMismatch {
                        expected: hours,
                        got: v.len(),
                    });
                }
                Ok(v.clone())
            }
            EnergyPrice::Series(s) => {
                if hours != HOURS_PER_DAY {
                    return Err(Error::Dimension(format!(
                        "price series only provides 24-hour days, not {hours}"
                    )));
                }
                s.day_slice(date, DayMode::Strict)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            EnergyPrice::Flat(p) => p.is_finite(),
            EnergyPrice::Profile(v) => v.iter().all(|p| p.is_finite()),
            EnergyPrice::Series(_) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("energy prices must be finite".into()))
        }
    }
}

/// Charges faced by the microgrid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TariffConfig {
    /// λ_CP, USD per MW at the season's coincident peak (zonal factor × 30 × NITS rate).
    pub lambda_cp: f64,
    /// λ_5CP, USD per MW for each of the five system peaks. `None` disables the term.
    #[serde(default)]
    pub lambda_5cp: Option<f64>,
    /// λ_NCP, USD per MW of monthly peak.
    pub lambda_ncp: f64,
    /// λ_deg, USD per unit change of battery action.
    pub lambda_deg: f64,
    pub energy_price: EnergyPrice,
    #[serde(default)]
    pub cp_season: CpSeason,
}

/// Missing fields in a config file fall back to the synthetic defaults.
impl Default for TariffConfig {
    fn default() -> Self {
        Self::synthetic_default()
    }
}

impl TariffConfig {
    /// Test-fixture defaults for synthetic worlds. These are not tariff values
    /// of any real utility.
    pub fn synthetic_default() -> Self {
        TariffConfig {
            lambda_cp: 9000.0,
            lambda_5cp: None,
            lambda_ncp: 110.0,
            lambda_deg: 50.0,
            energy_price: EnergyPrice::Flat(100.0),
            cp_season: CpSeason::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lambdas = [
            ("lambda_cp", self.lambda_cp),
            ("lambda_5cp", self.lambda_5cp.unwrap_or(0.0)),
            ("lambda_ncp", self.lambda_ncp),
            ("lambda_deg", self.lambda_deg),
        ];
        for (name, v) in lambdas {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        self.energy_price.validate()?;
        self.cp_season.window.validate()
    }
}
