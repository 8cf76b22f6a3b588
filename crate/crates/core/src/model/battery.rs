use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Technical parameters of the storage unit. Actions are expressed as
/// fractions of `capacity` per hour, SOC as a fraction of `capacity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatterySpec {
    /// Energy capacity C (MWh).
    pub capacity: f64,
    /// Maximum discharging output Π⁺ (MW).
    pub max_discharge: f64,
    /// Maximum charging output Π⁻ (MW).
    pub max_charge: f64,
    pub eta_round: f64,
    /// Discharging efficiency η⁺.
    pub eta_discharge: f64,
    /// Charging efficiency η⁻.
    pub eta_charge: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc_init: f64,
}

impl BatterySpec {
    /// The reference unit: 1000 MWh, 500 MW either way, 80% round trip split
    /// evenly between charging and discharging, SOC kept within 20%–96% and
    /// starting each day at the lower bound.
    pub fn reference() -> Self {
        let eta = 0.8_f64;
        BatterySpec {
            capacity: 1000.0,
            max_discharge: 500.0,
            max_charge: 500.0,
            eta_round: eta,
            eta_discharge: eta.sqrt(),
            eta_charge: eta.sqrt(),
            soc_min: 0.20,
            soc_max: 0.96,
            soc_init: 0.20,
        }
    }

    /// Splits the round-trip efficiency symmetrically.
    pub fn with_round_trip(mut self, eta_round: f64) -> Self {
        self.eta_round = eta_round;
        self.eta_charge = eta_round.sqrt();
        self.eta_discharge = eta_round.sqrt();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.capacity,
            self.max_discharge,
            self.max_charge,
            self.eta_round,
            self.eta_discharge,
            self.eta_charge,
            self.soc_min,
            self.soc_max,
            self.soc_init,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("battery parameters must be finite".into()));
        }
        if self.capacity <= 0.0 || self.max_discharge <= 0.0 || self.max_charge <= 0.0 {
            return Err(Error::Config(
                "battery capacity and rate limits must be positive".into(),
            ));
        }
        if !(self.eta_charge > 0.0 && self.eta_discharge > 0.0) {
            return Err(Error::Config("efficiencies must be positive".into()));
        }
        if (self.eta_charge * self.eta_discharge - self.eta_round).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "eta_charge * eta_discharge = {} differs from eta_round = {}",
                self.eta_charge * self.eta_discharge,
                self.eta_round
            )));
        }
        if !(0.0 <= self.soc_min && self.soc_min <= self.soc_max && self.soc_max <= 1.0) {
            return Err(Error::Config(format!(
                "SOC bounds [{}, {}] outside [0, 1] or inverted",
                self.soc_min, self.soc_max
            )));
        }
        if !(self.soc_min <= self.soc_init && self.soc_init <= self.soc_max) {
            return Err(Error::InfeasibleBounds(format!(
                "initial SOC {} outside [{}, {}]",
                self.soc_init, self.soc_min, self.soc_max
            )));
        }
        Ok(())
    }

    /// Largest charging fraction per hour.
    pub fn max_charge_fraction(&self) -> f64 {
        (self.max_charge / self.capacity).min(1.0)
    }

    /// Largest discharging fraction per hour.
    pub fn max_discharge_fraction(&self) -> f64 {
        (self.max_discharge / self.capacity).min(1.0)
    }
}

impl Default for BatterySpec {
    fn default() -> Self {
        Self::reference()
    }
}
