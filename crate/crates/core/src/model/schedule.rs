use serde::{Deserialize, Serialize};

use super::battery::BatterySpec;
use crate::error::{Error, Result};

/// Slack allowed on the inequality constraints when validating. The SOC
/// recursion itself is checked to 1e-9.
pub const SCHEDULE_TOL: f64 = 1e-8;

/// Hourly battery actions: `pi_plus` discharges, `pi_minus` charges, both as
/// fractions of capacity. `soc[h]` is the state of charge at the end of hour h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub pi_plus: Vec<f64>,
    pub pi_minus: Vec<f64>,
    /// `true` when the hour is in discharge mode.
    pub b: Vec<bool>,
    pub soc: Vec<f64>,
}

impl Schedule {
    /// No action for `hours` hours; SOC stays at its initial value.
    pub fn idle(hours: usize, battery: &BatterySpec) -> Self {
        Schedule {
            pi_plus: vec![0.0; hours],
            pi_minus: vec![0.0; hours],
            b: vec![false; hours],
            soc: vec![battery.soc_init; hours],
        }
    }

    /// Builds the schedule implied by the actions, deriving modes and SOC.
    pub fn from_actions(pi_minus: Vec<f64>, pi_plus: Vec<f64>, battery: &BatterySpec) -> Self {
        let b = pi_plus.iter().map(|&p| p > 0.0).collect();
        let soc = soc_path(&pi_minus, &pi_plus, battery);
        Schedule {
            pi_plus,
            pi_minus,
            b,
            soc,
        }
    }

    pub fn hours(&self) -> usize {
        self.pi_plus.len()
    }

    /// Battery output seen by the grid at hour h in MW (positive = discharge).
    pub fn battery_mw(&self, h: usize, battery: &BatterySpec) -> f64 {
        battery.capacity * (self.pi_plus[h] - self.pi_minus[h])
    }

    /// |Δπ| summed over hours, with the action before hour 0 taken as zero.
    pub fn total_ramp(&self) -> f64 {
        let mut prev = 0.0;
        let mut total = 0.0;
        for h in 0..self.hours() {
            let net = self.pi_minus[h] - self.pi_plus[h];
            total += (net - prev).abs();
            prev = net;
        }
        total
    }

    /// Checks every admissibility constraint, reporting the first violation.
    pub fn validate(&self, battery: &BatterySpec) -> Result<()> {
        let n = self.hours();
        for (name, len) in [
            ("pi_minus", self.pi_minus.len()),
            ("b", self.b.len()),
            ("soc", self.soc.len()),
        ] {
            if len != n {
                return Err(Error::InfeasibleSchedule(format!(
                    "{name} has {len} hours, pi_plus has {n}"
                )));
            }
        }
        let cap = battery.capacity;
        let mut prev = battery.soc_init;
        for h in 0..n {
            let (plus, minus) = (self.pi_plus[h], self.pi_minus[h]);
            let fail = |what: String| Err(Error::InfeasibleSchedule(format!("hour {h}: {what}")));
            if !(plus.is_finite() && minus.is_finite() && self.soc[h].is_finite()) {
                return fail("non-finite value".into());
            }
            if plus < -SCHEDULE_TOL || plus > 1.0 + SCHEDULE_TOL {
                return fail(format!("pi_plus {plus} outside [0, 1]"));
            }
            if minus < -SCHEDULE_TOL || minus > 1.0 + SCHEDULE_TOL {
                return fail(format!("pi_minus {minus} outside [0, 1]"));
            }
            if plus * minus != 0.0 {
                return fail("simultaneous charge and discharge".into());
            }
            let bh = if self.b[h] { 1.0 } else { 0.0 };
            if minus * cap > (1.0 - bh) * battery.max_charge + SCHEDULE_TOL * cap {
                return fail(format!("charge {} MW exceeds limit", minus * cap));
            }
            if plus * cap > bh * battery.max_discharge + SCHEDULE_TOL * cap {
                return fail(format!("discharge {} MW exceeds limit", plus * cap));
            }
            let expected = prev + minus * battery.eta_charge - plus / battery.eta_discharge;
            if (self.soc[h] - expected).abs() > 1e-9 {
                return fail(format!(
                    "SOC {} does not follow the dynamics (expected {expected})",
                    self.soc[h]
                ));
            }
            if self.soc[h] < battery.soc_min - SCHEDULE_TOL
                || self.soc[h] > battery.soc_max + SCHEDULE_TOL
            {
                return fail(format!(
                    "SOC {} outside [{}, {}]",
                    self.soc[h], battery.soc_min, battery.soc_max
                ));
            }
            prev = self.soc[h];
        }
        Ok(())
    }
}

/// SOC trajectory produced by the actions, starting from `soc_init`.
pub fn soc_path(pi_minus: &[f64], pi_plus: &[f64], battery: &BatterySpec) -> Vec<f64> {
    let mut soc = battery.soc_init;
    pi_minus
        .iter()
        .zip(pi_plus)
        .map(|(&m, &p)| {
            soc = soc + m * battery.eta_charge - p / battery.eta_discharge;
            soc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idle_schedule_is_valid() {
        let b = BatterySpec::reference();
        let s = Schedule::idle(24, &b);
        s.validate(&b).unwrap();
        assert!(s.soc.iter().all(|&x| x == b.soc_init));
        assert_eq!(s.total_ramp(), 0.0);
    }

    #[test]
    fn rejects_each_violation() {
        let b = BatterySpec::reference();
        let base = || Schedule::from_actions(vec![0.3, 0.0], vec![0.0, 0.2], &b);
        base().validate(&b).unwrap();

        let mut s = base();
        s.pi_plus[0] = 0.1;
        assert!(s.validate(&b).is_err(), "mutual exclusion");

        let mut s = base();
        s.b[1] = false;
        assert!(s.validate(&b).is_err(), "discharge in charge mode");

        let s = Schedule::from_actions(vec![0.6, 0.0], vec![0.0, 0.0], &b);
        assert!(s.validate(&b).is_err(), "rate limit");

        let mut s = base();
        s.soc[0] += 1e-6;
        assert!(s.validate(&b).is_err(), "dynamics");

        let s = Schedule::from_actions(vec![0.0], vec![0.1], &b);
        assert!(s.validate(&b).is_err(), "below soc_min");
    }

    #[test]
    fn ramp_counts_first_hour() {
        let b = BatterySpec::reference();
        let s = Schedule::from_actions(vec![0.1; 3], vec![0.0; 3], &b);
        assert!((s.total_ramp() - 0.1).abs() < 1e-15);
    }
}
