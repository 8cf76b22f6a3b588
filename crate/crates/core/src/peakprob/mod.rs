//! Peak-day and peak-hour probabilities counted over scenario sets.
//!
//! A day "sets a new running maximum" when its hourly maximum strictly
//! exceeds the level observed so far; a tie leaves the maximum unchanged.
//! Pass `f64::NEG_INFINITY` as the level when nothing has been observed.

use crate::error::{Error, Result};
use crate::model::{PeakProbabilities, ScenarioSet};

fn path_max(p: &[f64]) -> f64 {
    p.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Hour of the path maximum, earliest on ties.
pub fn argmax_hour(p: &[f64]) -> usize {
    let mut best = 0;
    for (h, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = h;
        }
    }
    best
}

/// Fraction of scenarios whose daily maximum strictly exceeds `running_max`.
pub fn day_nrm_probability(scenarios: &ScenarioSet, running_max: f64) -> Result<f64> {
    if scenarios.is_empty() {
        return Err(Error::EmptyScenario);
    }
    let hits = scenarios.paths().filter(|p| path_max(p) > running_max).count();
    Ok(hits as f64 / scenarios.len() as f64)
}

/// Fraction of scenarios peaking at each hour.
pub fn hour_peak_histogram(scenarios: &ScenarioSet) -> Result<Vec<f64>> {
    if scenarios.is_empty() {
        return Err(Error::EmptyScenario);
    }
    let mut counts = vec![0usize; scenarios.hours()];
    for p in scenarios.paths() {
        counts[argmax_hour(p)] += 1;
    }
    let n = scenarios.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// Probability that the microgrid's net load sets a new monthly maximum.
/// The argmax histogram returned alongside is unconditional, i.e. not
/// restricted to scenarios that set the maximum.
pub fn ncp_day_probability(mg_net: &ScenarioSet, month_running_max: f64) -> Result<f64> {
    day_nrm_probability(mg_net, month_running_max)
}

/// Probability that the day's system peak enters the season's top five.
/// `fifth_highest` is `None` while fewer than five days have been seen.
pub fn five_cp_day_probability(scenarios: &ScenarioSet, fifth_highest: Option<f64>) -> Result<f64> {
    match fifth_highest {
        None if scenarios.is_empty() => Err(Error::EmptyScenario),
        None => Ok(1.0),
        Some(level) => day_nrm_probability(scenarios, level),
    }
}

/// Day probability and hour histogram together.
pub fn peak_probabilities(scenarios: &ScenarioSet, running_max: f64) -> Result<PeakProbabilities> {
    PeakProbabilities::new(
        scenarios.date,
        scenarios.entity.clone(),
        day_nrm_probability(scenarios, running_max)?,
        hour_peak_histogram(scenarios)?,
    )
}
