//! Per-hour no-intercept regression of PV output on forecast downward
//! short-wave radiation.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DayMode, HourlySeries, HOURS_PER_DAY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvModel {
    /// MW per W/m², one per hour.
    pub coef: Vec<f64>,
    pub train_counts: Vec<usize>,
    /// Hours with fewer than two pairs or no radiation at all; their
    /// coefficient is 0.
    pub degenerate: Vec<bool>,
    /// Training used days strictly before this date.
    pub fit_date: NaiveDate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PvFitOptions {
    /// Drop pairs with zero PV while radiation exceeds this level
    /// (outages rather than weather).
    pub drop_zero_pv_above_ssrd: Option<f64>,
}

/// Hour-by-hour training pairs `(ssrd, pv)` from complete days before `as_of`.
pub fn training_pairs(
    ssrd: &HourlySeries,
    pv: &HourlySeries,
    as_of: NaiveDate,
    opts: &PvFitOptions,
) -> Vec<Vec<(f64, f64)>> {
    let mut pairs = vec![Vec::new(); HOURS_PER_DAY];
    for d in ssrd.dates().filter(|d| *d < as_of) {
        let (Ok(x), Ok(y)) = (ssrd.day_slice(d, DayMode::Strict), pv.day_slice(d, DayMode::Strict))
        else {
            continue;
        };
        for h in 0..HOURS_PER_DAY {
            if let Some(t) = opts.drop_zero_pv_above_ssrd {
                if y[h] == 0.0 && x[h] > t {
                    continue;
                }
            }
            pairs[h].push((x[h], y[h]));
        }
    }
    pairs
}

/// Closed-form coefficient Σxy / Σx² per hour.
pub fn fit_from_pairs(pairs: &[Vec<(f64, f64)>], fit_date: NaiveDate) -> Result<PvModel> {
    if pairs.iter().all(|p| p.len() < 2) {
        return Err(Error::NoData("no hour has two or more (ssrd, pv) pairs".into()));
    }
    let mut coef = Vec::with_capacity(pairs.len());
    let mut degenerate = Vec::with_capacity(pairs.len());
    for p in pairs {
        let sxx: f64 = p.iter().map(|(x, _)| x * x).sum();
        let sxy: f64 = p.iter().map(|(x, y)| x * y).sum();
        if p.len() < 2 || sxx == 0.0 {
            coef.push(0.0);
            degenerate.push(true);
        } else {
            coef.push(sxy / sxx);
            degenerate.push(false);
        }
    }
    Ok(PvModel {
        coef,
        train_counts: pairs.iter().map(Vec::len).collect(),
        degenerate,
        fit_date,
    })
}

pub fn fit_pv(
    ssrd: &HourlySeries,
    pv: &HourlySeries,
    as_of: NaiveDate,
    opts: &PvFitOptions,
) -> Result<PvModel> {
    fit_from_pairs(&training_pairs(ssrd, pv, as_of, opts), as_of)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvPrediction {
    pub values: Vec<f64>,
    /// Hours whose raw prediction was negative and clamped to 0.
    pub clamped: Vec<usize>,
}

pub fn predict_pv(model: &PvModel, ssrd_forecast: &[f64]) -> Result<PvPrediction> {
    if ssrd_forecast.len() != model.coef.len() {
        return Err(Error::LengthMismatch {
            expected: model.coef.len(),
            got: ssrd_forecast.len(),
        });
    }
    let mut clamped = Vec::new();
    let values = model
        .coef
        .iter()
        .zip(ssrd_forecast)
        .enumerate()
        .map(|(h, (c, x))| {
            let raw = c * x;
            if raw < 0.0 {
                clamped.push(h);
                0.0
            } else {
                raw
            }
        })
        .collect();
    Ok(PvPrediction { values, clamped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvScore {
    pub mae: f64,
    pub mse: f64,
    pub n: usize,
}

pub fn score_pv(predictions: &[f64], actuals: &[f64]) -> Result<PvScore> {
    if predictions.len() != actuals.len() {
        return Err(Error::LengthMismatch {
            expected: predictions.len(),
            got: actuals.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::NoData("nothing to score".into()));
    }
    let n = predictions.len() as f64;
    let (abs, sq) = predictions
        .iter()
        .zip(actuals)
        .fold((0.0, 0.0), |(a, s), (p, y)| (a + (p - y).abs(), s + (p - y).powi(2)));
    Ok(PvScore {
        mae: abs / n,
        mse: sq / n,
        n: predictions.len(),
    })
}
