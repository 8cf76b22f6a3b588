//! Joint Gaussian models of hourly load pairs and conditional Monte Carlo
//! sampling from them.
//!
//! A model of the pair (A, B) describes the 2H-vector of transformed values
//! of one day by class-dependent means (weekday vs weekend/holiday) and one
//! pooled residual covariance, shrunk toward its diagonal. Drawing B given
//! an observed or simulated A uses the partitioned-Gaussian conditional law.

use chrono::{Duration, NaiveDate};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DayClass, DayMode, Entity, HolidayCalendar, HourlySeries, ScenarioSet};

/// Fewest complete days a fit accepts.
pub const MIN_FIT_DAYS: usize = 60;

/// Conditional directions with variance below this multiple of the
/// eigenvalue floor are treated as deterministic.
const FLOOR_MULTIPLE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Log,
    Identity,
}

impl Transform {
    pub fn forward(self, x: f64) -> f64 {
        match self {
            Transform::Log => x.ln(),
            Transform::Identity => x,
        }
    }

    pub fn inverse(self, z: f64) -> f64 {
        match self {
            Transform::Log => z.exp(),
            Transform::Identity => z,
        }
    }

    fn admits(self, x: f64) -> bool {
        match self {
            Transform::Log => x > 0.0,
            Transform::Identity => x.is_finite(),
        }
    }
}

/// Joint model of one day of A and B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointLoadModel {
    pub a: Entity,
    pub b: Entity,
    pub transform: Transform,
    pub hours: usize,
    /// B is modeled as the increment t(B) − t(A). With this coordinate a
    /// perfectly predicted B has exactly zero variance.
    pub increment: bool,
    /// Per class (weekday, weekend) the 2H mean vector, A hours first.
    pub means: [Vec<f64>; 2],
    /// 2H × 2H residual covariance, row-major.
    pub residual_cov: Vec<Vec<f64>>,
    pub shrinkage: f64,
    pub eigen_floor: f64,
    pub fit_window: (NaiveDate, NaiveDate),
    pub n_days: usize,
    pub holidays: HolidayCalendar,
}

/// Complete, transformable day pairs in the window, in date order.
fn paired_days(
    a: &HourlySeries,
    b: &HourlySeries,
    window: (NaiveDate, NaiveDate),
    transform: Transform,
    hours: usize,
) -> Vec<(NaiveDate, Vec<f64>, Vec<f64>)> {
    let mut out = Vec::new();
    let mut d = window.0;
    while d <= window.1 {
        if let (Ok(x), Ok(y)) = (a.day_slice(d, DayMode::Strict), b.day_slice(d, DayMode::Strict)) {
            if x.len() == hours
                && y.len() == hours
                && x.iter().chain(&y).all(|v| transform.admits(*v))
            {
                out.push((d, x, y));
            }
        }
        d += Duration::days(1);
    }
    out
}

/// Shrinkage intensity toward the diagonal target: the summed estimated
/// variance of the off-diagonal sample covariances over their summed
/// squares, clamped to [0, 1].
fn shrinkage_intensity(resid: &[Vec<f64>], s: &DMatrix<f64>) -> f64 {
    let n = resid.len() as f64;
    let p = s.nrows();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i == j {
                continue;
            }
            let mean = s[(i, j)] * (n - 1.0) / n;
            let var: f64 = resid
                .iter()
                .map(|r| (r[i] * r[j] - mean).powi(2))
                .sum::<f64>()
                * n
                / (n - 1.0).powi(3);
            num += var;
            den += s[(i, j)].powi(2);
        }
    }
    if den == 0.0 {
        1.0
    } else {
        (num / den).clamp(0.0, 1.0)
    }
}

/// Fits the joint model of (a, b) over the inclusive date window.
pub fn fit_joint(
    a: &HourlySeries,
    b: &HourlySeries,
    window: (NaiveDate, NaiveDate),
    transform: Transform,
    increment: bool,
    holidays: &HolidayCalendar,
) -> Result<JointLoadModel> {
    let hours = crate::model::HOURS_PER_DAY;
    let days = paired_days(a, b, window, transform, hours);
    if days.len() < MIN_FIT_DAYS {
        return Err(Error::InsufficientData(format!(
            "{}/{} fit over {}..={} has {} complete days, need {MIN_FIT_DAYS}",
            a.entity(),
            b.entity(),
            window.0,
            window.1,
            days.len()
        )));
    }
    let samples: Vec<(DayClass, Vec<f64>)> = days
        .iter()
        .map(|(d, x, y)| {
            let tx: Vec<f64> = x.iter().map(|v| transform.forward(*v)).collect();
            let ty: Vec<f64> = y
                .iter()
                .zip(&tx)
                .map(|(v, ta)| {
                    let t = transform.forward(*v);
                    if increment {
                        t - ta
                    } else {
                        t
                    }
                })
                .collect();
            (DayClass::of(*d, holidays), [tx, ty].concat())
        })
        .collect();
    fit_from_samples(
        a.entity().clone(),
        b.entity().clone(),
        transform,
        increment,
        hours,
        &samples,
        window,
        holidays.clone(),
    )
}

#[allow(clippy::too_many_arguments)]
fn fit_from_samples(
    a: Entity,
    b: Entity,
    transform: Transform,
    increment: bool,
    hours: usize,
    samples: &[(DayClass, Vec<f64>)],
    window: (NaiveDate, NaiveDate),
    holidays: HolidayCalendar,
) -> Result<JointLoadModel> {
    let p = 2 * hours;
    let mut overall = vec![0.0; p];
    for (_, v) in samples {
        for (o, x) in overall.iter_mut().zip(v) {
            *o += x;
        }
    }
    overall.iter_mut().for_each(|o| *o /= samples.len() as f64);
    let mut means = [vec![0.0; p], vec![0.0; p]];
    for (k, mean) in means.iter_mut().enumerate() {
        let members: Vec<&Vec<f64>> = samples
            .iter()
            .filter(|(c, _)| c.index() == k)
            .map(|(_, v)| v)
            .collect();
        if members.is_empty() {
            mean.clone_from(&overall);
            continue;
        }
        for v in &members {
            for (m, x) in mean.iter_mut().zip(v.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= members.len() as f64);
    }
    let resid: Vec<Vec<f64>> = samples
        .iter()
        .map(|(c, v)| v.iter().zip(&means[c.index()]).map(|(x, m)| x - m).collect())
        .collect();
    let n = resid.len();
    let mut s = DMatrix::<f64>::zeros(p, p);
    for r in &resid {
        for i in 0..p {
            for j in 0..p {
                s[(i, j)] += r[i] * r[j];
            }
        }
    }
    s /= (n - 1) as f64;
    let lambda = shrinkage_intensity(&resid, &s);
    let mut shrunk = s.clone() * (1.0 - lambda);
    for i in 0..p {
        shrunk[(i, i)] = s[(i, i)];
    }
    let trace = shrunk.trace();
    let floor = (1e-8 * trace / p as f64).max(1e-12);
    let cov = floor_eigenvalues(&shrunk, floor)?;
    Ok(JointLoadModel {
        a,
        b,
        transform,
        hours,
        increment,
        means,
        residual_cov: to_rows(&cov),
        shrinkage: lambda,
        eigen_floor: floor,
        fit_window: window,
        n_days: n,
        holidays,
    })
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn floor_eigenvalues(m: &DMatrix<f64>, floor: f64) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularCov("non-finite covariance entries".into()));
    }
    let eig = SymmetricEigen::new(m.clone());
    let vals = eig.eigenvalues.map(|l| l.max(floor));
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    let out = (&out + out.transpose()) * 0.5;
    let check = SymmetricEigen::new(out.clone());
    if check.eigenvalues.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::SingularCov(format!(
            "minimum eigenvalue {} after flooring",
            check.eigenvalues.min()
        )));
    }
    Ok(out)
}

/// The Gaussian law of B's transformed hours given A's: `mean = offset +
/// gain · t(a)` and a square-root factor of the conditional covariance.
pub struct Conditional {
    offset: DVector<f64>,
    gain: DMatrix<f64>,
    sqrt_cov: DMatrix<f64>,
    cov: DMatrix<f64>,
}

impl Conditional {
    pub fn mean(&self, ta: &[f64]) -> Vec<f64> {
        let a = DVector::from_column_slice(ta);
        (&self.offset + &self.gain * a).iter().copied().collect()
    }

    pub fn covariance(&self) -> Vec<Vec<f64>> {
        to_rows(&self.cov)
    }
}

impl JointLoadModel {
    /// Assembles a model from explicit parameters; the covariance is
    /// symmetrized and floored like a fitted one.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        a: Entity,
        b: Entity,
        transform: Transform,
        increment: bool,
        means: [Vec<f64>; 2],
        cov: Vec<Vec<f64>>,
        holidays: HolidayCalendar,
    ) -> Result<Self> {
        let p = cov.len();
        if p % 2 != 0 || means.iter().any(|m| m.len() != p) || cov.iter().any(|r| r.len() != p) {
            return Err(Error::Dimension("model parameters must be 2H-dimensional".into()));
        }
        let m = DMatrix::from_fn(p, p, |i, j| 0.5 * (cov[i][j] + cov[j][i]));
        let floor = (1e-8 * m.trace() / p as f64).max(1e-12);
        let cov = floor_eigenvalues(&m, floor)?;
        Ok(JointLoadModel {
            a,
            b,
            transform,
            hours: p / 2,
            increment,
            means,
            residual_cov: to_rows(&cov),
            shrinkage: 0.0,
            eigen_floor: floor,
            fit_window: (NaiveDate::MIN, NaiveDate::MIN),
            n_days: 0,
            holidays,
        })
    }

    /// Conditional law of B's coordinates on `date` given t(A).
    pub fn conditional(&self, date: NaiveDate) -> Result<Conditional> {
        let h = self.hours;
        let mu = &self.means[DayClass::of(date, &self.holidays).index()];
        let s = DMatrix::from_fn(2 * h, 2 * h, |i, j| self.residual_cov[i][j]);
        let saa = s.view((0, 0), (h, h)).into_owned();
        let sba = s.view((h, 0), (h, h)).into_owned();
        let sbb = s.view((h, h), (h, h)).into_owned();
        let chol = saa
            .cholesky()
            .ok_or_else(|| Error::SingularCov("A block is not positive definite".into()))?;
        // gain = Σ_BA Σ_AA⁻¹, computed as (Σ_AA⁻¹ Σ_AB)ᵀ
        let gain = chol.solve(&sba.transpose()).transpose();
        let mu_a = DVector::from_column_slice(&mu[..h]);
        let mu_b = DVector::from_column_slice(&mu[h..]);
        let offset = &mu_b - &gain * &mu_a;
        let cov = &sbb - &gain * sba.transpose();
        let cov = (&cov + cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(cov.clone());
        let cutoff = FLOOR_MULTIPLE * self.eigen_floor;
        let roots = eig
            .eigenvalues
            .map(|l| if l > cutoff { l.sqrt() } else { 0.0 });
        let sqrt_cov = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
        Ok(Conditional {
            offset,
            gain,
            sqrt_cov,
            cov,
        })
    }

    fn check_condition(&self, entity: &Entity, values: &[f64]) -> Result<()> {
        if entity != &self.a {
            return Err(Error::ModelMismatch(format!(
                "model conditions on {}, got {entity}",
                self.a
            )));
        }
        if values.len() != self.hours {
            return Err(Error::LengthMismatch {
                expected: self.hours,
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !self.transform.admits(**v)) {
            return Err(Error::Dimension(format!(
                "condition value {v} outside the transform's domain"
            )));
        }
        Ok(())
    }

    /// One B path from the conditional law given raw A values.
    fn draw(&self, cond: &Conditional, a: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let h = self.hours;
        let ta: Vec<f64> = a.iter().map(|v| self.transform.forward(*v)).collect();
        let mean = cond.mean(&ta);
        let z = DVector::from_iterator(h, (0..h).map(|_| StandardNormal.sample(rng)));
        let noise = &cond.sqrt_cov * z;
        (0..h)
            .map(|k| {
                let mut y = mean[k] + noise[k];
                if self.increment {
                    y += ta[k];
                }
                let v = self.transform.inverse(y);
                if self.b.nonnegative() {
                    v.max(0.0)
                } else {
                    v
                }
            })
            .collect()
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for a (stage, date) pair, so stages and days draw independent
/// streams from one user seed.
pub fn derive_seed(seed: u64, stage: &str, date: NaiveDate) -> u64 {
    // FNV-1a over the inputs; stable across platforms and releases.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let bytes = seed
        .to_le_bytes()
        .into_iter()
        .chain(stage.bytes())
        .chain(date.to_string().into_bytes());
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Draws `n` B paths given one A condition.
pub fn sample_conditional(
    model: &JointLoadModel,
    entity: &Entity,
    condition: &[f64],
    date: NaiveDate,
    n: usize,
    seed: u64,
) -> Result<ScenarioSet> {
    model.check_condition(entity, condition)?;
    if n == 0 {
        return Err(Error::EmptyScenario);
    }
    let cond = model.conditional(date)?;
    let paths: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| model.draw(&cond, condition, &mut stream_rng(seed, i as u64)))
        .collect();
    ScenarioSet::new(model.b.clone(), date, model.hours, paths, seed)
}

/// One B path per parent path, each conditioned on its parent.
pub fn sample_pathwise(model: &JointLoadModel, parent: &ScenarioSet, seed: u64) -> Result<ScenarioSet> {
    if parent.is_empty() {
        return Err(Error::EmptyScenario);
    }
    for p in parent.paths() {
        model.check_condition(&parent.entity, p)?;
    }
    let cond = model.conditional(parent.date)?;
    let paths: Vec<f64> = (0..parent.len())
        .into_par_iter()
        .flat_map_iter(|i| model.draw(&cond, parent.path(i), &mut stream_rng(seed, i as u64)))
        .collect();
    ScenarioSet::new(model.b.clone(), parent.date, model.hours, paths, seed)
}

/// The three chained models of the day-ahead scenario engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioModels {
    /// Regional actual given its day-ahead forecast.
    pub ma: JointLoadModel,
    /// Zone given region.
    pub ps: JointLoadModel,
    /// Microgrid given zone.
    pub mg: JointLoadModel,
}

/// Fits all three models on the `window_days` days before `as_of`.
pub fn fit_models(
    ma_forecast: &HourlySeries,
    ma: &HourlySeries,
    ps: &HourlySeries,
    mg: &HourlySeries,
    as_of: NaiveDate,
    window_days: i64,
    holidays: &HolidayCalendar,
) -> Result<ScenarioModels> {
    let window = (as_of - Duration::days(window_days), as_of - Duration::days(1));
    Ok(ScenarioModels {
        ma: fit_joint(ma_forecast, ma, window, Transform::Log, true, holidays)?,
        ps: fit_joint(ma, ps, window, Transform::Log, false, holidays)?,
        mg: fit_joint(ps, mg, window, Transform::Log, false, holidays)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayScenarios {
    pub ma: ScenarioSet,
    pub ps: ScenarioSet,
    pub mg: ScenarioSet,
    /// Microgrid load net of the PV forecast, battery excluded.
    pub mg_net: ScenarioSet,
}

/// Regional paths given the forecast, then one zone path per regional path
/// and one microgrid path per zone path.
pub fn generate_day_scenarios(
    models: &ScenarioModels,
    ma_forecast: &[f64],
    pv_forecast: &[f64],
    date: NaiveDate,
    n: usize,
    seed: u64,
) -> Result<DayScenarios> {
    let ma = sample_conditional(
        &models.ma,
        &models.ma.a,
        ma_forecast,
        date,
        n,
        derive_seed(seed, "ma", date),
    )?;
    let ps = sample_pathwise(&models.ps, &ma, derive_seed(seed, "ps", date))?;
    let mg = sample_pathwise(&models.mg, &ps, derive_seed(seed, "mg", date))?;
    let mg_net = mg.minus_profile(Entity::new(Entity::MG_NET), pv_forecast)?;
    Ok(DayScenarios { ma, ps, mg, mg_net })
}
