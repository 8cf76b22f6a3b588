//! Daily pipeline and seasonal backtest.
//!
//! A day runs PV fit, scenario generation, peak probabilities, MILP build
//! and solve, then settles the realized day. Models are fitted only on data
//! strictly before the target day; the day's own regional and radiation
//! forecasts are the only same-day inputs.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::benchmark::{self, AlertTuning, BenchmarkPolicy};
use crate::error::{Error, Result};
use crate::ingest::{self, DatasetBundle};
use crate::milpsolve::{lpformat, SolveOptions};
use crate::model::{
    is_cp_business_day, BatterySpec, DayContext, DayMode, Entity, PeakProbabilities, ScenarioSet,
    Schedule, TariffConfig,
};
use crate::peakprob;
use crate::pvforecast::{self, PvFitOptions};
use crate::scengen::{self, DayScenarios};
use crate::schedopt::{self, ObjectiveTerms};
use crate::settle::{
    self, BillLedger, CpAttribution, DailyPnl, DayActuals, DayProbabilities, LedgerState,
    NcpAccounting, SeasonReport, SettleModes,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicySelection {
    Optimizer,
    Benchmark,
    #[default]
    Both,
}

impl PolicySelection {
    pub fn optimizer(self) -> bool {
        matches!(self, PolicySelection::Optimizer | PolicySelection::Both)
    }

    pub fn benchmark(self) -> bool {
        matches!(self, PolicySelection::Benchmark | PolicySelection::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlertMode {
    #[default]
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributionMode {
    #[default]
    ExPost,
    Running,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub policy: BenchmarkPolicy,
    pub alert: AlertMode,
    /// Seasons (first and last year) to tune the alert quantile on. When
    /// absent the policy's quantile is used as is.
    pub tune_years: Option<(i32, i32)>,
    pub alert_penalty: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            policy: BenchmarkPolicy::default(),
            alert: AlertMode::Auto,
            tune_years: None,
            alert_penalty: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SettleConfig {
    pub accounting: NcpAccounting,
    pub attribution: AttributionMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArtifactConfig {
    /// Write `runs/<date>/` directories.
    pub enabled: bool,
    pub scenarios: bool,
    pub lp_export: bool,
}

impl Default for ArtifactConfig {
    fn default() -> Self {
        ArtifactConfig {
            enabled: true,
            scenarios: true,
            lp_export: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub bundle: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub n_scenarios: usize,
    pub seed: u64,
    /// Days of history for the load models.
    pub fit_window_days: i64,
    pub policy: PolicySelection,
    /// Also settle a battery-idle policy as a reference column.
    pub idle_baseline: bool,
    /// Start each day at the previous day's final SOC instead of `soc_init`.
    pub carry_soc: bool,
    pub day_mode: DayMode,
    pub artifacts: ArtifactConfig,
    pub battery: BatterySpec,
    pub tariff: TariffConfig,
    pub benchmark: BenchmarkConfig,
    pub settle: SettleConfig,
    pub solver: SolveOptions,
    pub pv: PvFitOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            bundle: None,
            out_dir: PathBuf::from("out"),
            start: None,
            end: None,
            n_scenarios: 1000,
            seed: 0,
            fit_window_days: 365,
            policy: PolicySelection::Both,
            idle_baseline: true,
            carry_soc: false,
            day_mode: DayMode::Strict,
            artifacts: ArtifactConfig::default(),
            battery: BatterySpec::reference(),
            tariff: TariffConfig::synthetic_default(),
            benchmark: BenchmarkConfig::default(),
            settle: SettleConfig::default(),
            solver: SolveOptions::default(),
            pv: PvFitOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.battery.validate()?;
        self.tariff.validate()?;
        self.benchmark.policy.validate(&self.battery)?;
        if self.n_scenarios == 0 {
            return Err(Error::Config("n_scenarios must be positive".into()));
        }
        if self.fit_window_days < scengen::MIN_FIT_DAYS as i64 {
            return Err(Error::Config(format!(
                "fit_window_days must be at least {}",
                scengen::MIN_FIT_DAYS
            )));
        }
        if let (Some(s), Some(e)) = (self.start, self.end) {
            if s > e {
                return Err(Error::Config(format!("start {s} is after end {e}")));
            }
        }
        Ok(())
    }

    pub fn open_bundle(&self) -> Result<DatasetBundle> {
        let dir = self
            .bundle
            .as_ref()
            .ok_or_else(|| Error::Config("no bundle configured".into()))?;
        ingest::open_bundle(dir)
    }
}

/// Running levels the day's probabilities compare against. `None` means
/// nothing has been observed yet.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunningLevels {
    pub month_max: Option<f64>,
    pub season_cp: Option<f64>,
    pub fifth_highest: Option<f64>,
}

impl RunningLevels {
    /// Levels in force on `date` given the state after the previous day.
    pub fn from_state(state: &LedgerState, date: NaiveDate) -> Self {
        let same_month = state.month == Some((date.year(), date.month()));
        let same_season = state.season_year == Some(date.year());
        RunningLevels {
            month_max: state.month_max.filter(|_| same_month).map(|m| m.level),
            season_cp: state.season_cp.filter(|_| same_season).map(|m| m.level),
            fifth_highest: if same_season && state.five_cp.len() == 5 {
                Some(state.five_cp[4].level)
            } else {
                None
            },
        }
    }

    /// Levels reconstructed from history alone, for standalone days. The
    /// month maximum assumes an idle battery.
    pub fn from_history(bundle: &DatasetBundle, date: NaiveDate, tariff: &TariffConfig) -> Self {
        let first_of_month = date.with_day(1).expect("day 1 exists");
        let day_max = |s: &crate::model::HourlySeries, d| {
            s.day_slice(d, DayMode::Strict)
                .ok()
                .map(|v| v.into_iter().fold(f64::NEG_INFINITY, f64::max))
        };
        let mut month_max: Option<f64> = None;
        for d in first_of_month.iter_days().take_while(|d| *d < date) {
            if let (Ok(l), Ok(p)) = (
                bundle.mg_load().day_slice(d, DayMode::Strict),
                bundle.pv_actual().day_slice(d, DayMode::Strict),
            ) {
                let m = l.iter().zip(&p).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
                month_max = Some(month_max.map_or(m, |x| x.max(m)));
            }
        }
        let season = &tariff.cp_season;
        let mut season_cp: Option<f64> = None;
        let mut tops: Vec<f64> = Vec::new();
        for d in season.window.days_in_year(date.year()).take_while(|d| *d < date) {
            if !season.is_business_day(d) {
                continue;
            }
            if let Some(z) = day_max(bundle.ps_actual(), d) {
                season_cp = Some(season_cp.map_or(z, |x| x.max(z)));
            }
            if let Some(s) = day_max(bundle.ma_actual(), d) {
                tops.push(s);
            }
        }
        tops.sort_by(|a, b| b.total_cmp(a));
        RunningLevels {
            month_max,
            season_cp,
            fifth_highest: tops.get(4).copied(),
        }
    }
}

/// Everything one optimizer day produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayOutcome {
    pub date: NaiveDate,
    pub schedule: Schedule,
    pub probs: DayProbabilities,
    pub terms: ObjectiveTerms,
    pub objective: f64,
    pub nodes: usize,
    pub rows_generated: usize,
    pub actual_pnl: DailyPnl,
    pub pv_forecast: Vec<f64>,
    pub mg_mean_load: Vec<f64>,
    #[serde(skip)]
    pub scenarios: Option<DayScenarios>,
    #[serde(skip)]
    pub solver_log: Vec<String>,
}

fn check_window(bundle: &DatasetBundle, date: NaiveDate, window: i64) -> Result<()> {
    let first = date - Duration::days(window);
    if first < bundle.coverage.0 {
        return Err(Error::LookAhead(format!(
            "{date} needs a training window from {first}, data starts {}",
            bundle.coverage.0
        )));
    }
    if date > bundle.coverage.1 {
        return Err(Error::gap("bundle", format!("{date} is after the data ends {}", bundle.coverage.1)));
    }
    Ok(())
}

/// Decision-time inputs for `date`: the PV forecast, the scenario sets and
/// the day's probabilities.
pub fn day_inputs(
    config: &RunConfig,
    bundle: &DatasetBundle,
    date: NaiveDate,
    levels: &RunningLevels,
) -> Result<(Vec<f64>, DayScenarios, DayProbabilities)> {
    check_window(bundle, date, config.fit_window_days)?;
    let history = bundle.truncated_through(date - Duration::days(1));
    let mode = config.day_mode;

    let ssrd_today = bundle.ssrd_forecast().day_slice(date, mode).map_err(|e| e.at("pvfit"))?;
    let pv_model = pvforecast::fit_pv(history.ssrd_forecast(), history.pv_actual(), date, &config.pv)
        .map_err(|e| e.at("pvfit"))?;
    let pv = pvforecast::predict_pv(&pv_model, &ssrd_today)
        .map_err(|e| e.at("pvfit"))?
        .values;

    let holidays = &config.tariff.cp_season.holidays;
    let models = scengen::fit_models(
        history.ma_forecast(),
        history.ma_actual(),
        history.ps_actual(),
        history.mg_load(),
        date,
        config.fit_window_days,
        holidays,
    )
    .map_err(|e| e.at("scengen"))?;
    let ma_fcst = bundle.ma_forecast().day_slice(date, mode).map_err(|e| e.at("scengen"))?;
    let scen = scengen::generate_day_scenarios(&models, &ma_fcst, &pv, date, config.n_scenarios, config.seed)
        .map_err(|e| e.at("scengen"))?;

    let probs = probabilities(config, &scen, date, levels).map_err(|e| e.at("peakprob"))?;
    Ok((pv, scen, probs))
}

fn probabilities(
    config: &RunConfig,
    scen: &DayScenarios,
    date: NaiveDate,
    levels: &RunningLevels,
) -> Result<DayProbabilities> {
    let tariff = &config.tariff;
    let cp_day = is_cp_business_day(date, &tariff.cp_season);
    let p_cp = if cp_day {
        peakprob::day_nrm_probability(&scen.ps, levels.season_cp.unwrap_or(f64::NEG_INFINITY))?
    } else {
        0.0
    };
    let cp = PeakProbabilities::new(date, Entity::new(Entity::PS), p_cp, peakprob::hour_peak_histogram(&scen.ps)?)?;
    let cp5 = if tariff.lambda_5cp.is_some() {
        let p = if cp_day {
            peakprob::five_cp_day_probability(&scen.ma, levels.fifth_highest)?
        } else {
            0.0
        };
        Some(PeakProbabilities::new(
            date,
            Entity::new(Entity::MA),
            p,
            peakprob::hour_peak_histogram(&scen.ma)?,
        )?)
    } else {
        None
    };
    let ncp_day = peakprob::ncp_day_probability(&scen.mg_net, levels.month_max.unwrap_or(f64::NEG_INFINITY))?;
    Ok(DayProbabilities { cp, cp5, ncp_day })
}

/// Realized loads of `date`.
pub fn day_actuals(bundle: &DatasetBundle, date: NaiveDate, mode: DayMode) -> Result<DayActuals> {
    Ok(DayActuals {
        mg_load: bundle.mg_load().day_slice(date, mode)?,
        pv: bundle.pv_actual().day_slice(date, mode)?,
        zone_load: bundle.ps_actual().day_slice(date, mode)?,
        system_load: Some(bundle.ma_actual().day_slice(date, mode)?),
    })
}

/// The day context handed to the MILP builder.
pub fn day_context(
    scen: &DayScenarios,
    pv: &[f64],
    probs: &DayProbabilities,
    levels: &RunningLevels,
) -> Result<DayContext> {
    DayContext::new(
        scen.mg.clone(),
        pv.to_vec(),
        probs.cp.clone(),
        probs.cp5.clone(),
        probs.ncp_day,
        levels.month_max.unwrap_or(0.0),
        levels.season_cp.unwrap_or(0.0),
    )
}

/// Runs the optimizer pipeline for one day and evaluates its actual P&L.
pub fn run_day(
    config: &RunConfig,
    bundle: &DatasetBundle,
    date: NaiveDate,
    levels: &RunningLevels,
    battery: &BatterySpec,
) -> Result<DayOutcome> {
    let (pv, scen, probs) = day_inputs(config, bundle, date, levels)?;
    let ctx = day_context(&scen, &pv, &probs, levels).map_err(|e| e.at("build"))?;
    let sol = schedopt::optimize_day(&ctx, battery, &config.tariff, &config.solver).map_err(|e| e.at("solve"))?;
    let actuals = day_actuals(bundle, date, config.day_mode).map_err(|e| e.at("settle"))?;
    let pnl = settle::actual_pnl(date, &sol.schedule, &actuals.mg_load, &actuals.pv, &probs, &config.tariff, battery)
        .map_err(|e| e.at("settle"))?;
    Ok(DayOutcome {
        date,
        objective: sol.mip.objective,
        nodes: sol.mip.nodes,
        rows_generated: sol.mip.rows_generated,
        schedule: sol.schedule,
        probs,
        terms: sol.terms,
        actual_pnl: pnl,
        pv_forecast: pv,
        mg_mean_load: ctx.mg_mean_load.clone(),
        scenarios: Some(scen),
        solver_log: sol.mip.log,
    })
}

/// `hour,pi_minus,pi_plus,b,soc,battery_mw`.
pub fn schedule_csv(schedule: &Schedule, battery: &BatterySpec) -> String {
    let mut out = String::from("hour,pi_minus,pi_plus,b,soc,battery_mw\n");
    for h in 0..schedule.hours() {
        out.push_str(&format!(
            "{h},{},{},{},{},{}\n",
            schedule.pi_minus[h] + 0.0,
            schedule.pi_plus[h] + 0.0,
            u8::from(schedule.b[h]),
            schedule.soc[h] + 0.0,
            schedule.battery_mw(h, battery) + 0.0
        ));
    }
    out
}

/// Reads a schedule CSV and recomputes SOC from the actions.
pub fn read_schedule_csv(text: &str, battery: &BatterySpec) -> Result<Schedule> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut pi_minus = Vec::new();
    let mut pi_plus = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            detail: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Parse {
                    line,
                    detail: format!("column {i} is not a number"),
                })
        };
        pi_minus.push(field(1)?);
        pi_plus.push(field(2)?);
    }
    let s = Schedule::from_actions(pi_minus, pi_plus, battery);
    s.validate(battery)?;
    Ok(s)
}

/// `scenario_id,entity,hour,value` rows for each set.
pub fn scenarios_csv(sets: &[&ScenarioSet]) -> String {
    let mut out = String::from("scenario_id,entity,hour,value\n");
    for set in sets {
        for (i, p) in set.paths().enumerate() {
            for (h, v) in p.iter().enumerate() {
                out.push_str(&format!("{i},{},{h},{v}\n", set.entity));
            }
        }
    }
    out
}

/// Reads one entity's paths back from a scenario CSV.
pub fn read_scenarios_csv(text: &str, entity: &str, date: NaiveDate) -> Result<ScenarioSet> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            detail: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.get(1) != Some(entity) {
            continue;
        }
        let bad = |what: &str| Error::Parse {
            line,
            detail: format!("bad {what}"),
        };
        let id: usize = rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(|| bad("scenario_id"))?;
        let hour: usize = rec.get(2).and_then(|v| v.parse().ok()).ok_or_else(|| bad("hour"))?;
        let value: f64 = rec.get(3).and_then(|v| v.parse().ok()).ok_or_else(|| bad("value"))?;
        if id >= rows.len() {
            rows.resize(id + 1, Vec::new());
        }
        if hour != rows[id].len() {
            return Err(Error::Parse {
                line,
                detail: format!("scenario {id} hour {hour} out of order"),
            });
        }
        rows[id].push(value);
    }
    if rows.is_empty() {
        return Err(Error::EmptyScenario);
    }
    ScenarioSet::from_rows(Entity::new(entity), date, &rows, 0)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("artifact serializes")
}

/// Writes `runs/<date>/` for one optimizer day.
pub fn write_day_artifacts(
    config: &RunConfig,
    outcome: &DayOutcome,
    battery: &BatterySpec,
    benchmark_schedule: Option<&Schedule>,
) -> Result<PathBuf> {
    let dir = config.out_dir.join("runs").join(outcome.date.to_string());
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write(&dir.join("schedule.csv"), &schedule_csv(&outcome.schedule, battery))?;
    write(&dir.join("probs.json"), &to_json(&outcome.probs))?;
    write(&dir.join("outcome.json"), &to_json(outcome))?;
    write(&dir.join("solver.log"), &(outcome.solver_log.join("\n") + "\n"))?;
    if let Some(b) = benchmark_schedule {
        write(&dir.join("benchmark_schedule.csv"), &schedule_csv(b, battery))?;
    }
    if let Some(scen) = &outcome.scenarios {
        if config.artifacts.scenarios {
            write(
                &dir.join("scenarios.csv"),
                &scenarios_csv(&[&scen.ma, &scen.ps, &scen.mg, &scen.mg_net]),
            )?;
        }
        if config.artifacts.lp_export {
            let probs = &outcome.probs;
            let ctx = DayContext::new(
                scen.mg.clone(),
                outcome.pv_forecast.clone(),
                probs.cp.clone(),
                probs.cp5.clone(),
                probs.ncp_day,
                0.0,
                0.0,
            )?;
            let inst = schedopt::build_milp(&ctx, battery, &config.tariff)?;
            write(&dir.join("day.lp"), &lpformat::write_lp(&inst))?;
        }
    }
    Ok(dir)
}

/// Whether the benchmark alert is raised on `date`.
pub fn benchmark_alert(config: &RunConfig, bundle: &DatasetBundle, date: NaiveDate, quantile: f64) -> Result<bool> {
    match config.benchmark.alert {
        AlertMode::On => Ok(true),
        AlertMode::Off => Ok(false),
        AlertMode::Auto => benchmark::alert_fires(bundle.ma_forecast(), date, quantile, &config.tariff.cp_season),
    }
}

/// The alert quantile for a season: tuned on earlier seasons when
/// configured, else the policy's own.
pub fn alert_quantile(config: &RunConfig, bundle: &DatasetBundle) -> Result<(f64, Option<AlertTuning>)> {
    match config.benchmark.tune_years {
        None => Ok((config.benchmark.policy.alert_quantile, None)),
        Some(years) => {
            if let Some(start) = config.start {
                if years.1 >= start.year() {
                    return Err(Error::LookAhead(format!(
                        "alert tuning through {} overlaps the run starting {start}",
                        years.1
                    )));
                }
            }
            let t = benchmark::tune_alert(
                bundle.ma_forecast(),
                bundle.ma_actual(),
                years,
                &config.tariff.cp_season,
                config.benchmark.alert_penalty,
            )?;
            Ok((t.quantile, Some(t)))
        }
    }
}

pub const OPTIMIZER: &str = "optimizer";
pub const BENCHMARK: &str = "benchmark";
pub const IDLE: &str = "idle";

/// State of a season run after some number of days; also the checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonState {
    /// The configuration the run started with, as JSON.
    pub config: String,
    pub next_date: NaiveDate,
    pub alert_quantile: f64,
    pub alert_tuning: Option<AlertTuning>,
    pub ledgers: Vec<BillLedger>,
    /// SOC at the end of the last optimizer day.
    pub soc: f64,
    pub alerts: Vec<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonOutcome {
    pub ledgers: Vec<BillLedger>,
    pub report: SeasonReport,
    pub alert_quantile: f64,
    pub alerts: Vec<NaiveDate>,
}

fn ledger_mut<'a>(ledgers: &'a mut [BillLedger], name: &str) -> Option<&'a mut BillLedger> {
    ledgers.iter_mut().find(|l| l.policy == name)
}

fn checkpoint_path(config: &RunConfig) -> PathBuf {
    config.out_dir.join("checkpoint.json")
}

/// Hook called after each settled day; returning an error stops the run
/// with the checkpoint already written.
pub type DayHook<'a> = dyn FnMut(NaiveDate) -> Result<()> + 'a;

/// Runs the season day by day, checkpointing after each day and resuming
/// from an existing checkpoint of the same configuration.
pub fn run_season(config: &RunConfig, bundle: &DatasetBundle, hook: Option<&mut DayHook>) -> Result<SeasonOutcome> {
    config.validate()?;
    let start = config.start.ok_or_else(|| Error::Config("season start is not set".into()))?;
    let end = config.end.ok_or_else(|| Error::Config("season end is not set".into()))?;
    let fingerprint = serde_json::to_string(config).expect("config serializes");
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let ckpt = checkpoint_path(config);

    let mut state = match fs::read_to_string(&ckpt) {
        Ok(text) => {
            let s: SeasonState = serde_json::from_str(&text).map_err(|e| Error::Parse {
                line: e.line(),
                detail: format!("{}: {e}", ckpt.display()),
            })?;
            if s.config != fingerprint {
                return Err(Error::Config(format!(
                    "{} was written by a different configuration",
                    ckpt.display()
                )));
            }
            log::info!("resuming at {}", s.next_date);
            s
        }
        Err(_) => {
            let (q, tuning) = alert_quantile(config, bundle).map_err(|e| e.at("benchmark"))?;
            let attribution = match config.settle.attribution {
                AttributionMode::ExPost => {
                    let peaks = settle::season_peaks(
                        bundle.ps_actual(),
                        Some(bundle.ma_actual()),
                        &config.tariff.cp_season,
                        start.year(),
                    );
                    CpAttribution::ExPost(peaks)
                }
                AttributionMode::Running => CpAttribution::Running,
            };
            let modes = SettleModes {
                accounting: config.settle.accounting,
                attribution,
            };
            let mut ledgers = Vec::new();
            if config.policy.optimizer() {
                ledgers.push(BillLedger::new(OPTIMIZER, modes.clone()));
            }
            if config.policy.benchmark() {
                ledgers.push(BillLedger::new(BENCHMARK, modes.clone()));
            }
            if config.idle_baseline {
                ledgers.push(BillLedger::new(IDLE, modes));
            }
            SeasonState {
                config: fingerprint,
                next_date: start,
                alert_quantile: q,
                alert_tuning: tuning,
                ledgers,
                soc: config.battery.soc_init,
                alerts: Vec::new(),
            }
        }
    };

    let mut hook = hook;
    while state.next_date <= end {
        let date = state.next_date;
        step_day(config, bundle, &mut state, date)?;
        state.next_date = date + Duration::days(1);
        write(&ckpt, &serde_json::to_string(&state).expect("state serializes"))?;
        if let Some(h) = hook.as_deref_mut() {
            h(date)?;
        }
    }

    let report = settle::season_report(&state.ledgers, &config.tariff)?;
    write(&config.out_dir.join("report.csv"), &report.to_csv())?;
    write(&config.out_dir.join("report.txt"), &report.to_table())?;
    write(&config.out_dir.join("daily.csv"), &report.daily_csv())?;
    write(&config.out_dir.join("ledgers.json"), &to_json(&state.ledgers))?;
    for l in &state.ledgers {
        write(&config.out_dir.join(format!("daily_{}.csv", l.policy)), &l.daily_csv())?;
    }
    Ok(SeasonOutcome {
        ledgers: state.ledgers,
        report,
        alert_quantile: state.alert_quantile,
        alerts: state.alerts,
    })
}

fn step_day(config: &RunConfig, bundle: &DatasetBundle, state: &mut SeasonState, date: NaiveDate) -> Result<()> {
    let actuals = day_actuals(bundle, date, config.day_mode).map_err(|e| e.at("settle"))?;
    let tariff = &config.tariff;

    let bench = if config.policy.benchmark() {
        let alert = benchmark_alert(config, bundle, date, state.alert_quantile).map_err(|e| e.at("benchmark"))?;
        if alert {
            state.alerts.push(date);
        }
        Some(benchmark::benchmark_schedule(&config.benchmark.policy, alert, &config.battery))
    } else {
        None
    };

    if config.policy.optimizer() {
        let ledger = ledger_mut(&mut state.ledgers, OPTIMIZER).expect("optimizer ledger");
        let levels = RunningLevels::from_state(&ledger.state, date);
        let mut battery = config.battery;
        if config.carry_soc {
            battery.soc_init = state.soc.clamp(battery.soc_min, battery.soc_max);
        }
        let outcome = run_day(config, bundle, date, &levels, &battery).map_err(|e| e.at_day(date))?;
        ledger
            .settle(date, &outcome.schedule, &actuals, tariff, &battery)
            .map_err(|e| e.at("settle"))?;
        state.soc = outcome.schedule.soc.last().copied().unwrap_or(battery.soc_init);
        if config.artifacts.enabled {
            write_day_artifacts(config, &outcome, &battery, bench.as_ref())?;
        }
    }
    if let Some(b) = &bench {
        let ledger = ledger_mut(&mut state.ledgers, BENCHMARK).expect("benchmark ledger");
        ledger
            .settle(date, b, &actuals, tariff, &config.battery)
            .map_err(|e| e.at("settle"))?;
    }
    if let Some(ledger) = ledger_mut(&mut state.ledgers, IDLE) {
        let idle = Schedule::idle(actuals.mg_load.len(), &config.battery);
        ledger
            .settle(date, &idle, &actuals, tariff, &config.battery)
            .map_err(|e| e.at("settle"))?;
    }
    Ok(())
}

/// Rebuilds the season report from a run directory's `ledgers.json`.
pub fn report_from_dir(dir: &Path, tariff: &TariffConfig) -> Result<SeasonReport> {
    let path = dir.join("ledgers.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let ledgers: Vec<BillLedger> = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        detail: format!("{}: {e}", path.display()),
    })?;
    settle::season_report(&ledgers, tariff)
}
