use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{Duration, NaiveDate};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cpdispatch::benchmark;
use cpdispatch::ingest::{self, synth};
use cpdispatch::model::{DayMode, Entity};
use cpdispatch::peakprob;
use cpdispatch::pipeline::{self, AlertMode, PolicySelection, RunConfig, RunningLevels};
use cpdispatch::pvforecast;
use cpdispatch::settle::{self, BillLedger, CpAttribution, SettleModes};
use cpdispatch::{Error, Result};

#[derive(Parser)]
#[command(name = "cpdispatch", version, about = "Day-ahead battery dispatch under peak charges")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate series CSVs and write a bundle directory.
    Ingest(IngestArgs),
    /// Generate a synthetic bundle.
    Synth {
        /// JSON world spec; defaults are used when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the PV model on data before a date.
    Pvfit {
        #[command(flatten)]
        bundle: BundleArg,
        #[arg(long)]
        as_of: NaiveDate,
        #[arg(long)]
        drop_zero_pv_above_ssrd: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw one day's scenarios.
    Scengen {
        #[command(flatten)]
        bundle: BundleArg,
        #[arg(long)]
        date: NaiveDate,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Peak probabilities of one entity's scenarios.
    Peakprob {
        #[arg(long)]
        scen: PathBuf,
        #[arg(long)]
        date: NaiveDate,
        #[arg(long, default_value = Entity::PS)]
        entity: String,
        /// Level to beat; omit when nothing has been observed yet.
        #[arg(long)]
        running_max: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the optimizer pipeline for one day.
    Optimize {
        #[command(flatten)]
        bundle: BundleArg,
        #[arg(long)]
        date: NaiveDate,
    },
    /// The rule-based schedule of one day.
    Benchmark {
        #[command(flatten)]
        bundle: BundleArg,
        #[arg(long)]
        date: NaiveDate,
        #[arg(long, value_enum, default_value_t = AlertArg::Auto)]
        alert: AlertArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Settle a run directory's schedules chronologically.
    Settle {
        #[command(flatten)]
        bundle: BundleArg,
        /// Directory holding `runs/<date>/<file>`.
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long, default_value = "schedule.csv")]
        file: String,
        #[arg(long, default_value = "optimizer")]
        policy: String,
    },
    /// Run the seasonal backtest.
    Backtest {
        #[command(flatten)]
        bundle: BundleArg,
        #[arg(long)]
        start: Option<NaiveDate>,
        #[arg(long)]
        end: Option<NaiveDate>,
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Rebuild the season report from a finished backtest.
    Report {
        /// Backtest output directory; defaults to --out-dir.
        #[arg(long)]
        run_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    ma: PathBuf,
    #[arg(long)]
    ma_fcst: PathBuf,
    #[arg(long)]
    ps: PathBuf,
    #[arg(long)]
    mg: PathBuf,
    #[arg(long)]
    pv: PathBuf,
    #[arg(long)]
    ssrd: PathBuf,
    #[arg(long)]
    price: Option<PathBuf>,
    /// Accept DST days with 23 or 25 hours.
    #[arg(long)]
    lenient: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BundleArg {
    /// Bundle directory; overrides the config.
    #[arg(long)]
    bundle: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlertArg {
    Auto,
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Optimizer,
    Benchmark,
    Both,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(4) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(d) = &cli.out_dir {
        config.out_dir = d.clone();
    }
    Ok(config)
}

fn with_bundle(mut config: RunConfig, arg: &BundleArg) -> Result<(RunConfig, ingest::DatasetBundle)> {
    if let Some(b) = &arg.bundle {
        config.bundle = Some(b.clone());
    }
    config.validate()?;
    let bundle = config.open_bundle()?;
    Ok((config, bundle))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("output serializes") + "\n"
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli)?;
    match &cli.command {
        Command::Ingest(a) => {
            let mut paths = vec![&a.ma, &a.ma_fcst, &a.ps, &a.mg, &a.pv, &a.ssrd];
            paths.extend(a.price.as_ref());
            let mode = if a.lenient { DayMode::Lenient } else { DayMode::Strict };
            let (bundle, gaps) = ingest::load_bundle(&paths, mode)?;
            for (entity, days) in &gaps.adjusted_days {
                log::warn!("{entity}: {} DST-adjusted day(s)", days.len());
            }
            ingest::save_bundle(&bundle, &a.out, None)?;
            println!("bundle {} covers {} to {}", a.out.display(), bundle.coverage.0, bundle.coverage.1);
        }
        Command::Synth { spec, out } => {
            let mut spec = match spec {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    serde_json::from_str(&text).map_err(|e| Error::Spec(format!("{}: {e}", p.display())))?
                }
                None => synth::SynthWorldSpec::default(),
            };
            if let Some(s) = cli.seed {
                spec.seed = s;
            }
            let (bundle, truth) = synth::generate_synth_world(&spec)?;
            let truth = serde_json::to_value(&truth).expect("truth serializes");
            ingest::save_bundle(&bundle, out, Some(&truth))?;
            println!("bundle {} covers {} to {}", out.display(), bundle.coverage.0, bundle.coverage.1);
        }
        Command::Pvfit {
            bundle,
            as_of,
            drop_zero_pv_above_ssrd,
            out,
        } => {
            let (config, bundle) = with_bundle(config, bundle)?;
            let mut opts = config.pv;
            if drop_zero_pv_above_ssrd.is_some() {
                opts.drop_zero_pv_above_ssrd = *drop_zero_pv_above_ssrd;
            }
            let history = bundle.truncated_through(*as_of - Duration::days(1));
            let model = pvforecast::fit_pv(history.ssrd_forecast(), history.pv_actual(), *as_of, &opts)?;
            write(out, &json(&model))?;
        }
        Command::Scengen { bundle, date, n, out } => {
            let (mut config, bundle) = with_bundle(config, bundle)?;
            if let Some(n) = n {
                config.n_scenarios = *n;
            }
            config.validate()?;
            let levels = RunningLevels::from_history(&bundle, *date, &config.tariff);
            let (_, scen, _) = pipeline::day_inputs(&config, &bundle, *date, &levels)?;
            write(out, &pipeline::scenarios_csv(&[&scen.ma, &scen.ps, &scen.mg, &scen.mg_net]))?;
        }
        Command::Peakprob {
            scen,
            date,
            entity,
            running_max,
            out,
        } => {
            let text = fs::read_to_string(scen).map_err(|e| Error::io(scen, e))?;
            let set = pipeline::read_scenarios_csv(&text, entity, *date)?;
            let p = peakprob::peak_probabilities(&set, running_max.unwrap_or(f64::NEG_INFINITY))?;
            write(out, &json(&p))?;
        }
        Command::Optimize { bundle, date } => {
            let (config, bundle) = with_bundle(config, bundle)?;
            let levels = RunningLevels::from_history(&bundle, *date, &config.tariff);
            let outcome = pipeline::run_day(&config, &bundle, *date, &levels, &config.battery)?;
            let dir = pipeline::write_day_artifacts(&config, &outcome, &config.battery, None)?;
            write(&dir.join("pnl.json"), &json(&outcome.actual_pnl))?;
            println!(
                "{date}: objective {:.2}, expected P&L {:.2}, artifacts in {}",
                outcome.objective,
                outcome.actual_pnl.total,
                dir.display()
            );
        }
        Command::Benchmark {
            bundle,
            date,
            alert,
            out,
        } => {
            let (mut config, bundle) = with_bundle(config, bundle)?;
            config.benchmark.alert = match alert {
                AlertArg::Auto => AlertMode::Auto,
                AlertArg::On => AlertMode::On,
                AlertArg::Off => AlertMode::Off,
            };
            let (q, _) = pipeline::alert_quantile(&config, &bundle)?;
            let fired = pipeline::benchmark_alert(&config, &bundle, *date, q)?;
            let sched = benchmark::benchmark_schedule(&config.benchmark.policy, fired, &config.battery);
            write(out, &pipeline::schedule_csv(&sched, &config.battery))?;
            println!("{date}: alert {}", if fired { "on" } else { "off" });
        }
        Command::Settle {
            bundle,
            run_dir,
            file,
            policy,
        } => {
            let (config, bundle) = with_bundle(config, bundle)?;
            let runs = run_dir.join("runs");
            let mut dates: Vec<NaiveDate> = fs::read_dir(&runs)
                .map_err(|e| Error::io(&runs, e))?
                .filter_map(|e| e.ok())
                .filter_map(|e| e.file_name().to_str().and_then(|s| s.parse().ok()))
                .filter(|d: &NaiveDate| runs.join(d.to_string()).join(file).exists())
                .collect();
            dates.sort();
            let first = *dates
                .first()
                .ok_or_else(|| Error::gap("schedules", format!("no {file} under {}", runs.display())))?;
            let attribution = match config.settle.attribution {
                pipeline::AttributionMode::ExPost => CpAttribution::ExPost(settle::season_peaks(
                    bundle.ps_actual(),
                    Some(bundle.ma_actual()),
                    &config.tariff.cp_season,
                    chrono::Datelike::year(&first),
                )),
                pipeline::AttributionMode::Running => CpAttribution::Running,
            };
            let mut ledger = BillLedger::new(
                policy.clone(),
                SettleModes {
                    accounting: config.settle.accounting,
                    attribution,
                },
            );
            for d in dates {
                let path = runs.join(d.to_string()).join(file);
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let sched = pipeline::read_schedule_csv(&text, &config.battery)?;
                let actuals = pipeline::day_actuals(&bundle, d, config.day_mode)?;
                ledger.settle(d, &sched, &actuals, &config.tariff, &config.battery)?;
            }
            let out = &config.out_dir;
            write(&out.join(format!("daily_{policy}.csv")), &ledger.daily_csv())?;
            write(&out.join(format!("ledger_{policy}.json")), &json(&ledger))?;
            let report = settle::season_report(std::slice::from_ref(&ledger), &config.tariff)?;
            print!("{}", report.to_table());
        }
        Command::Backtest {
            bundle,
            start,
            end,
            policy,
            n,
        } => {
            let (mut config, bundle) = with_bundle(config, bundle)?;
            if start.is_some() {
                config.start = *start;
            }
            if end.is_some() {
                config.end = *end;
            }
            if let Some(n) = n {
                config.n_scenarios = *n;
            }
            if let Some(p) = policy {
                config.policy = match p {
                    PolicyArg::Optimizer => PolicySelection::Optimizer,
                    PolicyArg::Benchmark => PolicySelection::Benchmark,
                    PolicyArg::Both => PolicySelection::Both,
                };
            }
            let outcome = pipeline::run_season(&config, &bundle, None)?;
            print!("{}", outcome.report.to_table());
        }
        Command::Report { run_dir } => {
            let dir = run_dir.clone().unwrap_or_else(|| config.out_dir.clone());
            let report = pipeline::report_from_dir(&dir, &config.tariff)?;
            write(&dir.join("report.csv"), &report.to_csv())?;
            write(&dir.join("report.txt"), &report.to_table())?;
            print!("{}", report.to_table());
        }
    }
    Ok(())
}
