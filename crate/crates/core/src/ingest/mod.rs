//! CSV series ingestion and the on-disk dataset bundle.
//!
//! Series files have the header `timestamp,entity,value`, timestamps in
//! RFC 3339 with an explicit offset, one row per hour and entity. A file
//! may hold several entities.
//!
//! A bundle is a directory:
//!
//! ```text
//! manifest.json   {"format": "cpdispatch-bundle", "version": 1, "coverage": [start, end], "files": {entity: file}}
//! <ENTITY>.csv    one series file per entity
//! truth.json      optional ground truth of a synthetic world
//! ```

pub mod synth;

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, Duration, FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DayMode, Entity, HourlySeries};

pub const BUNDLE_FORMAT: &str = "cpdispatch-bundle";
pub const BUNDLE_VERSION: u32 = 1;

/// Entities every bundle must hold.
pub const REQUIRED: [&str; 6] = [
    Entity::MA,
    Entity::MA_FORECAST,
    Entity::PS,
    Entity::MG,
    Entity::PV,
    Entity::SSRD,
];

#[derive(Debug, Deserialize)]
struct CsvRow {
    timestamp: String,
    entity: String,
    value: String,
}

/// Parses one series CSV into per-entity series.
pub fn read_series_csv(reader: impl Read) -> Result<Vec<HourlySeries>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            detail: e.to_string(),
        })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["timestamp", "entity", "value"] {
        return Err(Error::Parse {
            line: 1,
            detail: format!("expected header timestamp,entity,value, got {}", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut by_entity: BTreeMap<String, Vec<(DateTime<FixedOffset>, f64, usize)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            detail: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let row: CsvRow = rec.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line,
            detail: e.to_string(),
        })?;
        let ts = DateTime::parse_from_rfc3339(&row.timestamp).map_err(|e| Error::Parse {
            line,
            detail: format!("timestamp {:?}: {e}", row.timestamp),
        })?;
        let value: f64 = row.value.parse().map_err(|_| Error::Parse {
            line,
            detail: format!("value {:?} is not a number", row.value),
        })?;
        if row.entity.is_empty() {
            return Err(Error::Parse {
                line,
                detail: "empty entity".into(),
            });
        }
        by_entity.entry(row.entity).or_default().push((ts, value, line));
    }
    let mut out = Vec::new();
    for (entity, mut rows) in by_entity {
        rows.sort_by_key(|r| (r.0, r.2));
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Parse {
                line: w[1].2.max(w[0].2),
                detail: format!("duplicate {entity} timestamp {}", w[1].0.to_rfc3339()),
            });
        }
        let (ts, vals): (Vec<_>, Vec<_>) = rows.into_iter().map(|(t, v, _)| (t, v)).unzip();
        out.push(HourlySeries::new(Entity::new(entity), ts, vals)?);
    }
    Ok(out)
}

pub fn write_series_csv(series: &HourlySeries) -> String {
    let mut out = String::from("timestamp,entity,value\n");
    for (t, v) in series.timestamps().iter().zip(series.values()) {
        out.push_str(&format!("{},{},{}\n", t.to_rfc3339(), series.entity(), v));
    }
    out
}

/// The inputs of a backtest, all on one hourly grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    series: BTreeMap<String, HourlySeries>,
    /// First and last day every series covers completely.
    pub coverage: (NaiveDate, NaiveDate),
    pub day_mode: DayMode,
}

/// Days accepted only because lenient mode padded or merged a DST hour.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub adjusted_days: BTreeMap<String, Vec<NaiveDate>>,
}

impl GapSummary {
    pub fn is_empty(&self) -> bool {
        self.adjusted_days.values().all(Vec::is_empty)
    }
}

impl DatasetBundle {
    /// Validates that every required entity is present and complete over
    /// the common date range under `mode`.
    pub fn new(series: Vec<HourlySeries>, mode: DayMode) -> Result<(Self, GapSummary)> {
        let mut map = BTreeMap::new();
        for s in series {
            let name = s.entity().to_string();
            if map.insert(name.clone(), s).is_some() {
                return Err(Error::Config(format!("{name} supplied more than once")));
            }
        }
        for r in REQUIRED {
            if !map.contains_key(r) {
                return Err(Error::Config(format!("bundle is missing {r}")));
            }
        }
        let start = map
            .values()
            .filter_map(HourlySeries::first_date)
            .max()
            .ok_or_else(|| Error::gap("bundle", "no data"))?;
        let end = map
            .values()
            .filter_map(HourlySeries::last_date)
            .min()
            .ok_or_else(|| Error::gap("bundle", "no data"))?;
        if start > end {
            return Err(Error::gap("bundle", "series do not overlap"));
        }
        let mut gaps = GapSummary::default();
        for (name, s) in &map {
            let mut d = start;
            let mut bad = Vec::new();
            let mut first_err = None;
            while d <= end {
                match s.day_slice(d, mode) {
                    Err(e) => {
                        bad.push(d);
                        first_err.get_or_insert(e);
                    }
                    Ok(_) if mode == DayMode::Lenient && !s.has_full_day(d) => {
                        gaps.adjusted_days.entry(name.clone()).or_default().push(d);
                    }
                    Ok(_) => {}
                }
                d += Duration::days(1);
            }
            if let Some(e) = first_err {
                return Err(match e {
                    Error::Gap { entity, detail } => Error::gap(
                        entity,
                        format!("{detail} ({} incomplete day(s) in total)", bad.len()),
                    ),
                    e => e,
                });
            }
        }
        Ok((
            DatasetBundle {
                series: map,
                coverage: (start, end),
                day_mode: mode,
            },
            gaps,
        ))
    }

    pub fn get(&self, entity: &str) -> Option<&HourlySeries> {
        self.series.get(entity)
    }

    fn required(&self, entity: &str) -> &HourlySeries {
        &self.series[entity]
    }

    pub fn ma_actual(&self) -> &HourlySeries {
        self.required(Entity::MA)
    }

    pub fn ma_forecast(&self) -> &HourlySeries {
        self.required(Entity::MA_FORECAST)
    }

    pub fn ps_actual(&self) -> &HourlySeries {
        self.required(Entity::PS)
    }

    pub fn mg_load(&self) -> &HourlySeries {
        self.required(Entity::MG)
    }

    pub fn pv_actual(&self) -> &HourlySeries {
        self.required(Entity::PV)
    }

    pub fn ssrd_forecast(&self) -> &HourlySeries {
        self.required(Entity::SSRD)
    }

    pub fn price(&self) -> Option<&HourlySeries> {
        self.get(Entity::PRICE)
    }

    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    /// Every series restricted to dates up to and including `date`. Nothing
    /// computed from the copy can depend on later data.
    pub fn truncated_through(&self, date: NaiveDate) -> DatasetBundle {
        DatasetBundle {
            series: self
                .series
                .iter()
                .map(|(k, s)| (k.clone(), s.truncated_through(date)))
                .collect(),
            coverage: (self.coverage.0, self.coverage.1.min(date)),
            day_mode: self.day_mode,
        }
    }
}

/// Reads and validates the given series files.
pub fn load_bundle(paths: &[impl AsRef<Path>], mode: DayMode) -> Result<(DatasetBundle, GapSummary)> {
    let mut all = Vec::new();
    for p in paths {
        let f = fs::File::open(p).map_err(|e| Error::io(p, e))?;
        all.extend(read_series_csv(f).map_err(|e| annotate_path(e, p.as_ref()))?);
    }
    DatasetBundle::new(all, mode)
}

fn annotate_path(e: Error, p: &Path) -> Error {
    match e {
        Error::Parse { line, detail } => Error::Parse {
            line,
            detail: format!("{}: {detail}", p.display()),
        },
        e => e,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    coverage: (NaiveDate, NaiveDate),
    #[serde(default)]
    day_mode: DayMode,
    files: BTreeMap<String, String>,
}

/// Writes the bundle directory, replacing files of the same names.
pub fn save_bundle(bundle: &DatasetBundle, dir: &Path, truth: Option<&serde_json::Value>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = BTreeMap::new();
    for (name, s) in &bundle.series {
        let file = format!("{name}.csv");
        let path = dir.join(&file);
        fs::write(&path, write_series_csv(s)).map_err(|e| Error::io(&path, e))?;
        files.insert(name.clone(), file);
    }
    let manifest = Manifest {
        format: BUNDLE_FORMAT.into(),
        version: BUNDLE_VERSION,
        coverage: bundle.coverage,
        day_mode: bundle.day_mode,
        files,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    if let Some(t) = truth {
        let path = dir.join("truth.json");
        let text = serde_json::to_string_pretty(t).expect("json value serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Reads a bundle directory written by [`save_bundle`].
pub fn open_bundle(dir: &Path) -> Result<DatasetBundle> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        detail: format!("{}: {e}", path.display()),
    })?;
    if manifest.format != BUNDLE_FORMAT || manifest.version != BUNDLE_VERSION {
        return Err(Error::Config(format!(
            "{} is {} v{}, expected {BUNDLE_FORMAT} v{BUNDLE_VERSION}",
            path.display(),
            manifest.format,
            manifest.version
        )));
    }
    let paths: Vec<_> = manifest.files.values().map(|f| dir.join(f)).collect();
    let (bundle, _) = load_bundle(&paths, manifest.day_mode)?;
    Ok(bundle)
}

/// The optional `truth.json` of a bundle directory.
pub fn read_truth(dir: &Path) -> Result<Option<serde_json::Value>> {
    let path = dir.join("truth.json");
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map(Some).map_err(|e| Error::Parse {
        line: e.line(),
        detail: format!("{}: {e}", path.display()),
    })
}
