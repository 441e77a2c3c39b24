//! Raw source parsing and the unified hourly table.
//!
//! Every source is a headed CSV file. Column names are configurable through a
//! [`ColumnMap`]; the defaults are documented in `schemas/sources.toml` at the
//! repository root. Timestamps are naive local time at hour resolution.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HTAB_MAGIC: &[u8; 8] = b"HTAB0001";
const TIMESTAMP_FORMATS: [&str; 4] = [
    "%Y-%m-%d %H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%dT%H:%M:%S",
];

/// Maps logical field names to CSV header names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap(BTreeMap<String, String>);

impl ColumnMap {
    pub fn identity(fields: &[&str]) -> Self {
        ColumnMap(
            fields
                .iter()
                .map(|f| (f.to_string(), f.to_string()))
                .collect(),
        )
    }

    pub fn weather() -> Self {
        Self::identity(&["timestamp", "temp", "hum", "pnm", "wd", "ws"])
    }

    pub fn satellite() -> Self {
        Self::identity(&["timestamp", "irr1", "irr2", "irr3", "pre"])
    }

    pub fn demand() -> Self {
        Self::identity(&["timestamp", "demand"])
    }

    /// Overrides the header used for `field`.
    pub fn with(mut self, field: &str, header: &str) -> Self {
        self.0.insert(field.to_string(), header.to_string());
        self
    }

    pub fn header<'a>(&'a self, field: &'a str) -> &'a str {
        self.0.get(field).map(String::as_str).unwrap_or(field)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawWeatherRow {
    pub timestamp: NaiveDateTime,
    pub temp: Option<f64>,
    pub hum: Option<f64>,
    pub pnm: Option<f64>,
    pub wd: Option<f64>,
    pub ws: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawSatelliteRow {
    pub timestamp: NaiveDateTime,
    pub irr1: Option<f64>,
    pub irr2: Option<f64>,
    pub irr3: Option<f64>,
    pub pre: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawDemandRow {
    pub timestamp: NaiveDateTime,
    pub demand: Option<f64>,
}

/// Date → holiday flag, covering the whole data span.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CalendarTable {
    days: BTreeMap<NaiveDate, bool>,
}

impl CalendarTable {
    pub fn new(days: BTreeMap<NaiveDate, bool>) -> Self {
        CalendarTable { days }
    }

    pub fn is_holiday(&self, date: NaiveDate) -> Option<bool> {
        self.days.get(&date).copied()
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, bool)> + '_ {
        self.days.iter().map(|(d, h)| (*d, *h))
    }
}

/// Year → province population.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PopulationTable {
    years: BTreeMap<i32, f64>,
}

impl PopulationTable {
    pub fn new(years: BTreeMap<i32, f64>) -> Result<Self> {
        if let Some((y, p)) = years.iter().find(|(_, p)| p.is_nan() || **p <= 0.0) {
            return Err(Error::Data(format!(
                "population for {y} is not positive: {p}"
            )));
        }
        Ok(PopulationTable { years })
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.years.iter().map(|(y, p)| (*y, *p))
    }

    /// Population on `date`: each annual value is anchored at January 1 and
    /// values in between are linearly interpolated by day. Outside the
    /// covered years the nearest annual value is held.
    pub fn at(&self, date: NaiveDate) -> f64 {
        let year = date.year();
        let (Some((&first_y, &first_p)), Some((&last_y, &last_p))) =
            (self.years.first_key_value(), self.years.last_key_value())
        else {
            return f64::NAN;
        };
        if year < first_y {
            return first_p;
        }
        if year >= last_y {
            return last_p;
        }
        let (&y0, &p0) = self
            .years
            .range(..=year)
            .next_back()
            .expect("year >= first");
        let (&y1, &p1) = self.years.range(year + 1..).next().expect("year < last");
        let d0 = NaiveDate::from_ymd_opt(y0, 1, 1).expect("valid date");
        let d1 = NaiveDate::from_ymd_opt(y1, 1, 1).expect("valid date");
        let frac = (date - d0).num_days() as f64 / (d1 - d0).num_days() as f64;
        p0 + (p1 - p0) * frac
    }
}

/// Inclusive range of calendar days covered by a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
}

impl Span {
    pub fn new(first_day: NaiveDate, last_day: NaiveDate) -> Result<Self> {
        if last_day < first_day {
            return Err(Error::Config(format!(
                "span end {last_day} precedes start {first_day}"
            )));
        }
        Ok(Span {
            first_day,
            last_day,
        })
    }

    pub fn start(&self) -> NaiveDateTime {
        self.first_day.and_hms_opt(0, 0, 0).expect("midnight")
    }

    pub fn hours(&self) -> usize {
        ((self.last_day - self.first_day).num_days() as usize + 1) * 24
    }

    /// Row index of `ts` inside the span, if it lies on an hour within it.
    pub fn index_of(&self, ts: NaiveDateTime) -> Option<usize> {
        if ts.minute() != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
            return None;
        }
        let h = (ts - self.start()).num_hours();
        (h >= 0 && (h as usize) < self.hours()).then_some(h as usize)
    }
}

/// Columns of the unified table, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Field {
    Demand,
    Temp,
    Hum,
    Pnm,
    Wd,
    Ws,
    Irr1,
    Irr2,
    Irr3,
    Pre,
    Holiday,
    Population,
}

impl Field {
    pub const ALL: [Field; 12] = [
        Field::Demand,
        Field::Temp,
        Field::Hum,
        Field::Pnm,
        Field::Wd,
        Field::Ws,
        Field::Irr1,
        Field::Irr2,
        Field::Irr3,
        Field::Pre,
        Field::Holiday,
        Field::Population,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::Demand => "demand",
            Field::Temp => "temp",
            Field::Hum => "hum",
            Field::Pnm => "pnm",
            Field::Wd => "wd",
            Field::Ws => "ws",
            Field::Irr1 => "irr1",
            Field::Irr2 => "irr2",
            Field::Irr3 => "irr3",
            Field::Pre => "pre",
            Field::Holiday => "is_holiday",
            Field::Population => "population",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Field::Demand => "MW",
            Field::Temp => "degC",
            Field::Hum => "%",
            Field::Pnm => "hPa",
            Field::Wd => "deg",
            Field::Ws => "km/h",
            Field::Irr1 | Field::Irr2 | Field::Irr3 => "MJ/h",
            Field::Pre => "mm/h",
            Field::Holiday => "bool",
            Field::Population => "persons",
        }
    }

    pub fn from_name(name: &str) -> Option<Field> {
        Field::ALL.into_iter().find(|f| f.name() == name)
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// One row per hour over a contiguous span. Missing cells hold NaN and carry
/// a flag; flags survive later imputation so the table records what was
/// originally absent.
#[derive(Debug, Clone)]
pub struct HourlyTable {
    start: NaiveDateTime,
    values: Vec<Vec<f64>>,
    missing: Vec<Vec<bool>>,
}

impl PartialEq for HourlyTable {
    fn eq(&self, other: &Self) -> bool {
        self.start == other.start
            && self.missing == other.missing
            && self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

impl HourlyTable {
    /// A table of `rows` hours starting at `start` with every cell missing.
    pub fn empty(start: NaiveDateTime, rows: usize) -> Self {
        HourlyTable {
            start,
            values: vec![vec![f64::NAN; rows]; Field::ALL.len()],
            missing: vec![vec![true; rows]; Field::ALL.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn timestamp(&self, row: usize) -> NaiveDateTime {
        self.start + Duration::hours(row as i64)
    }

    pub fn timestamps(&self) -> Vec<NaiveDateTime> {
        (0..self.len()).map(|r| self.timestamp(r)).collect()
    }

    pub fn column(&self, field: Field) -> &[f64] {
        &self.values[field.index()]
    }

    pub fn missing(&self, field: Field) -> &[bool] {
        &self.missing[field.index()]
    }

    pub fn missing_count(&self, field: Field) -> usize {
        self.missing(field).iter().filter(|m| **m).count()
    }

    /// The column with NaN cells as `None`.
    pub fn series(&self, field: Field) -> Vec<Option<f64>> {
        self.column(field)
            .iter()
            .map(|v| v.is_finite().then_some(*v))
            .collect()
    }

    pub fn set(&mut self, field: Field, row: usize, value: Option<f64>) {
        match value {
            Some(v) if v.is_finite() => {
                self.values[field.index()][row] = v;
                self.missing[field.index()][row] = false;
            }
            _ => {
                self.values[field.index()][row] = f64::NAN;
                self.missing[field.index()][row] = true;
            }
        }
    }

    /// Replaces a column's values while keeping its missing flags.
    pub fn replace_values(&mut self, field: Field, values: Vec<f64>) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::Shape(format!(
                "column {} has {} rows, table has {}",
                field.name(),
                values.len(),
                self.len()
            )));
        }
        self.values[field.index()] = values;
        Ok(())
    }

    pub fn manifest(&self) -> TableManifest {
        TableManifest {
            format: String::from_utf8_lossy(HTAB_MAGIC).into_owned(),
            rows: self.len(),
            start: self.start,
            end: self.timestamp(self.len().saturating_sub(1)),
            columns: Field::ALL
                .iter()
                .map(|f| ColumnManifest {
                    name: f.name().to_string(),
                    unit: f.unit().to_string(),
                    missing: self.missing_count(*f),
                })
                .collect(),
        }
    }

    /// Writes the binary table to `path` and its manifest to `<path>.json`.
    pub fn persist(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
        write(HTAB_MAGIC)?;
        write(&(self.len() as u64).to_le_bytes())?;
        write(&(Field::ALL.len() as u64).to_le_bytes())?;
        write(&self.start.and_utc().timestamp().to_le_bytes())?;
        for f in Field::ALL {
            let name = f.name().as_bytes();
            write(&(name.len() as u16).to_le_bytes())?;
            write(name)?;
        }
        for col in &self.values {
            for v in col {
                write(&v.to_le_bytes())?;
            }
        }
        for col in &self.missing {
            let flags: Vec<u8> = col.iter().map(|m| u8::from(*m)).collect();
            write(&flags)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;

        let manifest_path = manifest_path(path);
        let json = serde_json::to_string_pretty(&self.manifest())
            .map_err(|e| Error::Format(e.to_string()))?;
        fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let mut r = ByteReader::new(&bytes);
        if r.take(8)? != HTAB_MAGIC {
            return Err(Error::Format(format!(
                "{} is not an HTAB0001 table (bad magic)",
                path.display()
            )));
        }
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        if cols != Field::ALL.len() {
            return Err(Error::Format(format!(
                "expected {} columns, found {cols}",
                Field::ALL.len()
            )));
        }
        let start = chrono::DateTime::from_timestamp(r.i64()?, 0)
            .ok_or_else(|| Error::Format("start timestamp out of range".into()))?
            .naive_utc();
        for f in Field::ALL {
            let len = r.u16()? as usize;
            let name = r.take(len)?;
            if name != f.name().as_bytes() {
                return Err(Error::Format(format!(
                    "column order mismatch: expected {}, found {}",
                    f.name(),
                    String::from_utf8_lossy(name)
                )));
            }
        }
        let mut values = Vec::with_capacity(cols);
        for _ in 0..cols {
            values.push((0..rows).map(|_| r.f64()).collect::<Result<Vec<_>>>()?);
        }
        let mut missing = Vec::with_capacity(cols);
        for _ in 0..cols {
            missing.push(r.take(rows)?.iter().map(|b| *b != 0).collect());
        }
        Ok(HourlyTable {
            start,
            values,
            missing,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnManifest {
    pub name: String,
    pub unit: String,
    pub missing: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableManifest {
    pub format: String,
    pub rows: usize,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub columns: Vec<ColumnManifest>,
}

/// `<path>.json`, the sidecar manifest of a binary artifact.
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn is_at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub(crate) fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
}

fn parse_cell(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a timestamped CSV into rows of optional values, one per requested
/// field. Rows come back sorted by timestamp.
fn parse_timestamped(
    path: &Path,
    map: &ColumnMap,
    fields: &[&str],
) -> Result<Vec<(NaiveDateTime, Vec<Option<f64>>)>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let position = |field: &str| -> Result<usize> {
        let header = map.header(field);
        headers.iter().position(|h| h == header).ok_or_else(|| {
            Error::Schema(format!(
                "{}: column '{header}' (field {field}) not found; header is [{}]",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })
    };
    let ts_col = position("timestamp")?;
    let cols = fields
        .iter()
        .map(|f| position(f))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = i + 1;
        let raw_ts = record.get(ts_col).unwrap_or("");
        let ts = parse_timestamp(raw_ts).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            row,
            message: format!("malformed timestamp '{raw_ts}'"),
        })?;
        let values = cols
            .iter()
            .map(|c| record.get(*c).and_then(parse_cell))
            .collect();
        rows.push((ts, values));
    }
    rows.sort_by_key(|(ts, _)| *ts);
    Ok(rows)
}

pub fn parse_weather_csv(path: &Path, schema: &ColumnMap) -> Result<Vec<RawWeatherRow>> {
    let rows = parse_timestamped(path, schema, &["temp", "hum", "pnm", "wd", "ws"])?;
    Ok(rows
        .into_iter()
        .map(|(timestamp, v)| RawWeatherRow {
            timestamp,
            temp: v[0],
            hum: v[1],
            pnm: v[2],
            // out-of-range directions are unusable, not wrappable
            wd: v[3].filter(|d| (0.0..=360.0).contains(d)),
            ws: v[4],
        })
        .collect())
}

pub fn parse_satellite_csv(path: &Path, schema: &ColumnMap) -> Result<Vec<RawSatelliteRow>> {
    let rows = parse_timestamped(path, schema, &["irr1", "irr2", "irr3", "pre"])?;
    Ok(rows
        .into_iter()
        .map(|(timestamp, v)| RawSatelliteRow {
            timestamp,
            irr1: v[0],
            irr2: v[1],
            irr3: v[2],
            pre: v[3],
        })
        .collect())
}

pub fn parse_demand_csv(path: &Path, schema: &ColumnMap) -> Result<Vec<RawDemandRow>> {
    let rows = parse_timestamped(path, schema, &["demand"])?;
    Ok(rows
        .into_iter()
        .map(|(timestamp, v)| {
            let demand = v[0].filter(|d| {
                let ok = *d > 0.0;
                if !ok {
                    log::warn!("non-positive demand {d} at {timestamp} treated as missing");
                }
                ok
            });
            RawDemandRow { timestamp, demand }
        })
        .collect())
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Some(true),
        "0" | "false" | "no" | "n" => Some(false),
        _ => None,
    }
}

/// Calendar CSV with columns `date` (YYYY-MM-DD) and `is_holiday` (0/1).
pub fn parse_calendar_csv(path: &Path) -> Result<CalendarTable> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("{}: missing column '{name}'", path.display())))
    };
    let (date_col, flag_col) = (col("date")?, col("is_holiday")?);
    let mut days = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            row: i + 1,
            message,
        };
        let raw_date = record.get(date_col).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
            .map_err(|_| parse_err(format!("malformed date '{raw_date}'")))?;
        let raw_flag = record.get(flag_col).unwrap_or("");
        let flag = parse_bool(raw_flag)
            .ok_or_else(|| parse_err(format!("malformed holiday flag '{raw_flag}'")))?;
        if days.insert(date, flag).is_some() {
            return Err(parse_err(format!("duplicate date {date}")));
        }
    }
    Ok(CalendarTable::new(days))
}

/// Population CSV with columns `year` and `population`.
pub fn parse_population_csv(path: &Path) -> Result<PopulationTable> {
    #[derive(Deserialize)]
    struct Row {
        year: i32,
        population: f64,
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    let mut years = BTreeMap::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: i + 1,
            message: e.to_string(),
        })?;
        years.insert(row.year, row.population);
    }
    PopulationTable::new(years)
}

/// Places timestamped rows into span indices, rejecting duplicates and
/// off-hour timestamps. Rows outside the span are skipped.
fn index_rows<T>(
    source: &str,
    span: &Span,
    rows: impl IntoIterator<Item = (NaiveDateTime, T)>,
) -> Result<HashMap<usize, T>> {
    let mut out = HashMap::new();
    let (first, last) = (
        span.start(),
        span.start() + Duration::hours(span.hours() as i64),
    );
    for (ts, value) in rows {
        if ts < first || ts >= last {
            continue;
        }
        let idx = span
            .index_of(ts)
            .ok_or_else(|| Error::Data(format!("{source}: timestamp {ts} is not on the hour")))?;
        if out.insert(idx, value).is_some() {
            return Err(Error::Data(format!("{source}: duplicate timestamp {ts}")));
        }
    }
    Ok(out)
}

/// Joins all sources on the hourly grid of `span`.
///
/// Weather and satellite hours absent from their files become missing cells.
/// Every span hour must have a demand record, every span day a calendar
/// entry, and every span year a population value.
pub fn merge_sources(
    weather: &[RawWeatherRow],
    satellite: &[RawSatelliteRow],
    demand: &[RawDemandRow],
    calendar: &CalendarTable,
    population: &PopulationTable,
    span: Span,
) -> Result<HourlyTable> {
    let n = span.hours();
    let mut table = HourlyTable::empty(span.start(), n);

    let demand_idx = index_rows(
        "demand",
        &span,
        demand.iter().map(|r| (r.timestamp, r.demand)),
    )?;
    if demand_idx.len() != n {
        let absent: Vec<_> = (0..n)
            .filter(|i| !demand_idx.contains_key(i))
            .take(5)
            .map(|i| table.timestamp(i).to_string())
            .collect();
        return Err(Error::Data(format!(
            "demand has no record for {} span hour(s), first: {}",
            n - demand_idx.len(),
            absent.join(", ")
        )));
    }
    for (i, d) in demand_idx {
        table.set(Field::Demand, i, d);
    }

    let weather_idx = index_rows("weather", &span, weather.iter().map(|r| (r.timestamp, *r)))?;
    for (i, r) in weather_idx {
        table.set(Field::Temp, i, r.temp);
        table.set(Field::Hum, i, r.hum);
        table.set(Field::Pnm, i, r.pnm);
        table.set(Field::Wd, i, r.wd);
        table.set(Field::Ws, i, r.ws);
    }
    let sat_idx = index_rows(
        "satellite",
        &span,
        satellite.iter().map(|r| (r.timestamp, *r)),
    )?;
    for (i, r) in sat_idx {
        table.set(Field::Irr1, i, r.irr1);
        table.set(Field::Irr2, i, r.irr2);
        table.set(Field::Irr3, i, r.irr3);
        table.set(Field::Pre, i, r.pre);
    }

    for year in span.first_day.year()..=span.last_day.year() {
        if !population.years.contains_key(&year) {
            return Err(Error::Data(format!(
                "population table has no value for {year}"
            )));
        }
    }
    let mut day = span.first_day;
    let mut row = 0;
    while day <= span.last_day {
        let holiday = calendar
            .is_holiday(day)
            .ok_or_else(|| Error::Data(format!("calendar has no entry for {day}")))?;
        let pop = population.at(day);
        for _ in 0..24 {
            table.set(Field::Holiday, row, Some(f64::from(u8::from(holiday))));
            table.set(Field::Population, row, Some(pop));
            row += 1;
        }
        day = day.succ_opt().expect("date in range");
    }
    Ok(table)
}

/// Paths of the five raw sources.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourcePaths {
    pub weather: PathBuf,
    pub satellite: PathBuf,
    pub demand: PathBuf,
    pub calendar: PathBuf,
    pub population: PathBuf,
}

impl SourcePaths {
    /// The standard file names inside one directory.
    pub fn in_dir(dir: &Path) -> Self {
        SourcePaths {
            weather: dir.join("weather.csv"),
            satellite: dir.join("satellite.csv"),
            demand: dir.join("demand.csv"),
            calendar: dir.join("calendar.csv"),
            population: dir.join("population.csv"),
        }
    }
}

/// Header names for the three time-series sources.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceSchema {
    pub weather: ColumnMap,
    pub satellite: ColumnMap,
    pub demand: ColumnMap,
}

impl Default for SourceSchema {
    fn default() -> Self {
        SourceSchema {
            weather: ColumnMap::weather(),
            satellite: ColumnMap::satellite(),
            demand: ColumnMap::demand(),
        }
    }
}

/// Parses every source with the default headers and merges them over `span`.
pub fn ingest(paths: &SourcePaths, span: Span) -> Result<HourlyTable> {
    ingest_with(paths, span, &SourceSchema::default())
}

/// Parses every source (in parallel) and merges them over `span`.
pub fn ingest_with(paths: &SourcePaths, span: Span, schema: &SourceSchema) -> Result<HourlyTable> {
    let ((weather, satellite), (demand, (calendar, population))) = rayon::join(
        || {
            rayon::join(
                || parse_weather_csv(&paths.weather, &schema.weather),
                || parse_satellite_csv(&paths.satellite, &schema.satellite),
            )
        },
        || {
            rayon::join(
                || parse_demand_csv(&paths.demand, &schema.demand),
                || {
                    (
                        parse_calendar_csv(&paths.calendar),
                        parse_population_csv(&paths.population),
                    )
                },
            )
        },
    );
    merge_sources(
        &weather?,
        &satellite?,
        &demand?,
        &calendar?,
        &population?,
        span,
    )
}
