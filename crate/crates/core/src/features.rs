//! Model-ready dataset construction: periodic time encodings, the workday
//! flag, min-max normalization fit on the training split, and 24-hour
//! sliding windows with one-hour-ahead targets.

use std::f64::consts::TAU;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{manifest_path, ByteReader, CalendarTable, Field, HourlyTable};
use crate::preprocess::decompose_wind;

pub const T_DAY: f64 = 24.0;
pub const T_WEEK: f64 = 168.0;
/// Julian year in hours (365.25 days).
pub const T_YEAR: f64 = 8_766.0;
pub const WINDOW: usize = 24;
pub const WDST_MAGIC: &[u8; 8] = b"WDST0001";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeEncoding {
    pub day_sin: f64,
    pub day_cos: f64,
    pub week_sin: f64,
    pub week_cos: f64,
    pub year_sin: f64,
    pub year_cos: f64,
}

/// Sine/cosine encodings of `t` hours since the series start.
pub fn encode_time(t: f64) -> TimeEncoding {
    let (day_sin, day_cos) = (TAU * t / T_DAY).sin_cos();
    let (week_sin, week_cos) = (TAU * t / T_WEEK).sin_cos();
    let (year_sin, year_cos) = (TAU * t / T_YEAR).sin_cos();
    TimeEncoding {
        day_sin,
        day_cos,
        week_sin,
        week_cos,
        year_sin,
        year_cos,
    }
}

fn is_workday(date: NaiveDate, holiday: bool) -> bool {
    !holiday && !matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

/// 1 for Monday–Friday days that are not holidays, else 0.
pub fn workday_flag(date: NaiveDate, calendar: &CalendarTable) -> Result<u8> {
    let holiday = calendar
        .is_holiday(date)
        .ok_or_else(|| Error::Data(format!("{date} is outside the calendar")))?;
    Ok(u8::from(is_workday(date, holiday)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Temp,
    Hum,
    Pnm,
    UWind,
    VWind,
    Irr1,
    Irr2,
    Irr3,
    Pre,
    Population,
    Workday,
    DaySin,
    DayCos,
    WeekSin,
    WeekCos,
    YearSin,
    YearCos,
    /// Demand observed at the row's own hour; the last window row therefore
    /// holds the demand one hour before the target.
    DemandLag,
}

impl Feature {
    pub fn name(self) -> &'static str {
        match self {
            Feature::Temp => "temp",
            Feature::Hum => "hum",
            Feature::Pnm => "pnm",
            Feature::UWind => "u_wind",
            Feature::VWind => "v_wind",
            Feature::Irr1 => "irr1",
            Feature::Irr2 => "irr2",
            Feature::Irr3 => "irr3",
            Feature::Pre => "pre",
            Feature::Population => "population",
            Feature::Workday => "workday",
            Feature::DaySin => "day_sin",
            Feature::DayCos => "day_cos",
            Feature::WeekSin => "week_sin",
            Feature::WeekCos => "week_cos",
            Feature::YearSin => "year_sin",
            Feature::YearCos => "year_cos",
            Feature::DemandLag => "demand_lag",
        }
    }
}

const FULL: [Feature; 18] = [
    Feature::Temp,
    Feature::Hum,
    Feature::Pnm,
    Feature::UWind,
    Feature::VWind,
    Feature::Irr1,
    Feature::Irr2,
    Feature::Irr3,
    Feature::Pre,
    Feature::Population,
    Feature::Workday,
    Feature::DaySin,
    Feature::DayCos,
    Feature::WeekSin,
    Feature::WeekCos,
    Feature::YearSin,
    Feature::YearCos,
    Feature::DemandLag,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSet {
    /// All 18 features.
    #[default]
    Full,
    /// The 14-wide input: full set without the satellite irradiances and
    /// precipitation.
    PaperTable2,
}

impl FeatureSet {
    pub fn features(self) -> Vec<Feature> {
        match self {
            FeatureSet::Full => FULL.to_vec(),
            FeatureSet::PaperTable2 => FULL
                .into_iter()
                .filter(|f| {
                    !matches!(
                        f,
                        Feature::Irr1 | Feature::Irr2 | Feature::Irr3 | Feature::Pre
                    )
                })
                .collect(),
        }
    }

    pub fn width(self) -> usize {
        self.features().len()
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(FeatureSet::Full),
            "paper-table2" => Ok(FeatureSet::PaperTable2),
            other => Err(Error::Config(format!(
                "unknown feature set '{other}' (expected full | paper-table2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Accounting {
    /// Every hour with a full history is a sample: `N - window`.
    #[default]
    Default,
    /// Also drops the final 24 hours, giving `N - 48` samples.
    Paper,
}

impl Accounting {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Accounting::Default),
            "paper" => Ok(Accounting::Paper),
            other => Err(Error::Config(format!(
                "unknown accounting '{other}' (expected default | paper)"
            ))),
        }
    }
}

/// Feature values for one table row, unnormalized, in `features` order.
fn raw_row(
    table: &HourlyTable,
    row: usize,
    features: &[Feature],
    out: &mut Vec<f64>,
) -> Result<()> {
    let get = |field: Field| -> Result<f64> {
        let v = table.column(field)[row];
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Data(format!(
                "{} is missing at {}; run preprocess first",
                field.name(),
                table.timestamp(row)
            )))
        }
    };
    let enc = encode_time(row as f64);
    let ts = table.timestamp(row);
    let mut wind = None;
    for f in features {
        let v = match f {
            Feature::Temp => get(Field::Temp)?,
            Feature::Hum => get(Field::Hum)?,
            Feature::Pnm => get(Field::Pnm)?,
            Feature::UWind | Feature::VWind => {
                let w = match wind {
                    Some(w) => w,
                    None => *wind.insert(decompose_wind(get(Field::Wd)?, get(Field::Ws)?)),
                };
                if *f == Feature::UWind {
                    w.u
                } else {
                    w.v
                }
            }
            Feature::Irr1 => get(Field::Irr1)?,
            Feature::Irr2 => get(Field::Irr2)?,
            Feature::Irr3 => get(Field::Irr3)?,
            Feature::Pre => get(Field::Pre)?,
            Feature::Population => get(Field::Population)?,
            Feature::Workday => {
                f64::from(u8::from(is_workday(ts.date(), get(Field::Holiday)? != 0.0)))
            }
            Feature::DaySin => enc.day_sin,
            Feature::DayCos => enc.day_cos,
            Feature::WeekSin => enc.week_sin,
            Feature::WeekCos => enc.week_cos,
            Feature::YearSin => enc.year_sin,
            Feature::YearCos => enc.year_cos,
            Feature::DemandLag => get(Field::Demand)?,
        };
        out.push(v);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    fn fit(values: impl Iterator<Item = f64>) -> Self {
        values.fold(
            MinMax {
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            },
            |acc, v| MinMax {
                min: acc.min.min(v),
                max: acc.max.max(v),
            },
        )
    }

    /// Maps into `[0, 1]` on the fitted range; a constant range maps to 0.
    pub fn apply(&self, x: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            (x - self.min) / span
        } else {
            0.0
        }
    }

    pub fn invert(&self, x: f64) -> f64 {
        self.min + x * (self.max - self.min)
    }
}

/// Per-feature and target min/max, fit on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub features: Vec<MinMax>,
    pub target: MinMax,
}

impl NormalizationSpec {
    /// Fits on row-major `rows` of width `width` and the matching `target`.
    pub fn fit(rows: &[f64], width: usize, target: &[f64]) -> Self {
        let features = (0..width)
            .map(|j| MinMax::fit(rows.iter().skip(j).step_by(width).copied()))
            .collect::<Vec<_>>();
        for (j, mm) in features.iter().enumerate() {
            if mm.max <= mm.min {
                log::warn!("feature column {j} is constant on the training split; mapped to 0");
            }
        }
        NormalizationSpec {
            features,
            target: MinMax::fit(target.iter().copied()),
        }
    }

    pub fn apply(&self, rows: &mut [f64]) {
        let width = self.features.len();
        for row in rows.chunks_mut(width) {
            for (x, mm) in row.iter_mut().zip(&self.features) {
                *x = mm.apply(*x);
            }
        }
    }

    pub fn invert(&self, rows: &mut [f64]) {
        let width = self.features.len();
        for row in rows.chunks_mut(width) {
            for (x, mm) in row.iter_mut().zip(&self.features) {
                *x = mm.invert(*x);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl SplitTag {
    pub const ALL: [SplitTag; 3] = [SplitTag::Train, SplitTag::Val, SplitTag::Test];

    pub fn name(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        }
    }
}

/// Target-row ranges of the three splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl SplitPlan {
    pub fn range(&self, tag: SplitTag) -> Range<usize> {
        match tag {
            SplitTag::Train => self.train.clone(),
            SplitTag::Val => self.val.clone(),
            SplitTag::Test => self.test.clone(),
        }
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

/// Assigns target rows to splits sequentially: validation and test each get
/// `floor(ratio · samples)`, training the remainder.
pub fn plan_split(
    rows: usize,
    window: usize,
    val_ratio: f64,
    test_ratio: f64,
    accounting: Accounting,
) -> Result<SplitPlan> {
    let usable_rows = match accounting {
        Accounting::Default => rows,
        Accounting::Paper => rows.saturating_sub(24),
    };
    if usable_rows <= window {
        return Err(Error::Data(format!(
            "table of {rows} rows is too short for {window}-hour windows"
        )));
    }
    let samples = usable_rows - window;
    let n_val = (val_ratio * samples as f64).floor() as usize;
    let n_test = (test_ratio * samples as f64).floor() as usize;
    let n_train = samples
        .checked_sub(n_val + n_test)
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config("split ratios leave no training samples".into()))?;
    let t0 = window;
    Ok(SplitPlan {
        train: t0..t0 + n_train,
        val: t0 + n_train..t0 + n_train + n_val,
        test: t0 + n_train + n_val..t0 + samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub feature_set: FeatureSet,
    pub accounting: Accounting,
    pub window: usize,
    pub val_ratio: f64,
    pub test_ratio: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            feature_set: FeatureSet::Full,
            accounting: Accounting::Default,
            window: WINDOW,
            val_ratio: 0.1,
            test_ratio: 0.1,
        }
    }
}

/// The normalized per-hour feature matrix shared by all splits.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub features: Vec<Feature>,
    /// Row-major `rows × width`, normalized.
    pub rows: Vec<f64>,
    /// Normalized demand per row.
    pub target: Vec<f64>,
    /// Demand in MW per row.
    pub demand: Vec<f64>,
    pub timestamps: Vec<NaiveDateTime>,
    pub holiday: Vec<bool>,
}

impl FeatureMatrix {
    pub fn width(&self) -> usize {
        self.features.len()
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.width();
        &self.rows[r * w..(r + 1) * w]
    }
}

/// Features, normalization and split plan: everything `train` consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub matrix: Arc<FeatureMatrix>,
    pub norm: NormalizationSpec,
    pub plan: SplitPlan,
}

/// Samples of one split. Window `k` is the `window` rows preceding its target
/// row, stored contiguously.
#[derive(Debug, Clone)]
pub struct WindowedDataset {
    pub matrix: Arc<FeatureMatrix>,
    pub window: usize,
    pub targets: Range<usize>,
    pub tag: SplitTag,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn width(&self) -> usize {
        self.matrix.width()
    }

    pub fn target_row(&self, k: usize) -> usize {
        self.targets.start + k
    }

    /// `window × width` row-major slice.
    pub fn window(&self, k: usize) -> &[f64] {
        let t = self.target_row(k);
        let w = self.matrix.width();
        &self.matrix.rows[(t - self.window) * w..t * w]
    }

    pub fn target(&self, k: usize) -> f64 {
        self.matrix.target[self.target_row(k)]
    }

    pub fn targets_normalized(&self) -> &[f64] {
        &self.matrix.target[self.targets.clone()]
    }

    pub fn demand_mw(&self) -> &[f64] {
        &self.matrix.demand[self.targets.clone()]
    }

    pub fn timestamp(&self, k: usize) -> NaiveDateTime {
        self.matrix.timestamps[self.target_row(k)]
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.matrix.timestamps[self.targets.clone()]
    }

    pub fn holidays(&self) -> &[bool] {
        &self.matrix.holiday[self.targets.clone()]
    }
}

impl Dataset {
    /// Builds features from a cleaned table, fits normalization on the rows
    /// that training samples touch, and plans the split.
    pub fn build(table: &HourlyTable, config: DatasetConfig) -> Result<Self> {
        let features = config.feature_set.features();
        let width = features.len();
        let n = table.len();
        let plan = plan_split(
            n,
            config.window,
            config.val_ratio,
            config.test_ratio,
            config.accounting,
        )?;

        let mut rows = Vec::with_capacity(n * width);
        for r in 0..n {
            raw_row(table, r, &features, &mut rows)?;
        }
        let demand = table.column(Field::Demand).to_vec();
        let holiday = table
            .column(Field::Holiday)
            .iter()
            .map(|h| *h != 0.0)
            .collect();

        // training windows and targets cover rows 0..train.end
        let fit_rows = plan.train.end;
        let norm = NormalizationSpec::fit(&rows[..fit_rows * width], width, &demand[..fit_rows]);
        norm.apply(&mut rows);
        let target = demand.iter().map(|d| norm.target.apply(*d)).collect();

        Ok(Dataset {
            config,
            matrix: Arc::new(FeatureMatrix {
                features,
                rows,
                target,
                demand,
                timestamps: table.timestamps(),
                holiday,
            }),
            norm,
            plan,
        })
    }

    pub fn split(&self, tag: SplitTag) -> WindowedDataset {
        WindowedDataset {
            matrix: Arc::clone(&self.matrix),
            window: self.config.window,
            targets: self.plan.range(tag),
            tag,
        }
    }

    pub fn width(&self) -> usize {
        self.matrix.width()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.matrix
            .features
            .iter()
            .map(|f| f.name().to_string())
            .collect()
    }

    pub fn manifest(&self) -> DatasetManifest {
        let (train, val, test) = self.plan.counts();
        DatasetManifest {
            format: String::from_utf8_lossy(WDST_MAGIC).into_owned(),
            config: self.config.clone(),
            features: self.matrix.features.clone(),
            normalization: self.norm.clone(),
            plan: self.plan.clone(),
            rows: self.matrix.len(),
            samples: [train, val, test],
        }
    }

    /// Writes the binary dataset and its `<path>.json` manifest.
    pub fn persist(&self, path: &Path) -> Result<()> {
        let m = &self.matrix;
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut put = |b: &[u8]| w.write_all(b).map_err(|e| Error::io(path, e));
        put(WDST_MAGIC)?;
        let header = [
            m.len(),
            m.width(),
            self.config.window,
            self.plan.train.start,
            self.plan.train.end,
            self.plan.val.start,
            self.plan.val.end,
            self.plan.test.start,
            self.plan.test.end,
        ];
        for h in header {
            put(&(h as u64).to_le_bytes())?;
        }
        for v in m.rows.iter().chain(&m.target).chain(&m.demand) {
            put(&v.to_le_bytes())?;
        }
        for ts in &m.timestamps {
            put(&ts.and_utc().timestamp().to_le_bytes())?;
        }
        put(&m.holiday.iter().map(|h| u8::from(*h)).collect::<Vec<_>>())?;
        w.flush().map_err(|e| Error::io(path, e))?;

        let mp = manifest_path(path);
        let json = serde_json::to_string_pretty(&self.manifest())
            .map_err(|e| Error::Format(e.to_string()))?;
        fs::write(&mp, json).map_err(|e| Error::io(&mp, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mp = manifest_path(path);
        let manifest: DatasetManifest =
            serde_json::from_str(&fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?)
                .map_err(|e| Error::Format(format!("{}: {e}", mp.display())))?;

        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let mut r = ByteReader::new(&bytes);
        if r.take(8)? != WDST_MAGIC {
            return Err(Error::Format(format!(
                "{} is not a WDST0001 dataset",
                path.display()
            )));
        }
        let mut header = [0usize; 9];
        for h in &mut header {
            *h = r.u64()? as usize;
        }
        let [n, width, window, a, b, c, d, e, f] = header;
        if width != manifest.features.len() || window != manifest.config.window {
            return Err(Error::Format(
                "dataset header disagrees with its manifest".into(),
            ));
        }
        let plan = SplitPlan {
            train: a..b,
            val: c..d,
            test: e..f,
        };
        let mut read_f64s = |count: usize| (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>();
        let rows = read_f64s(n * width)?;
        let target = read_f64s(n)?;
        let demand = read_f64s(n)?;
        let timestamps = (0..n)
            .map(|_| {
                let secs = r.i64()?;
                chrono::DateTime::from_timestamp(secs, 0)
                    .map(|t| t.naive_utc())
                    .ok_or_else(|| Error::Format("timestamp out of range".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let holiday = r.take(n)?.iter().map(|b| *b != 0).collect();
        if !r.is_at_end() {
            return Err(Error::Format("trailing bytes after dataset".into()));
        }
        Ok(Dataset {
            config: manifest.config,
            matrix: Arc::new(FeatureMatrix {
                features: manifest.features,
                rows,
                target,
                demand,
                timestamps,
                holiday,
            }),
            norm: manifest.normalization,
            plan,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub config: DatasetConfig,
    pub features: Vec<Feature>,
    pub normalization: NormalizationSpec,
    pub plan: SplitPlan,
    pub rows: usize,
    pub samples: [usize; 3],
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{
        merge_sources, CalendarTable, PopulationTable, RawDemandRow, RawSatelliteRow,
        RawWeatherRow, Span,
    };
    use chrono::Duration;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    pub(crate) fn toy_table(days: i64) -> HourlyTable {
        let first = NaiveDate::from_ymd_opt(2018, 1, 1).unwrap();
        let span = Span::new(first, first + Duration::days(days - 1)).unwrap();
        let hours = span.hours();
        let at = |h: usize| span.start() + Duration::hours(h as i64);
        let demand: Vec<_> = (0..hours)
            .map(|h| RawDemandRow {
                timestamp: at(h),
                demand: Some(
                    1000.0 + 100.0 * ((h % 24) as f64 / 24.0 * TAU).sin() + h as f64 * 0.01,
                ),
            })
            .collect();
        let weather: Vec<_> = (0..hours)
            .map(|h| RawWeatherRow {
                timestamp: at(h),
                temp: Some(15.0 + (h % 24) as f64 * 0.3),
                hum: Some(60.0),
                pnm: Some(1013.0 + (h % 7) as f64),
                wd: Some((h * 13 % 360) as f64),
                ws: Some(5.0 + (h % 5) as f64),
            })
            .collect();
        let sat: Vec<_> = (0..hours)
            .map(|h| RawSatelliteRow {
                timestamp: at(h),
                irr1: Some((h % 24) as f64 * 0.1),
                irr2: Some((h % 24) as f64 * 0.12),
                irr3: Some((h % 24) as f64 * 0.02),
                pre: Some(0.0),
            })
            .collect();
        let mut cal = BTreeMap::new();
        for d in 0..days {
            cal.insert(first + Duration::days(d), d % 10 == 3);
        }
        let pop =
            PopulationTable::new([(2018, 3.7e6), (2019, 3.74e6)].into_iter().collect()).unwrap();
        merge_sources(
            &weather,
            &sat,
            &demand,
            &CalendarTable::new(cal),
            &pop,
            span,
        )
        .unwrap()
    }

    #[test]
    fn encodings_at_reference_times() {
        let e = encode_time(0.0);
        assert_eq!((e.day_sin, e.week_sin, e.year_sin), (0.0, 0.0, 0.0));
        assert_eq!((e.day_cos, e.week_cos, e.year_cos), (1.0, 1.0, 1.0));
        let q = encode_time(6.0);
        assert!((q.day_sin - 1.0).abs() < 1e-15 && q.day_cos.abs() < 1e-15);
        let w = encode_time(168.0);
        assert!(w.week_sin.abs() < 1e-12 && (w.week_cos - 1.0).abs() < 1e-12);
    }

    #[test]
    fn midnight_is_continuous() {
        assert!((encode_time(23.999).day_sin - encode_time(24.0).day_sin).abs() < 1e-3);
    }

    #[test]
    fn workday_rules() {
        let cal = CalendarTable::new(
            [
                (NaiveDate::from_ymd_opt(2024, 12, 25).unwrap(), true),
                (NaiveDate::from_ymd_opt(2024, 12, 17).unwrap(), false),
                (NaiveDate::from_ymd_opt(2024, 12, 22).unwrap(), false),
            ]
            .into_iter()
            .collect(),
        );
        assert_eq!(
            workday_flag(NaiveDate::from_ymd_opt(2024, 12, 25).unwrap(), &cal).unwrap(),
            0
        );
        assert_eq!(
            workday_flag(NaiveDate::from_ymd_opt(2024, 12, 17).unwrap(), &cal).unwrap(),
            1
        );
        assert_eq!(
            workday_flag(NaiveDate::from_ymd_opt(2024, 12, 22).unwrap(), &cal).unwrap(),
            0
        );
        assert!(workday_flag(NaiveDate::from_ymd_opt(2025, 1, 2).unwrap(), &cal).is_err());
    }

    #[test]
    fn minmax_reference_values() {
        let spec = NormalizationSpec::fit(&[2.0, 4.0, 6.0], 1, &[1.0, 2.0, 3.0]);
        let mut xs = [2.0, 4.0, 6.0, 9.0];
        spec.apply(&mut xs);
        assert_eq!(&xs[..3], &[0.0, 0.5, 1.0]);
        assert!(xs[3] > 1.0, "no clipping outside the fitted range");
        spec.invert(&mut xs);
        assert_eq!(xs, [2.0, 4.0, 6.0, 9.0]);
        let constant = NormalizationSpec::fit(&[5.0, 5.0], 1, &[1.0, 2.0]);
        assert_eq!(constant.features[0].apply(5.0), 0.0);
    }

    #[test]
    fn split_accounting() {
        let p = plan_split(124, 24, 0.1, 0.1, Accounting::Default).unwrap();
        assert_eq!(p.counts(), (80, 10, 10));
        assert_eq!(p.train.start, 24);
        assert_eq!(p.test.end, 124);
        let paper = plan_split(61_368, 24, 0.1, 0.1, Accounting::Paper).unwrap();
        assert_eq!(paper.counts(), (49_056, 6_132, 6_132));
        assert!(plan_split(24, 24, 0.1, 0.1, Accounting::Default).is_err());
        assert_eq!(
            plan_split(25, 24, 0.1, 0.1, Accounting::Default)
                .unwrap()
                .counts(),
            (1, 0, 0)
        );
    }

    #[test]
    fn windows_precede_targets() {
        let ds = Dataset::build(&toy_table(10), DatasetConfig::default()).unwrap();
        assert_eq!(ds.width(), 18);
        for tag in SplitTag::ALL {
            let s = ds.split(tag);
            for k in 0..s.len() {
                let t = s.target_row(k);
                assert_eq!(s.window(k), &ds.matrix.rows[(t - 24) * 18..t * 18]);
                assert_eq!(
                    s.timestamp(k),
                    ds.matrix.timestamps[t - 1] + Duration::hours(1)
                );
            }
        }
        let (a, b, c) = ds.plan.counts();
        assert_eq!(a + b + c, 240 - 24);
        assert_eq!(ds.plan.train.end, ds.plan.val.start);
        assert_eq!(ds.plan.val.end, ds.plan.test.start);
    }

    #[test]
    fn training_rows_span_unit_interval() {
        let ds = Dataset::build(&toy_table(10), DatasetConfig::default()).unwrap();
        let w = ds.width();
        let train_rows = &ds.matrix.rows[..ds.plan.train.end * w];
        for j in 0..w {
            let col: Vec<f64> = train_rows.iter().skip(j).step_by(w).copied().collect();
            let (lo, hi) = col
                .iter()
                .fold((f64::MAX, f64::MIN), |a, x| (a.0.min(*x), a.1.max(*x)));
            assert!(
                lo >= 0.0 && hi <= 1.0,
                "{}: {lo}..{hi}",
                ds.matrix.features[j].name()
            );
            if ds.norm.features[j].max > ds.norm.features[j].min {
                assert_eq!((lo, hi), (0.0, 1.0));
            }
        }
        // encodings keep sin² + cos² = 1 before scaling
        assert_eq!(ds.norm.features.len(), 18);
    }

    #[test]
    fn normalization_ignores_val_and_test_rows() {
        let table = toy_table(10);
        let ds = Dataset::build(&table, DatasetConfig::default()).unwrap();
        let mut perturbed = table.clone();
        let mut demand = perturbed.column(Field::Demand).to_vec();
        let mut temp = perturbed.column(Field::Temp).to_vec();
        for r in ds.plan.train.end..table.len() {
            demand[r] *= 10.0;
            temp[r] = -80.0;
        }
        perturbed.replace_values(Field::Demand, demand).unwrap();
        perturbed.replace_values(Field::Temp, temp).unwrap();
        let ds2 = Dataset::build(&perturbed, DatasetConfig::default()).unwrap();
        assert_eq!(ds.norm, ds2.norm);
        assert!(ds2
            .split(SplitTag::Test)
            .targets_normalized()
            .iter()
            .any(|t| *t > 1.0));
    }

    #[test]
    fn paper_table2_drops_satellite_columns() {
        let cfg = DatasetConfig {
            feature_set: FeatureSet::PaperTable2,
            ..DatasetConfig::default()
        };
        let ds = Dataset::build(&toy_table(5), cfg).unwrap();
        assert_eq!(ds.width(), 14);
        assert!(!ds
            .feature_names()
            .iter()
            .any(|n| n.starts_with("irr") || n == "pre"));
    }

    #[test]
    fn missing_values_rejected() {
        let mut t = toy_table(3);
        t.set(Field::Temp, 5, None);
        assert!(matches!(
            Dataset::build(&t, DatasetConfig::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn persist_round_trip() {
        let ds = Dataset::build(&toy_table(6), DatasetConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.wdst");
        ds.persist(&p).unwrap();
        assert_eq!(Dataset::load(&p).unwrap(), ds);
    }

    proptest! {
        #[test]
        fn encodings_lie_on_unit_circles(t in 0.0..1e6f64) {
            let e = encode_time(t);
            for (s, c) in [(e.day_sin, e.day_cos), (e.week_sin, e.week_cos), (e.year_sin, e.year_cos)] {
                prop_assert!((s * s + c * c - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn minmax_round_trip(xs in prop::collection::vec(-1e4..1e4f64, 2..50)) {
            let spec = NormalizationSpec::fit(&xs, 1, &xs);
            let mut ys = xs.clone();
            spec.apply(&mut ys);
            spec.invert(&mut ys);
            for (a, b) in xs.iter().zip(&ys) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }

        #[test]
        fn splits_partition_samples(rows in 25usize..5000) {
            let p = plan_split(rows, 24, 0.1, 0.1, Accounting::Default).unwrap();
            prop_assert_eq!(p.train.start, 24);
            prop_assert_eq!(p.train.end, p.val.start);
            prop_assert_eq!(p.val.end, p.test.start);
            prop_assert_eq!(p.test.end, rows);
        }
    }
}
