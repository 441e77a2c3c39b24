//! Post-hoc error analyses: residual series, grouped error boxplots,
//! daily extrema timing, residual histogram and the cost of a forecast error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, population_sd, quantile_sorted, sorted};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub timestamp: NaiveDateTime,
    /// `y − ŷ` in MW.
    pub error: f64,
    /// Monday = 0.
    pub weekday: u8,
    pub hour: u8,
    pub holiday: bool,
}

pub fn residuals(
    timestamps: &[NaiveDateTime],
    y: &[f64],
    yhat: &[f64],
    holidays: &[bool],
) -> Result<Vec<Residual>> {
    let n = timestamps.len();
    if y.len() != n || yhat.len() != n || holidays.len() != n {
        return Err(Error::Shape("residual inputs differ in length".into()));
    }
    Ok((0..n)
        .map(|k| Residual {
            timestamp: timestamps[k],
            error: y[k] - yhat[k],
            weekday: timestamps[k].weekday().num_days_from_monday() as u8,
            hour: timestamps[k].hour() as u8,
            holiday: holidays[k],
        })
        .collect())
}

/// Index of the first maximum (`sign = 1`) or first minimum (`sign = -1`).
fn first_extremum(profile: &[f64; 24], sign: f64) -> usize {
    let mut best = 0;
    for h in 1..24 {
        if sign * profile[h] > sign * profile[best] {
            best = h;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayExtrema {
    pub date: NaiveDate,
    pub t_max_real: u8,
    pub t_max_pred: u8,
    pub dt_max: i8,
    pub t_min_real: u8,
    pub t_min_pred: u8,
    pub dt_min: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremaTimingReport {
    pub days: Vec<DayExtrema>,
    /// Days without a complete 24-hour profile.
    pub dropped_days: usize,
    pub max_exact_pct: f64,
    pub max_within1_pct: f64,
    pub min_exact_pct: f64,
    pub min_within1_pct: f64,
}

fn pct(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

/// Timing of daily maxima and minima for complete calendar-day profiles.
/// Ties resolve to the earliest hour; `Δt = t_real − t_pred`.
pub fn extrema_timing_profiles(
    days: &[(NaiveDate, [f64; 24], [f64; 24])],
    dropped_days: usize,
) -> ExtremaTimingReport {
    let days: Vec<DayExtrema> = days
        .iter()
        .map(|(date, real, pred)| {
            let (xr, xp) = (first_extremum(real, 1.0), first_extremum(pred, 1.0));
            let (nr, np) = (first_extremum(real, -1.0), first_extremum(pred, -1.0));
            DayExtrema {
                date: *date,
                t_max_real: xr as u8,
                t_max_pred: xp as u8,
                dt_max: xr as i8 - xp as i8,
                t_min_real: nr as u8,
                t_min_pred: np as u8,
                dt_min: nr as i8 - np as i8,
            }
        })
        .collect();
    let n = days.len();
    let count = |f: &dyn Fn(&DayExtrema) -> bool| days.iter().filter(|d| f(d)).count();
    ExtremaTimingReport {
        max_exact_pct: pct(count(&|d| d.dt_max == 0), n),
        max_within1_pct: pct(count(&|d| d.dt_max.abs() <= 1), n),
        min_exact_pct: pct(count(&|d| d.dt_min == 0), n),
        min_within1_pct: pct(count(&|d| d.dt_min.abs() <= 1), n),
        days,
        dropped_days,
    }
}

type DayHours = [Option<f64>; 24];

/// Groups an hourly series into calendar days and runs
/// [`extrema_timing_profiles`] on the complete ones.
pub fn extrema_timing(
    timestamps: &[NaiveDateTime],
    y: &[f64],
    yhat: &[f64],
) -> Result<ExtremaTimingReport> {
    if y.len() != timestamps.len() || yhat.len() != timestamps.len() {
        return Err(Error::Shape("extrema inputs differ in length".into()));
    }
    let mut by_day: BTreeMap<NaiveDate, (DayHours, DayHours)> = BTreeMap::new();
    for (k, ts) in timestamps.iter().enumerate() {
        let entry = by_day.entry(ts.date()).or_insert(([None; 24], [None; 24]));
        let h = ts.hour() as usize;
        entry.0[h] = Some(y[k]);
        entry.1[h] = Some(yhat[k]);
    }
    let mut complete = Vec::new();
    let mut dropped = 0;
    for (date, (real, pred)) in by_day {
        if real.iter().all(Option::is_some) {
            complete.push((
                date,
                real.map(|v| v.unwrap_or_default()),
                pred.map(|v| v.unwrap_or_default()),
            ));
        } else {
            dropped += 1;
        }
    }
    Ok(extrema_timing_profiles(&complete, dropped))
}

impl ExtremaTimingReport {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("date,t_max_real,t_max_pred,dt_max,t_min_real,t_min_pred,dt_min\n");
        for d in &self.days {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                d.date, d.t_max_real, d.t_max_pred, d.dt_max, d.t_min_real, d.t_min_pred, d.dt_min
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        format!(
            "days,dropped_days,max_exact_pct,max_within1_pct,min_exact_pct,min_within1_pct\n{},{},{},{},{},{}\n",
            self.days.len(),
            self.dropped_days,
            self.max_exact_pct,
            self.max_within1_pct,
            self.min_exact_pct,
            self.min_within1_pct
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKey {
    Weekday,
    Hour,
}

impl GroupKey {
    pub fn name(self) -> &'static str {
        match self {
            GroupKey::Weekday => "weekday",
            GroupKey::Hour => "hour",
        }
    }

    fn count(self) -> u8 {
        match self {
            GroupKey::Weekday => 7,
            GroupKey::Hour => 24,
        }
    }

    fn of(self, r: &Residual) -> u8 {
        match self {
            GroupKey::Weekday => r.weekday,
            GroupKey::Hour => r.hour,
        }
    }
}

/// Tukey boxplot statistics of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Most extreme values inside `[q1 − 1.5·IQR, q3 + 1.5·IQR]`.
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: Vec<f64>,
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let s = sorted(values);
    let q1 = quantile_sorted(&s, 0.25);
    let q3 = quantile_sorted(&s, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = s.iter().copied().filter(|v| *v >= lo && *v <= hi).collect();
    Some(BoxStats {
        median: quantile_sorted(&s, 0.5),
        q1,
        q3,
        lower_whisker: inside.first().copied().unwrap_or(q1),
        upper_whisker: inside.last().copied().unwrap_or(q3),
        outliers: s.into_iter().filter(|v| *v < lo || *v > hi).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub key: u8,
    pub holiday: bool,
    pub n: usize,
    pub stats: Option<BoxStats>,
    pub mean_demand: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedErrorSummary {
    pub key: GroupKey,
    pub rows: Vec<GroupRow>,
}

/// Boxplot statistics of residuals per (key value, holiday flag). Every
/// combination gets a row; empty ones have `n = 0`.
pub fn group_errors(
    residuals: &[Residual],
    demand: &[f64],
    key: GroupKey,
) -> Result<GroupedErrorSummary> {
    if residuals.is_empty() {
        return Err(Error::Data("no residuals to group".into()));
    }
    if demand.len() != residuals.len() {
        return Err(Error::Shape(
            "one demand value per residual required".into(),
        ));
    }
    let mut buckets: BTreeMap<(u8, bool), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for k in 0..key.count() {
        for h in [false, true] {
            buckets.insert((k, h), (Vec::new(), Vec::new()));
        }
    }
    for (r, d) in residuals.iter().zip(demand) {
        let b = buckets
            .get_mut(&(key.of(r), r.holiday))
            .expect("all keys present");
        b.0.push(r.error);
        b.1.push(*d);
    }
    let rows = buckets
        .into_iter()
        .map(|((k, holiday), (errors, demand))| GroupRow {
            key: k,
            holiday,
            n: errors.len(),
            stats: box_stats(&errors),
            mean_demand: (!demand.is_empty()).then(|| mean(&demand)),
        })
        .collect();
    Ok(GroupedErrorSummary { key, rows })
}

impl GroupedErrorSummary {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "{},holiday,n,median,q1,q3,lower_whisker,upper_whisker,outliers,mean_demand\n",
            self.key.name()
        );
        for r in &self.rows {
            let stats = r.stats.as_ref().map_or_else(
                || ",,,,,".to_string(),
                |s| {
                    format!(
                        "{},{},{},{},{},{}",
                        s.median,
                        s.q1,
                        s.q3,
                        s.lower_whisker,
                        s.upper_whisker,
                        s.outliers.len()
                    )
                },
            );
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.key,
                u8::from(r.holiday),
                r.n,
                stats,
                r.mean_demand.map(|v| v.to_string()).unwrap_or_default()
            );
        }
        out
    }
}

/// Cost of a sustained deviation: MW × hours × USD/MWh.
pub fn cost_of_error(deviation_mw: f64, duration_h: f64, price_usd_per_mwh: f64) -> f64 {
    deviation_mw * duration_h * price_usd_per_mwh
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Left edge of the first bin.
    pub start: f64,
    pub bin_width: f64,
    pub counts: Vec<usize>,
    /// Normalized so that `Σ density · bin_width = 1`.
    pub density: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

pub fn residual_histogram(values: &[f64], bin_width: f64) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::Data("histogram of an empty sample".into()));
    }
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::Config(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = (lo / bin_width).floor() * bin_width;
    let bins = (((hi - start) / bin_width).floor() as usize + 1).max(1);
    let mut counts = vec![0usize; bins];
    for v in values {
        let b = (((v - start) / bin_width).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    let scale = 1.0 / (values.len() as f64 * bin_width);
    Ok(Histogram {
        start,
        bin_width,
        density: counts.iter().map(|c| *c as f64 * scale).collect(),
        counts,
        mean: mean(values),
        sd: population_sd(values),
    })
}

impl Histogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start,bin_end,count,density\n");
        for (k, (c, d)) in self.counts.iter().zip(&self.density).enumerate() {
            let a = self.start + k as f64 * self.bin_width;
            let _ = writeln!(out, "{},{},{},{}", a, a + self.bin_width, c, d);
        }
        out
    }
}

pub fn residuals_csv(residuals: &[Residual]) -> String {
    let mut out = String::from("timestamp,error,weekday,hour,holiday\n");
    for r in residuals {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.timestamp.format("%Y-%m-%d %H:%M"),
            r.error,
            r.weekday,
            r.hour,
            u8::from(r.holiday)
        );
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
