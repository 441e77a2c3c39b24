//! Seeded synthetic raw sources in the same CSV layouts as the real ones.
//!
//! Demand is a base load plus daily, weekly and annual cycles, a U-shaped
//! temperature response, a holiday dip and autocorrelated noise, scaled by
//! population. Weather follows smooth seasonal and diurnal cycles.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ingest::{
    CalendarTable, PopulationTable, RawDemandRow, RawSatelliteRow, RawWeatherRow, SourcePaths, Span,
};

pub const FIRST_DAY: (i32, u32, u32) = (2018, 1, 1);

const TIMESTAMP: &str = "%Y-%m-%d %H:%M";
const BASE_POPULATION: f64 = 3.7e6;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSources {
    pub span: Span,
    pub weather: Vec<RawWeatherRow>,
    pub satellite: Vec<RawSatelliteRow>,
    pub demand: Vec<RawDemandRow>,
    pub calendar: CalendarTable,
    pub population: PopulationTable,
}

fn fixed_holiday(d: NaiveDate) -> bool {
    matches!(
        (d.month(), d.day()),
        (1, 1)
            | (3, 24)
            | (4, 2)
            | (5, 1)
            | (5, 25)
            | (6, 20)
            | (7, 9)
            | (8, 17)
            | (10, 12)
            | (12, 8)
            | (12, 25)
    )
}

/// Daily demand shape in MW: evening peak near 20:00, night trough near 04:00.
fn daily_shape(hour: f64) -> f64 {
    100.0 * (2.0 * PI * (hour - 14.0) / 24.0).sin() + 140.0 * (-(hour - 20.0).powi(2) / 2.5).exp()
        - 150.0 * (-(hour - 4.0).powi(2) / 2.0).exp()
}

pub fn generate(days: usize, seed: u64) -> Result<SyntheticSources> {
    if days < 3 {
        return Err(Error::Config(format!(
            "synthetic data needs at least 3 days, got {days}"
        )));
    }
    let (y, m, d) = FIRST_DAY;
    let first = NaiveDate::from_ymd_opt(y, m, d).expect("valid date");
    let last = first + Duration::days(days as i64 - 1);
    let span = Span::new(first, last)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");

    let mut holidays = BTreeMap::new();
    let mut day = first;
    while day <= last {
        // a handful of movable holidays on top of the fixed ones
        let movable = day.weekday() == Weekday::Mon && rng.random::<f64>() < 0.04;
        holidays.insert(day, fixed_holiday(day) || movable);
        day = day.succ_opt().expect("date in range");
    }
    let calendar = CalendarTable::new(holidays.clone());
    let population = PopulationTable::new(
        (first.year()..=last.year() + 1)
            .map(|yr| (yr, BASE_POPULATION * 1.008f64.powi(yr - first.year())))
            .collect(),
    )?;

    let hours = span.hours();
    let mut weather = Vec::with_capacity(hours);
    let mut satellite = Vec::with_capacity(hours);
    let mut demand = Vec::with_capacity(hours);
    let (mut temp_noise, mut load_noise) = (0.0, 0.0);
    for t in 0..hours {
        let ts: NaiveDateTime = span.start() + Duration::hours(t as i64);
        let hour = ts.hour() as f64;
        let season = 2.0 * PI * (ts.ordinal0() as f64 - 15.0) / 365.25;
        let diurnal = 2.0 * PI * (hour - 9.0) / 24.0;

        temp_noise = 0.9 * temp_noise + 0.6 * unit.sample(&mut rng);
        let temp = 17.4 + 4.0 * season.cos() + 5.0 * diurnal.sin() + temp_noise;
        let hum = (65.0 - 8.0 * season.cos() - 15.0 * diurnal.sin() + 4.0 * unit.sample(&mut rng))
            .clamp(8.0, 100.0);
        let pnm = 1013.0 - 4.0 * season.cos() + 1.5 * diurnal.cos() + 1.0 * unit.sample(&mut rng);
        let wd = (200.0 + 60.0 * diurnal.sin() + 40.0 * unit.sample(&mut rng)).rem_euclid(360.0);
        let ws = (11.0 + 5.0 * diurnal.sin() + 3.0 * unit.sample(&mut rng)).abs();
        weather.push(RawWeatherRow {
            timestamp: ts,
            temp: Some(temp),
            hum: Some(hum),
            pnm: Some(pnm),
            wd: Some(wd),
            ws: Some(ws),
        });

        let sun = (PI * (hour - 6.5) / 13.0).sin().max(0.0);
        let clear = 2.4 + 0.9 * season.cos();
        let cloud = 1.0 - 0.3 * rng.random::<f64>();
        let rain = if rng.random::<f64>() < 0.03 {
            4.0 * rng.random::<f64>()
        } else {
            0.0
        };
        satellite.push(RawSatelliteRow {
            timestamp: ts,
            irr1: Some(clear * sun * cloud),
            irr2: Some(0.82 * clear * sun * cloud),
            irr3: Some(0.35 * clear * sun),
            pre: Some(rain),
        });

        let date = ts.date();
        let weekend = match date.weekday() {
            Weekday::Sat => 35.0,
            Weekday::Sun => 55.0,
            _ => 0.0,
        };
        let daytime = (-(hour - 14.0).powi(2) / 18.0).exp();
        let holiday = if holidays[&date] { 60.0 } else { 0.0 };
        load_noise = 0.7 * load_noise + 3.0 * unit.sample(&mut rng);
        let base = 1050.0 + 30.0 * season.cos() + daily_shape(hour) + 0.8 * (temp - 16.0).powi(2)
            - (weekend + holiday) * daytime;
        let scale = population.at(date) / BASE_POPULATION;
        demand.push(RawDemandRow {
            timestamp: ts,
            demand: Some((base * scale + load_noise).max(50.0)),
        });
    }
    Ok(SyntheticSources {
        span,
        weather,
        satellite,
        demand,
        calendar,
        population,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

impl SyntheticSources {
    pub fn weather_csv(&self) -> String {
        let mut out = String::from("timestamp,temp,hum,pnm,wd,ws\n");
        for r in &self.weather {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.timestamp.format(TIMESTAMP),
                cell(r.temp),
                cell(r.hum),
                cell(r.pnm),
                cell(r.wd),
                cell(r.ws)
            );
        }
        out
    }

    pub fn satellite_csv(&self) -> String {
        let mut out = String::from("timestamp,irr1,irr2,irr3,pre\n");
        for r in &self.satellite {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.timestamp.format(TIMESTAMP),
                cell(r.irr1),
                cell(r.irr2),
                cell(r.irr3),
                cell(r.pre)
            );
        }
        out
    }

    pub fn demand_csv(&self) -> String {
        let mut out = String::from("timestamp,demand\n");
        for r in &self.demand {
            let _ = writeln!(out, "{},{}", r.timestamp.format(TIMESTAMP), cell(r.demand));
        }
        out
    }

    pub fn calendar_csv(&self) -> String {
        let mut out = String::from("date,is_holiday\n");
        for (d, h) in self.calendar.iter() {
            let _ = writeln!(out, "{},{}", d, u8::from(h));
        }
        out
    }

    pub fn population_csv(&self) -> String {
        let mut out = String::from("year,population\n");
        for (y, p) in self.population.iter() {
            let _ = writeln!(out, "{y},{}", p.round());
        }
        out
    }

    /// Writes the five source files under their standard names.
    pub fn write(&self, dir: &Path) -> Result<SourcePaths> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = SourcePaths::in_dir(dir);
        for (path, text) in [
            (&paths.weather, self.weather_csv()),
            (&paths.satellite, self.satellite_csv()),
            (&paths.demand, self.demand_csv()),
            (&paths.calendar, self.calendar_csv()),
            (&paths.population, self.population_csv()),
        ] {
            fs::write(path, text).map_err(|e| Error::io(path, e))?;
        }
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::periodogram;
    use crate::ingest::{ingest, Field};

    #[test]
    fn deterministic_files() {
        let a = generate(30, 7).unwrap();
        let b = generate(30, 7).unwrap();
        assert_eq!(a.demand_csv(), b.demand_csv());
        assert_eq!(a.weather_csv(), b.weather_csv());
        assert_ne!(a.demand_csv(), generate(30, 8).unwrap().demand_csv());
    }

    #[test]
    fn demand_has_daily_and_weekly_cycles() {
        let s = generate(84, 3).unwrap();
        let y: Vec<f64> = s.demand.iter().map(|r| r.demand.unwrap()).collect();
        let freqs: Vec<f64> = periodogram(&y)
            .unwrap()
            .peaks(8)
            .iter()
            .map(|p| p.0)
            .collect();
        let near = |f: f64| freqs.iter().any(|g| (g - f).abs() < 1e-9);
        assert!(near(1.0 / 24.0), "{freqs:?}");
        assert!(near(1.0 / 168.0), "{freqs:?}");
    }

    #[test]
    fn written_sources_ingest_cleanly() {
        let s = generate(5, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = s.write(dir.path()).unwrap();
        let table = ingest(&paths, s.span).unwrap();
        assert_eq!(table.len(), 5 * 24);
        assert!(Field::ALL.iter().all(|f| table.missing_count(*f) == 0));
    }

    #[test]
    fn too_few_days_rejected() {
        assert!(generate(2, 0).is_err());
    }
}
