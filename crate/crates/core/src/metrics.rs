//! Forecast error metrics on MW-scale values.
//!
//! Metrics that can be undefined for a given input (division by zero in
//! their formula) are `None` rather than NaN.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub mse: f64,
    pub mae: f64,
    pub rmse: f64,
    /// Undefined when `y` is constant.
    pub r2: Option<f64>,
    /// Percent; hours with `y = 0` are skipped and counted in `mape_excluded`.
    pub mape: Option<f64>,
    /// Percent; undefined when `Σy = 0`.
    pub wape: Option<f64>,
    /// Scaled by the one-step naive forecast of the evaluated series itself.
    pub mase: Option<f64>,
    pub mape_excluded: usize,
}

/// Mean absolute one-step change, `(1/(n-1)) Σ_{t≥2} |y_t − y_{t−1}|`.
pub fn naive_scale(y: &[f64]) -> Option<f64> {
    if y.len() < 2 {
        return None;
    }
    let s = y.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (y.len() - 1) as f64;
    (s > 0.0).then_some(s)
}

pub fn compute_all(y: &[f64], yhat: &[f64]) -> Result<MetricsReport> {
    if y.len() != yhat.len() {
        return Err(Error::Shape(format!(
            "{} observations but {} predictions",
            y.len(),
            yhat.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::Data("metrics need at least two points".into()));
    }
    if let Some(k) = y.iter().chain(yhat).position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite value at position {}",
            k % y.len()
        )));
    }
    let n = y.len() as f64;
    let mut sse = 0.0;
    let mut sae = 0.0;
    let mut ape = 0.0;
    let mut excluded = 0;
    for (a, p) in y.iter().zip(yhat) {
        let e = a - p;
        sse += e * e;
        sae += e.abs();
        if *a == 0.0 {
            excluded += 1;
        } else {
            ape += (e / a).abs();
        }
    }
    let mean = y.iter().sum::<f64>() / n;
    let sst: f64 = y.iter().map(|a| (a - mean).powi(2)).sum();
    let sum_y: f64 = y.iter().sum();
    let mse = sse / n;
    let mae = sae / n;
    let kept = y.len() - excluded;
    Ok(MetricsReport {
        n: y.len(),
        mse,
        mae,
        rmse: mse.sqrt(),
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
        mape: (kept > 0).then(|| 100.0 * ape / kept as f64),
        wape: (sum_y != 0.0).then(|| 100.0 * sae / sum_y),
        mase: naive_scale(y).map(|s| mae / s),
        mape_excluded: excluded,
    })
}

/// One line of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultLine {
    pub model_id: String,
    pub subset: String,
    pub report: MetricsReport,
}

pub const RESULTS_HEADER: &str = "model_id,subset,MSE,MAE,RMSE,R2,MAPE,WAPE,MASE";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ResultLine {
    pub fn csv_fields(&self) -> String {
        let r = &self.report;
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.model_id,
            self.subset,
            r.mse,
            r.mae,
            r.rmse,
            opt(r.r2),
            opt(r.mape),
            opt(r.wape),
            opt(r.mase)
        )
    }
}

pub fn results_csv(lines: &[ResultLine]) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    for l in lines {
        let _ = writeln!(out, "{}", l.csv_fields());
    }
    out
}

pub fn write_results_csv(path: &Path, lines: &[ResultLine]) -> Result<()> {
    fs::write(path, results_csv(lines)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn perfect_forecast() {
        let y = [3.0, 5.0, 4.0, 8.0];
        let r = compute_all(&y, &y).unwrap();
        assert_eq!((r.mse, r.mae, r.rmse), (0.0, 0.0, 0.0));
        assert_eq!(r.r2, Some(1.0));
        assert_eq!(r.mape, Some(0.0));
        assert_eq!(r.wape, Some(0.0));
        assert_eq!(r.mase, Some(0.0));
    }

    #[test]
    fn worked_example() {
        let r = compute_all(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!(close(r.mse, 2.0 / 3.0, 1e-12));
        assert!(close(r.mae, 2.0 / 3.0, 1e-12));
        assert!(close(r.rmse, 0.8165, 1e-4));
        assert!(close(r.r2.unwrap(), 0.0, 1e-12));
        assert!(close(r.mape.unwrap(), 27.78, 5e-3));
        assert!(close(r.wape.unwrap(), 33.33, 5e-3));
        assert!(close(r.mase.unwrap(), 0.6667, 1e-4));
    }

    #[test]
    fn mean_forecast_has_zero_r2() {
        let y = [2.0, 9.0, 4.0, 1.0];
        let m = y.iter().sum::<f64>() / 4.0;
        assert!(close(
            compute_all(&y, &[m; 4]).unwrap().r2.unwrap(),
            0.0,
            1e-12
        ));
    }

    #[test]
    fn undefined_metrics_are_flagged() {
        let r = compute_all(&[0.0, 0.0, 0.0], &[1.0, 0.0, -1.0]).unwrap();
        assert_eq!(r.r2, None);
        assert_eq!(r.mape, None);
        assert_eq!(r.wape, None);
        assert_eq!(r.mase, None);
        assert_eq!(r.mape_excluded, 3);
        assert!(compute_all(&[1.0], &[1.0]).is_err());
        assert!(compute_all(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn zero_hours_are_excluded_from_mape() {
        let r = compute_all(&[0.0, 2.0, 4.0], &[1.0, 1.0, 5.0]).unwrap();
        assert_eq!(r.mape_excluded, 1);
        assert!(close(r.mape.unwrap(), 100.0 * (0.5 + 0.25) / 2.0, 1e-12));
    }

    #[test]
    fn naive_forecast_has_unit_mase() {
        let y = [5.0, 7.0, 4.0, 9.0, 9.5, 3.0];
        let yhat: Vec<f64> = y[..5].to_vec();
        let mae = y[1..]
            .iter()
            .zip(&yhat)
            .map(|(a, p)| (a - p).abs())
            .sum::<f64>()
            / 5.0;
        assert!(close(mae / naive_scale(&y).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn results_csv_layout() {
        let r = compute_all(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        let csv = results_csv(&[ResultLine {
            model_id: "m1".into(),
            subset: "test".into(),
            report: r,
        }]);
        assert_eq!(csv, format!("{RESULTS_HEADER}\nm1,test,0,0,0,,0,0,\n"));
    }
}
