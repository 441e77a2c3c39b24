//! Exploratory diagnostics of the demand series: periodogram, sample
//! autocorrelation, demand–temperature polynomial fits and a two-Gaussian
//! mixture for the demand distribution.

use std::f64::consts::PI;
use std::fmt::Write as _;

use chrono::{Datelike, NaiveDateTime};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::baseline::pearson;
use crate::error::{Error, Result};
use crate::stats::{mean, population_sd, quantile_sorted, sorted};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Periodogram {
    /// Cycles per hour, `k / n` for `k = 0..=n/2`.
    pub frequency: Vec<f64>,
    /// One-sided power; interior bins carry both conjugate halves, so the
    /// total equals `n · variance`.
    pub power: Vec<f64>,
}

pub fn periodogram(series: &[f64]) -> Result<Periodogram> {
    let n = series.len();
    if n < 2 {
        return Err(Error::Data("periodogram needs at least two samples".into()));
    }
    let m = mean(series);
    let mut buf: Vec<Complex<f64>> = series.iter().map(|x| Complex::new(x - m, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let mut frequency = Vec::with_capacity(half + 1);
    let mut power = Vec::with_capacity(half + 1);
    for (k, c) in buf.iter().enumerate().take(half + 1) {
        let mirrored = k != 0 && !(n.is_multiple_of(2) && k == half);
        frequency.push(k as f64 / n as f64);
        power.push(c.norm_sqr() / n as f64 * if mirrored { 2.0 } else { 1.0 });
    }
    Ok(Periodogram { frequency, power })
}

impl Periodogram {
    /// The `k` strongest local maxima above zero frequency, strongest first.
    pub fn peaks(&self, k: usize) -> Vec<(f64, f64)> {
        let p = &self.power;
        let mut out: Vec<(f64, f64)> = (1..p.len())
            .filter(|&i| p[i] > p[i - 1] && (i + 1 == p.len() || p[i] >= p[i + 1]))
            .map(|i| (self.frequency[i], p[i]))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
        out.truncate(k);
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("frequency_per_hour,period_hours,power\n");
        for (f, p) in self.frequency.iter().zip(&self.power) {
            let period = if *f > 0.0 {
                (1.0 / f).to_string()
            } else {
                String::new()
            };
            let _ = writeln!(out, "{f},{period},{p}");
        }
        out
    }
}

/// Sample autocorrelation for lags `0..=max_lag`; `None` for a constant series.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Option<Vec<f64>>> {
    if series.len() <= max_lag {
        return Err(Error::Data(format!(
            "series of length {} is too short for lag {max_lag}",
            series.len()
        )));
    }
    let m = mean(series);
    let d: Vec<f64> = series.iter().map(|x| x - m).collect();
    let denom: f64 = d.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return Ok(None);
    }
    Ok(Some(
        (0..=max_lag)
            .map(|k| d.iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / denom)
            .collect(),
    ))
}

pub fn acf_csv(values: &[f64]) -> String {
    let mut out = String::from("lag,acf\n");
    for (k, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StationaryKind {
    Minimum,
    Maximum,
    Inflection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub x: f64,
    pub y: f64,
    pub kind: StationaryKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    pub degree: usize,
    /// Coefficients in ascending powers of the original variable.
    pub coefficients: Vec<f64>,
    /// Roots of the derivative inside the observed range of `x`.
    pub stationary_points: Vec<StationaryPoint>,
    /// Pearson correlation of the data, reported for the linear fit.
    pub pearson: Option<f64>,
    pub residual_sum_squares: f64,
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * x + v)
}

/// Gaussian elimination with partial pivoting; `None` when singular.
#[allow(clippy::needless_range_loop)]
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Least-squares polynomial `y ≈ Σ c_k x^k` of degree 1 to 3, solved by
/// normal equations on the centred and scaled variable.
pub fn fit_poly(x: &[f64], y: &[f64], degree: usize) -> Result<PolyFit> {
    if !(1..=3).contains(&degree) {
        return Err(Error::Config(format!(
            "polynomial degree {degree} outside 1..=3"
        )));
    }
    if x.len() != y.len() || x.len() <= degree {
        return Err(Error::Data(
            "polynomial fit needs equal-length inputs longer than the degree".into(),
        ));
    }
    let mx = mean(x);
    let sx = population_sd(x);
    if sx == 0.0 {
        return Err(Error::Numeric(
            "singular normal equations: constant regressor".into(),
        ));
    }
    let p = degree + 1;
    let mut ata = vec![vec![0.0; p]; p];
    let mut aty = vec![0.0; p];
    for (xi, yi) in x.iter().zip(y) {
        let u = (xi - mx) / sx;
        let pows: Vec<f64> = (0..p).map(|k| u.powi(k as i32)).collect();
        for r in 0..p {
            aty[r] += pows[r] * yi;
            for c in 0..p {
                ata[r][c] += pows[r] * pows[c];
            }
        }
    }
    let beta = solve(ata, aty).ok_or_else(|| Error::Numeric("singular normal equations".into()))?;
    // expand Σ β_k ((x − mx)/sx)^k into powers of x
    let mut coefficients = vec![0.0; p];
    for (k, b) in beta.iter().enumerate() {
        let scale = b / sx.powi(k as i32);
        for (j, c) in coefficients.iter_mut().enumerate().take(k + 1) {
            let binom = (1..=j).fold(1.0, |acc, i| acc * (k - i + 1) as f64 / i as f64);
            *c += scale * binom * (-mx).powi((k - j) as i32);
        }
    }
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let u = (xi - mx) / sx;
            (yi - horner(&beta, u)).powi(2)
        })
        .sum();
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    let stationary_points = derivative_roots(&beta)
        .into_iter()
        .map(|u| mx + sx * u)
        .filter(|v| (lo..=hi).contains(v))
        .map(|v| {
            let u = (v - mx) / sx;
            let second: f64 = beta
                .iter()
                .enumerate()
                .skip(2)
                .map(|(k, b)| (k * (k - 1)) as f64 * b * u.powi(k as i32 - 2))
                .sum();
            let kind = if second > 0.0 {
                StationaryKind::Minimum
            } else if second < 0.0 {
                StationaryKind::Maximum
            } else {
                StationaryKind::Inflection
            };
            StationaryPoint {
                x: v,
                y: horner(&coefficients, v),
                kind,
            }
        })
        .collect();
    Ok(PolyFit {
        degree,
        coefficients,
        stationary_points,
        pearson: if degree == 1 { pearson(x, y) } else { None },
        residual_sum_squares: rss,
    })
}

/// Real roots of the derivative of `Σ c_k u^k`, ascending.
fn derivative_roots(c: &[f64]) -> Vec<f64> {
    match c.len() {
        3 if c[2] != 0.0 => vec![-c[1] / (2.0 * c[2])],
        4 => {
            // 3a u² + 2b u + c = 0
            let (a, b, cc) = (3.0 * c[3], 2.0 * c[2], c[1]);
            if a == 0.0 {
                return if b != 0.0 { vec![-cc / b] } else { Vec::new() };
            }
            let disc = b * b - 4.0 * a * cc;
            if disc < 0.0 {
                return Vec::new();
            }
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            let mut r = if q != 0.0 {
                vec![q / a, cc / q]
            } else {
                vec![0.0]
            };
            r.sort_by(f64::total_cmp);
            r.dedup();
            r
        }
        _ => Vec::new(),
    }
}

/// Linear demand–temperature fits per calendar month.
pub fn fit_poly_by_month(
    timestamps: &[NaiveDateTime],
    temp: &[f64],
    demand: &[f64],
) -> Vec<(u32, Result<PolyFit>)> {
    (1..=12)
        .filter_map(|month| {
            let (x, y): (Vec<f64>, Vec<f64>) = timestamps
                .iter()
                .zip(temp.iter().zip(demand))
                .filter(|(t, _)| t.month() == month)
                .map(|(_, (a, b))| (*a, *b))
                .unzip();
            (!x.is_empty()).then(|| (month, fit_poly(&x, &y, 1)))
        })
        .collect()
}

impl PolyFit {
    pub fn to_csv_row(&self, label: &str) -> String {
        let coef: Vec<String> = (0..4)
            .map(|k| {
                self.coefficients
                    .get(k)
                    .map(|v| v.to_string())
                    .unwrap_or_default()
            })
            .collect();
        let minima: Vec<String> = self
            .stationary_points
            .iter()
            .filter(|s| s.kind == StationaryKind::Minimum)
            .map(|s| s.x.to_string())
            .collect();
        format!(
            "{label},{},{},{},{},{}",
            self.degree,
            coef.join(","),
            minima.join(";"),
            self.pearson.map(|v| v.to_string()).unwrap_or_default(),
            self.residual_sum_squares
        )
    }
}

pub const POLY_CSV_HEADER: &str = "fit,degree,c0,c1,c2,c3,minima,pearson,rss";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

impl Gaussian {
    fn log_density(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        -0.5 * z * z - self.sd.ln() - 0.5 * (2.0 * PI).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BimodalFit {
    /// Ordered by mean.
    pub components: [Gaussian; 2],
    /// Mean log-likelihood per sample after each iteration.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
    pub restarted: bool,
}

const EM_TOL: f64 = 1e-8;
const EM_MAX_ITER: usize = 500;
const HIST_BINS: usize = 50;

/// Centres of the two most populated local-maximum histogram bins, or the
/// quartiles when the histogram has a single mode.
fn histogram_modes(s: &[f64]) -> (f64, f64) {
    let (lo, hi) = (s[0], s[s.len() - 1]);
    let w = (hi - lo) / HIST_BINS as f64;
    let mut counts = [0usize; HIST_BINS];
    for v in s {
        counts[(((v - lo) / w) as usize).min(HIST_BINS - 1)] += 1;
    }
    let mut modes: Vec<usize> = (0..HIST_BINS)
        .filter(|&i| {
            let left = if i == 0 { 0 } else { counts[i - 1] };
            let right = if i + 1 == HIST_BINS { 0 } else { counts[i + 1] };
            counts[i] > 0 && counts[i] > left && counts[i] >= right
        })
        .collect();
    modes.sort_by(|a, b| counts[*b].cmp(&counts[*a]).then(a.cmp(b)));
    match modes[..] {
        [a, b, ..] => {
            let c = |i: usize| lo + (i as f64 + 0.5) * w;
            (c(a.min(b)), c(a.max(b)))
        }
        _ => (quantile_sorted(s, 0.25), quantile_sorted(s, 0.75)),
    }
}

/// A few rounds of two-centre k-means from the given centres.
fn kmeans_init(x: &[f64], mut c: (f64, f64)) -> [Gaussian; 2] {
    let mut groups = (Vec::new(), Vec::new());
    for _ in 0..10 {
        groups = (Vec::new(), Vec::new());
        for v in x {
            if (v - c.0).abs() <= (v - c.1).abs() {
                groups.0.push(*v);
            } else {
                groups.1.push(*v);
            }
        }
        if groups.0.is_empty() || groups.1.is_empty() {
            break;
        }
        c = (mean(&groups.0), mean(&groups.1));
    }
    let overall = population_sd(x);
    let make = |g: &Vec<f64>, centre: f64| Gaussian {
        weight: (g.len().max(1)) as f64 / (x.len() + 1) as f64,
        mean: centre,
        sd: if g.len() > 1 {
            population_sd(g).max(overall * 1e-3)
        } else {
            overall
        },
    };
    let (a, b) = (make(&groups.0, c.0), make(&groups.1, c.1));
    let total = a.weight + b.weight;
    [
        Gaussian {
            weight: a.weight / total,
            ..a
        },
        Gaussian {
            weight: b.weight / total,
            ..b
        },
    ]
}

enum EmOutcome {
    Done(BimodalFit),
    Collapsed,
}

fn run_em(x: &[f64], mut comp: [Gaussian; 2], floor: f64) -> EmOutcome {
    let n = x.len() as f64;
    let mut trace = Vec::new();
    let mut resp = vec![0.0; x.len()];
    let mut converged = false;
    for _ in 0..EM_MAX_ITER {
        // E-step, accumulating the log-likelihood of the current parameters
        let mut ll = 0.0;
        for (r, v) in resp.iter_mut().zip(x) {
            let a = comp[0].weight.ln() + comp[0].log_density(*v);
            let b = comp[1].weight.ln() + comp[1].log_density(*v);
            let m = a.max(b);
            let lse = m + ((a - m).exp() + (b - m).exp()).ln();
            ll += lse;
            *r = (a - lse).exp();
        }
        let ll = ll / n;
        let done = trace
            .last()
            .is_some_and(|prev: &f64| (ll - prev).abs() < EM_TOL);
        trace.push(ll);
        if done {
            converged = true;
            break;
        }
        // M-step
        let w0: f64 = resp.iter().sum();
        let w1 = n - w0;
        if w0 <= 0.0 || w1 <= 0.0 {
            return EmOutcome::Collapsed;
        }
        let m0 = resp.iter().zip(x).map(|(r, v)| r * v).sum::<f64>() / w0;
        let m1 = resp.iter().zip(x).map(|(r, v)| (1.0 - r) * v).sum::<f64>() / w1;
        let v0 = resp
            .iter()
            .zip(x)
            .map(|(r, v)| r * (v - m0).powi(2))
            .sum::<f64>()
            / w0;
        let v1 = resp
            .iter()
            .zip(x)
            .map(|(r, v)| (1.0 - r) * (v - m1).powi(2))
            .sum::<f64>()
            / w1;
        let (s0, s1) = (v0.sqrt(), v1.sqrt());
        if !(s0 >= floor && s1 >= floor) {
            return EmOutcome::Collapsed;
        }
        comp = [
            Gaussian {
                weight: w0 / n,
                mean: m0,
                sd: s0,
            },
            Gaussian {
                weight: w1 / n,
                mean: m1,
                sd: s1,
            },
        ];
    }
    if comp[0].mean > comp[1].mean {
        comp.swap(0, 1);
    }
    EmOutcome::Done(BimodalFit {
        components: comp,
        log_likelihood: trace,
        converged,
        restarted: false,
    })
}

/// Two-component Gaussian mixture fitted by expectation–maximization,
/// initialized from the two main histogram modes.
pub fn fit_bimodal(values: &[f64]) -> Result<BimodalFit> {
    let s = sorted(values);
    if s.is_empty() || s[0] == s[s.len() - 1] {
        return Err(Error::Data(
            "mixture fit needs at least two distinct values".into(),
        ));
    }
    if !s.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("non-finite value in mixture input".into()));
    }
    let range = s[s.len() - 1] - s[0];
    let floor = 1e-6 * range;
    let (a, b) = histogram_modes(&s);
    if let EmOutcome::Done(fit) = run_em(values, kmeans_init(values, (a, b)), floor) {
        return Ok(fit);
    }
    let (q1, q3) = (quantile_sorted(&s, 0.25), quantile_sorted(&s, 0.75));
    let perturbed = ((a + q1) / 2.0, (b + q3) / 2.0);
    match run_em(values, kmeans_init(values, perturbed), floor) {
        EmOutcome::Done(mut fit) => {
            fit.restarted = true;
            Ok(fit)
        }
        EmOutcome::Collapsed => Err(Error::Numeric("mixture component collapsed twice".into())),
    }
}

impl BimodalFit {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("component,weight,mean,sd\n");
        for (k, c) in self.components.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", k + 1, c.weight, c.mean, c.sd);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, StandardNormal};

    fn sine(n: usize, period: f64) -> Vec<f64> {
        (0..n)
            .map(|t| (2.0 * PI * t as f64 / period).sin())
            .collect()
    }

    #[test]
    fn single_tone_peak() {
        let p = periodogram(&sine(240, 24.0)).unwrap();
        let (f, _) = p.peaks(1)[0];
        assert!((f - 1.0 / 24.0).abs() < 1e-12);
        assert!(p.frequency.iter().all(|f| (0.0..=0.5).contains(f)));
    }

    #[test]
    fn two_tone_peaks() {
        let a = sine(1680, 24.0);
        let b = sine(1680, 168.0);
        let x: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u + 0.8 * v).collect();
        let mut f: Vec<f64> = periodogram(&x)
            .unwrap()
            .peaks(2)
            .iter()
            .map(|p| p.0)
            .collect();
        f.sort_by(f64::total_cmp);
        assert!((f[0] - 1.0 / 168.0).abs() < 1e-12);
        assert!((f[1] - 1.0 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series_has_no_power() {
        let p = periodogram(&[4.2; 64]).unwrap();
        assert!(p.power.iter().all(|v| v.abs() < 1e-20));
    }

    #[test]
    fn parseval_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [97, 128] {
            let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let p = periodogram(&x).unwrap();
            let total: f64 = p.power.iter().sum();
            let var = population_sd(&x).powi(2);
            assert!((total - n as f64 * var).abs() < 1e-6 * total);
        }
    }

    #[test]
    fn acf_properties() {
        let s = sine(24 * 200, 24.0);
        let r = acf(&s, 48).unwrap().unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15);
        assert!(r[24] > 0.99);
        assert_eq!(acf(&[2.0; 10], 3).unwrap(), None);
        assert!(acf(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn white_noise_acf_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = acf(&x, 50).unwrap().unwrap();
        let bound = 3.0 / (n as f64).sqrt();
        let inside = r[1..].iter().filter(|v| v.abs() < bound).count();
        assert!(inside as f64 >= 0.95 * 50.0);
    }

    #[test]
    fn planted_quadratic_minimum() {
        let x: Vec<f64> = (0..200).map(|k| k as f64 * 0.15).collect();
        let y: Vec<f64> = x.iter().map(|t| (t - 15.0).powi(2)).collect();
        let fit = fit_poly(&x, &y, 2).unwrap();
        let min = fit
            .stationary_points
            .iter()
            .find(|s| s.kind == StationaryKind::Minimum)
            .unwrap();
        assert!((min.x - 15.0).abs() < 0.01);
        assert!((fit.coefficients[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cubic_stationary_points() {
        // y = x³ − 3x has a maximum at −1 and a minimum at +1
        let x: Vec<f64> = (0..101).map(|k| -2.0 + k as f64 * 0.04).collect();
        let y: Vec<f64> = x.iter().map(|t| t.powi(3) - 3.0 * t).collect();
        let fit = fit_poly(&x, &y, 3).unwrap();
        let pts = &fit.stationary_points;
        assert_eq!(pts.len(), 2);
        assert!((pts[0].x + 1.0).abs() < 1e-9 && pts[0].kind == StationaryKind::Maximum);
        assert!((pts[1].x - 1.0).abs() < 1e-9 && pts[1].kind == StationaryKind::Minimum);
    }

    #[test]
    fn linear_fit_reports_correlation() {
        let x: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let fit = fit_poly(&x, &y, 1).unwrap();
        assert!((fit.pearson.unwrap() + 1.0).abs() < 1e-12);
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn constant_regressor_is_singular() {
        assert!(matches!(
            fit_poly(&[2.0; 10], &[1.0; 10], 2),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn nested_fits_do_not_lose_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 20.0).unwrap();
        let x: Vec<f64> = (0..500).map(|k| 5.0 + 30.0 * k as f64 / 500.0).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|t| 900.0 + 2.0 * (t - 16.0).powi(2) + noise.sample(&mut rng))
            .collect();
        let rss: Vec<f64> = (1..=3)
            .map(|d| fit_poly(&x, &y, d).unwrap().residual_sum_squares)
            .collect();
        assert!(rss[1] <= rss[0] && rss[2] <= rss[1] * (1.0 + 1e-12));
    }

    #[test]
    fn planted_mixture_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = Normal::new(0.0, 1.0).unwrap();
        let b = Normal::new(10.0, 1.0).unwrap();
        let x: Vec<f64> = (0..4000)
            .map(|k| {
                if k % 2 == 0 {
                    a.sample(&mut rng)
                } else {
                    b.sample(&mut rng)
                }
            })
            .collect();
        let fit = fit_bimodal(&x).unwrap();
        assert!(fit.components[0].mean.abs() < 0.1);
        assert!((fit.components[1].mean - 10.0).abs() < 0.1);
        assert!((fit.components[0].weight + fit.components[1].weight - 1.0).abs() < 1e-12);
        assert!(fit.log_likelihood.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn single_gaussian_gives_close_components() {
        for seed in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..10_000)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let fit = fit_bimodal(&x).unwrap();
            let [c0, c1] = fit.components;
            assert!((c1.mean - c0.mean).abs() < population_sd(&x), "{fit:?}");
        }
    }

    #[test]
    fn mixture_rejects_constant_input() {
        assert!(fit_bimodal(&[3.0; 20]).is_err());
    }
}
