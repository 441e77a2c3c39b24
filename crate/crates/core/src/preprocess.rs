//! Cleaning of the hourly table: gap imputation, three-sigma outlier
//! handling, wind vector decomposition and descriptive statistics.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{Field, HourlyTable};
use crate::stats;

/// Longest gap filled by linear interpolation.
pub const SHORT_GAP_MAX: usize = 4;
/// Longest gap filled from the same hour on neighbouring days.
pub const LONG_GAP_MAX: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct Imputation {
    pub values: Vec<Option<f64>>,
    /// Hours filled by linear interpolation.
    pub short_filled: usize,
    /// Hours filled by the previous/next-day average.
    pub long_filled: usize,
    /// Gaps longer than a day, left empty: (start index, length).
    pub too_long: Vec<(usize, usize)>,
    /// Fillable-length gaps lacking the neighbours their rule needs.
    pub unresolved: Vec<(usize, usize)>,
}

impl Imputation {
    /// Values as plain reals; fails while any gap remains.
    pub fn into_complete(self) -> Result<Vec<f64>> {
        let mut open = self.too_long;
        open.extend(self.unresolved);
        if !open.is_empty() {
            open.sort_unstable();
            return Err(Error::UnresolvedGap(open));
        }
        Ok(self
            .values
            .into_iter()
            .map(|v| v.expect("no gaps remain"))
            .collect())
    }
}

fn gaps(series: &[Option<f64>]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < series.len() {
        if series[i].is_none() {
            let start = i;
            while i < series.len() && series[i].is_none() {
                i += 1;
            }
            out.push((start, i - start));
        } else {
            i += 1;
        }
    }
    out
}

/// Fills what can be filled and records the rest without failing.
fn fill_gaps(series: &[Option<f64>]) -> Imputation {
    let n = series.len();
    let mut values = series.to_vec();
    let mut out = Imputation {
        values: Vec::new(),
        short_filled: 0,
        long_filled: 0,
        too_long: Vec::new(),
        unresolved: Vec::new(),
    };
    let all_gaps = gaps(series);

    for &(start, len) in all_gaps.iter().filter(|(_, len)| *len <= SHORT_GAP_MAX) {
        if start == 0 || start + len >= n {
            out.unresolved.push((start, len));
            continue;
        }
        let (a, b) = (
            series[start - 1].expect("gap boundary"),
            series[start + len].expect("gap boundary"),
        );
        for k in 0..len {
            let frac = (k + 1) as f64 / (len + 1) as f64;
            values[start + k] = Some(a + (b - a) * frac);
        }
        out.short_filled += len;
    }

    // Day-neighbour rule reads the series after short gaps are filled, never
    // other long-gap fills, so results do not depend on processing order.
    let after_short = values.clone();
    for &(start, len) in all_gaps
        .iter()
        .filter(|(_, len)| (SHORT_GAP_MAX + 1..=LONG_GAP_MAX).contains(len))
    {
        let fills: Option<Vec<f64>> = (start..start + len)
            .map(|j| {
                let prev = j.checked_sub(24).and_then(|p| after_short[p])?;
                let next = after_short.get(j + 24).copied().flatten()?;
                Some(0.5 * (prev + next))
            })
            .collect();
        match fills {
            Some(fills) => {
                for (k, v) in fills.into_iter().enumerate() {
                    values[start + k] = Some(v);
                }
                out.long_filled += len;
            }
            None => out.unresolved.push((start, len)),
        }
    }

    out.too_long = all_gaps
        .into_iter()
        .filter(|(_, len)| *len > LONG_GAP_MAX)
        .collect();
    out.values = values;
    out
}

/// Fills 1–4 h gaps by linear interpolation between the bounding
/// observations and 5–24 h gaps by the mean of the same hour on the previous
/// and following day. Longer gaps are reported in [`Imputation::too_long`].
///
/// Fails with [`Error::UnresolvedGap`] when a fillable gap lacks the
/// neighbours its rule needs (for example at the series boundary).
pub fn impute_gaps(series: &[Option<f64>]) -> Result<Imputation> {
    let imputation = fill_gaps(series);
    if !imputation.unresolved.is_empty() {
        return Err(Error::UnresolvedGap(imputation.unresolved));
    }
    Ok(imputation)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outlier {
    Normal,
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierMask(pub Vec<Outlier>);

impl OutlierMask {
    pub fn none(n: usize) -> Self {
        OutlierMask(vec![Outlier::Normal; n])
    }

    pub fn is_flagged(&self, i: usize) -> bool {
        self.0[i] != Outlier::Normal
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|o| **o != Outlier::Normal).count()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierDetection {
    pub lower: f64,
    pub upper: f64,
    pub mask: OutlierMask,
}

fn classify(x: f64, lower: f64, upper: f64) -> Outlier {
    if x < lower {
        Outlier::Low
    } else if x > upper {
        Outlier::High
    } else {
        Outlier::Normal
    }
}

/// Flags values outside `mean ± 3·sd` computed over the whole series
/// (population standard deviation). A constant series gets zero-width
/// bounds and no flags.
pub fn detect_outliers(series: &[f64]) -> OutlierDetection {
    let mean = stats::mean(series);
    let sd = stats::population_sd(series);
    let (lower, upper) = (mean - 3.0 * sd, mean + 3.0 * sd);
    let mask = series.iter().map(|x| classify(*x, lower, upper)).collect();
    OutlierDetection {
        lower,
        upper,
        mask: OutlierMask(mask),
    }
}

/// Per-day variant: bounds from each 24-hour block's own mean and sd.
/// Returns one `(lower, upper)` pair per block.
pub fn detect_outliers_daily(series: &[f64]) -> (Vec<(f64, f64)>, OutlierMask) {
    let mut bounds = Vec::new();
    let mut mask = Vec::with_capacity(series.len());
    for day in series.chunks(24) {
        let mean = stats::mean(day);
        let sd = stats::population_sd(day);
        let (lo, hi) = (mean - 3.0 * sd, mean + 3.0 * sd);
        bounds.push((lo, hi));
        mask.extend(day.iter().map(|x| classify(*x, lo, hi)));
    }
    (bounds, OutlierMask(mask))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CorrectionPolicy {
    Retain,
    /// Replace every flagged run using the gap-imputation rules.
    Interpolate,
    /// Replace low outliers, keep high ones.
    InterpolateLow,
}

/// Applies `policy` to flagged values. Flagged runs the imputation rules
/// cannot resolve keep their original values. Returns the series and the
/// number of values changed.
pub fn correct_outliers(
    series: &[f64],
    mask: &OutlierMask,
    policy: CorrectionPolicy,
) -> (Vec<f64>, usize) {
    let replace = |o: Outlier| match policy {
        CorrectionPolicy::Retain => false,
        CorrectionPolicy::Interpolate => o != Outlier::Normal,
        CorrectionPolicy::InterpolateLow => o == Outlier::Low,
    };
    let holed: Vec<Option<f64>> = series
        .iter()
        .zip(&mask.0)
        .map(|(x, o)| (!replace(*o)).then_some(*x))
        .collect();
    if holed.iter().all(Option::is_some) {
        return (series.to_vec(), 0);
    }
    let filled = fill_gaps(&holed);
    for (start, len) in filled.unresolved.iter().chain(&filled.too_long) {
        log::warn!("outlier run at index {start} (+{len} h) could not be replaced; retained");
    }
    let mut corrected = 0;
    let out = filled
        .values
        .iter()
        .zip(series)
        .map(|(f, orig)| match f {
            Some(v) if bits_differ(*v, *orig) => {
                corrected += 1;
                *v
            }
            Some(v) => *v,
            None => *orig,
        })
        .collect();
    (out, corrected)
}

fn bits_differ(new: f64, old: f64) -> bool {
    new.to_bits() != old.to_bits()
}

/// Zonal (u) and meridional (v) wind components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindComponents {
    pub u: f64,
    pub v: f64,
}

/// Converts meteorological direction (degrees the wind blows *from*) and
/// speed into u/v components: `u = -ws·sin θ`, `v = -ws·cos θ`.
pub fn decompose_wind(wd: f64, ws: f64) -> WindComponents {
    let theta = wd.rem_euclid(360.0).to_radians();
    WindComponents {
        u: -ws * theta.sin(),
        v: -ws * theta.cos(),
    }
}

/// Direction (degrees, `[0, 360)`) the wind blows from; `None` when calm.
pub fn wind_direction(c: WindComponents) -> Option<f64> {
    if c.u == 0.0 && c.v == 0.0 {
        return None;
    }
    Some((-c.u).atan2(-c.v).to_degrees().rem_euclid(360.0))
}

/// Descriptive statistics of one variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Description {
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
    pub median: f64,
    pub iqr: f64,
    /// Population skewness; 0 when `degenerate`.
    pub skewness: f64,
    /// Population excess kurtosis; 0 when `degenerate`.
    pub kurtosis: f64,
    /// Set when the series is constant and the shape moments are undefined.
    pub degenerate: bool,
}

pub fn describe(series: &[f64]) -> Result<Description> {
    if series.is_empty() {
        return Err(Error::Data("cannot describe an empty series".into()));
    }
    let n = series.len() as f64;
    let mean = stats::mean(series);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in series {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let sorted = stats::sorted(series);
    let degenerate = m2 == 0.0;
    Ok(Description {
        n: series.len(),
        mean,
        sd: m2.sqrt(),
        median: stats::quantile_sorted(&sorted, 0.5),
        iqr: stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25),
        skewness: if degenerate { 0.0 } else { m3 / m2.powf(1.5) },
        kurtosis: if degenerate {
            0.0
        } else {
            m4 / (m2 * m2) - 3.0
        },
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum BoundsMode {
    #[default]
    Global,
    Daily,
}

/// One row of the cleaning report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableReport {
    pub variable: String,
    pub description: Description,
    pub lower: f64,
    pub upper: f64,
    pub outliers: usize,
    pub corrected: usize,
    pub missing: usize,
    pub imputed_short: usize,
    pub imputed_long: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CleaningReport {
    pub rows: Vec<VariableReport>,
}

impl CleaningReport {
    pub fn get(&self, field: Field) -> Option<&VariableReport> {
        self.rows.iter().find(|r| r.variable == field.name())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from(
            "variable,mean,sd,median,iqr,skewness,kurtosis,lb,ub,outliers,missing,imputed_short,imputed_long,corrected\n",
        );
        for r in &self.rows {
            let d = &r.description;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.variable,
                d.mean,
                d.sd,
                d.median,
                d.iqr,
                d.skewness,
                d.kurtosis,
                r.lower,
                r.upper,
                r.outliers,
                r.missing,
                r.imputed_short,
                r.imputed_long,
                r.corrected
            ));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

/// Correction applied to each cleaned variable.
pub fn policy_for(field: Field) -> CorrectionPolicy {
    match field {
        Field::Demand => CorrectionPolicy::InterpolateLow,
        Field::Ws => CorrectionPolicy::Interpolate,
        _ => CorrectionPolicy::Retain,
    }
}

pub const CLEANED_FIELDS: [Field; 10] = [
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
];

fn clean_variable(
    table: &HourlyTable,
    field: Field,
    mode: BoundsMode,
) -> Result<(Vec<f64>, VariableReport)> {
    let imputation = impute_gaps(&table.series(field)).map_err(|e| match e {
        Error::UnresolvedGap(g) => Error::Data(format!(
            "{}: unresolved gaps starting at {}",
            field.name(),
            g.iter()
                .map(|(s, l)| format!("{} (+{l} h)", table.timestamp(*s)))
                .collect::<Vec<_>>()
                .join(", ")
        )),
        other => other,
    })?;
    let (short, long) = (imputation.short_filled, imputation.long_filled);
    let complete = imputation.into_complete().map_err(|e| match e {
        Error::UnresolvedGap(g) => Error::Data(format!(
            "{}: gap(s) longer than {LONG_GAP_MAX} h starting at {}",
            field.name(),
            g.iter()
                .map(|(s, _)| table.timestamp(*s).to_string())
                .collect::<Vec<_>>()
                .join(", ")
        )),
        other => other,
    })?;

    let (lower, upper, mask) = match mode {
        BoundsMode::Global => {
            let d = detect_outliers(&complete);
            (d.lower, d.upper, d.mask)
        }
        BoundsMode::Daily => {
            let (bounds, mask) = detect_outliers_daily(&complete);
            let lo = bounds.iter().map(|b| b.0).fold(f64::INFINITY, f64::min);
            let hi = bounds.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max);
            (lo, hi, mask)
        }
    };
    let description = describe(&complete)?;
    let (cleaned, corrected) = correct_outliers(&complete, &mask, policy_for(field));
    Ok((
        cleaned,
        VariableReport {
            variable: field.name().to_string(),
            description,
            lower,
            upper,
            outliers: mask.count(),
            corrected,
            missing: table.missing_count(field),
            imputed_short: short,
            imputed_long: long,
        },
    ))
}

/// Runs imputation, outlier detection and correction on every measured
/// variable. Statistics describe the imputed series before correction.
pub fn clean_table(table: &HourlyTable, mode: BoundsMode) -> Result<(HourlyTable, CleaningReport)> {
    let results: Vec<_> = CLEANED_FIELDS
        .par_iter()
        .map(|f| clean_variable(table, *f, mode).map(|r| (*f, r)))
        .collect::<Result<_>>()?;
    let mut cleaned = table.clone();
    let mut rows = Vec::with_capacity(results.len());
    for (field, (values, report)) in results {
        cleaned.replace_values(field, values)?;
        rows.push(report);
    }
    Ok((cleaned, CleaningReport { rows }))
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn some(xs: &[f64]) -> Vec<Option<f64>> {
        xs.iter().map(|x| Some(*x)).collect()
    }

    #[test]
    fn short_gap_is_linear() {
        let s = vec![Some(10.0), None, None, Some(16.0)];
        let out = impute_gaps(&s).unwrap();
        assert_eq!(out.short_filled, 2);
        assert_eq!(out.into_complete().unwrap(), vec![10.0, 12.0, 14.0, 16.0]);
    }

    #[test]
    fn long_gap_uses_neighbouring_days() {
        let mut s: Vec<Option<f64>> = (0..72).map(|h| Some(h as f64 * 1.5)).collect();
        for v in &mut s[30..36] {
            *v = None;
        }
        let out = impute_gaps(&s).unwrap();
        assert_eq!(out.long_filled, 6);
        let v = out.into_complete().unwrap();
        for j in 30..36 {
            let expected = 0.5 * ((j - 24) as f64 * 1.5 + (j + 24) as f64 * 1.5);
            assert_eq!(v[j], expected);
        }
    }

    #[test]
    fn no_gaps_is_identity() {
        let s = some(&[1.0, 5.0, -2.0]);
        let out = impute_gaps(&s).unwrap();
        assert_eq!(out.values, s);
        assert_eq!(out.short_filled + out.long_filled, 0);
    }

    #[test]
    fn boundary_gap_is_an_error() {
        let s = vec![None, Some(1.0), Some(2.0)];
        match impute_gaps(&s) {
            Err(Error::UnresolvedGap(g)) => assert_eq!(g, vec![(0, 1)]),
            other => panic!("{other:?}"),
        }
        // a 5 h gap in the first day has no previous-day neighbour
        let mut s: Vec<Option<f64>> = (0..60).map(|h| Some(h as f64)).collect();
        for v in &mut s[2..8] {
            *v = None;
        }
        assert!(matches!(impute_gaps(&s), Err(Error::UnresolvedGap(_))));
    }

    #[test]
    fn gaps_longer_than_a_day_are_reported() {
        let mut s: Vec<Option<f64>> = (0..100).map(|h| Some(h as f64)).collect();
        for v in &mut s[40..70] {
            *v = None;
        }
        let out = impute_gaps(&s).unwrap();
        assert_eq!(out.too_long, vec![(40, 30)]);
        assert!(matches!(out.into_complete(), Err(Error::UnresolvedGap(_))));
    }

    #[test]
    fn three_sigma_flags_quarter_percent_of_normal_draws() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let d = detect_outliers(&xs);
        let pct = 100.0 * d.mask.count() as f64 / xs.len() as f64;
        assert!((pct - 0.27).abs() <= 0.05, "{pct}");
    }

    #[test]
    fn constant_series_has_no_outliers() {
        let d = detect_outliers(&[4.0; 50]);
        assert_eq!(d.lower, d.upper);
        assert_eq!(d.mask.count(), 0);
    }

    #[test]
    fn daily_bounds_are_per_block() {
        let mut xs = vec![0.0; 48];
        for (i, x) in xs.iter_mut().enumerate() {
            *x = if i < 24 {
                (i % 2) as f64
            } else {
                100.0 + (i % 2) as f64
            };
        }
        xs[30] = 1e6;
        let (bounds, mask) = detect_outliers_daily(&xs);
        assert_eq!(bounds.len(), 2);
        assert!(mask.is_flagged(30));
        assert_eq!(mask.count(), 1);
    }

    #[test]
    fn retain_and_empty_mask_are_identity() {
        let xs = [1.0, 2.0, 100.0, 3.0];
        let d = detect_outliers(&xs);
        assert_eq!(
            correct_outliers(&xs, &d.mask, CorrectionPolicy::Retain).0,
            xs
        );
        let none = OutlierMask::none(4);
        assert_eq!(
            correct_outliers(&xs, &none, CorrectionPolicy::Interpolate),
            (xs.to_vec(), 0)
        );
    }

    #[test]
    fn blackout_run_replaced_by_day_average() {
        // three days of a clean daily cycle, with a 10 h collapse on day two
        let cycle =
            |h: usize| 1000.0 + 200.0 * ((h % 24) as f64 / 24.0 * std::f64::consts::TAU).sin();
        let mut xs: Vec<f64> = (0..72).map(cycle).collect();
        let mut mask = OutlierMask::none(72);
        for h in 31..41 {
            xs[h] = 50.0;
            mask.0[h] = Outlier::Low;
        }
        mask.0[10] = Outlier::High;
        let (fixed, n) = correct_outliers(&xs, &mask, CorrectionPolicy::InterpolateLow);
        assert_eq!(n, 10);
        for h in 31..41 {
            assert!((fixed[h] - 0.5 * (cycle(h - 24) + cycle(h + 24))).abs() < 1e-9);
        }
        assert_eq!(fixed[10], xs[10], "upper outliers retained");
    }

    #[test]
    fn wind_reference_directions() {
        let e = decompose_wind(90.0, 10.0);
        assert!((e.u + 10.0).abs() < 1e-12 && e.v.abs() < 1e-12);
        let s = decompose_wind(180.0, 5.0);
        assert!(s.u.abs() < 1e-12 && (s.v - 5.0).abs() < 1e-12);
        assert_eq!(
            decompose_wind(123.0, 0.0),
            WindComponents { u: -0.0, v: -0.0 }
        );
        assert_eq!(decompose_wind(360.0, 3.0), decompose_wind(0.0, 3.0));
    }

    #[test]
    fn describe_small_series() {
        let d = describe(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(d.mean, 3.0);
        assert_eq!(d.median, 3.0);
        assert!((d.sd - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(d.iqr, 2.0);
        assert_eq!(d.skewness, 0.0);
        // population excess kurtosis of a discrete uniform on 5 points
        assert!((d.kurtosis - (6.8 / 4.0 - 3.0)).abs() < 1e-12);
        assert!(!d.degenerate);
    }

    #[test]
    fn describe_constant_and_empty() {
        let d = describe(&[2.0; 10]).unwrap();
        assert_eq!(
            (d.sd, d.skewness, d.kurtosis, d.degenerate),
            (0.0, 0.0, 0.0, true)
        );
        assert!(describe(&[]).is_err());
    }

    proptest! {
        #[test]
        fn imputation_is_idempotent(
            values in prop::collection::vec(prop::option::weighted(0.8, -100.0..100.0f64), 1..200)
        ) {
            let once = fill_gaps(&values);
            let twice = fill_gaps(&once.values);
            prop_assert_eq!(&twice.values, &once.values);
        }

        #[test]
        fn flag_count_matches_bounds(values in prop::collection::vec(-1e3..1e3f64, 2..300)) {
            let d = detect_outliers(&values);
            let outside = values.iter().filter(|x| **x < d.lower || **x > d.upper).count();
            prop_assert_eq!(d.mask.count(), outside);
        }

        #[test]
        fn wind_magnitude_and_direction_round_trip(wd in 0.0..360.0f64, ws in 0.01..100.0f64) {
            let c = decompose_wind(wd, ws);
            prop_assert!((c.u.hypot(c.v) - ws).abs() <= 1e-9 * ws);
            let back = wind_direction(c).unwrap();
            let diff = (back - wd).rem_euclid(360.0);
            prop_assert!(diff.min(360.0 - diff) < 1e-6);
        }
    }
}
