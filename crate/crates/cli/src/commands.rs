//! One function per subcommand. Every stage reads its input from the work
//! directory and writes its output there.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};

use loadcast::analysis::{
    acf, acf_csv, fit_bimodal, fit_poly, fit_poly_by_month, periodogram, POLY_CSV_HEADER,
};
use loadcast::baseline::{fit_forest, flat_rows, importance_csv, importance_report};
use loadcast::eval::{
    box_stats, extrema_timing, group_errors, residual_histogram, residuals, residuals_csv,
    GroupKey, Residual,
};
use loadcast::features::{Dataset, SplitTag};
use loadcast::harness::{run_plan, with_workers, ExperimentPlan, GridResults, OutputLayout};
use loadcast::ingest::Field;
use loadcast::ingest::{
    ingest_with, parse_demand_csv, parse_timestamp, HourlyTable, SourcePaths, SourceSchema, Span,
};
use loadcast::metrics::{compute_all, results_csv, ResultLine};
use loadcast::nn::Checkpoint;
use loadcast::preprocess::clean_table;
use loadcast::svg::{bar_chart, box_chart, line_chart, scatter_chart, Series};
use loadcast::synthetic::generate;
use loadcast::train::{fit, predict, TrainConfig, TrainTrace};

use crate::config::{CliConfig, Resolved};
use crate::{CliError, Command};

pub const TABLE: &str = "table.htab";
pub const CLEAN: &str = "clean.htab";
pub const DATASET: &str = "dataset.wdst";
pub const MODEL: &str = "model.ckpt";
pub const TRACE: &str = "trace.csv";
const TIMESTAMP: &str = "%Y-%m-%d %H:%M";
const WEEKDAYS: [&str; 7] = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"];

pub struct Context {
    pub workdir: PathBuf,
    pub config: CliConfig,
    pub resolved: Resolved,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.workdir.join(name)
    }

    /// A stage input, or an error naming the subcommand that produces it.
    fn need(&self, name: &str, producer: &str) -> Result<PathBuf, CliError> {
        let p = self.path(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(CliError::Data(format!(
                "missing {}; run `loadcast {producer}` first",
                p.display()
            )))
        }
    }

    fn dataset(&self) -> Result<Dataset, CliError> {
        Ok(Dataset::load(&self.need(DATASET, "featurize")?)?)
    }

    fn train_config(&self, data: &Dataset) -> TrainConfig {
        let mut t = self.resolved.train.clone();
        if t.feature_set != data.config.feature_set {
            log::warn!("dataset was built with a different feature set; training on the dataset's");
            t.feature_set = data.config.feature_set;
        }
        t
    }
}

pub fn dispatch(ctx: &Context, command: &Command) -> Result<(), CliError> {
    with_workers(ctx.config.run.workers, || run_command(ctx, command))?
}

fn run_command(ctx: &Context, command: &Command) -> Result<(), CliError> {
    match command {
        Command::Generate { days } => cmd_generate(ctx, days.unwrap_or(ctx.config.synthetic.days)),
        Command::Ingest => cmd_ingest(ctx),
        Command::Preprocess => cmd_preprocess(ctx),
        Command::Featurize => cmd_featurize(ctx),
        Command::Train => cmd_train(ctx),
        Command::Evaluate { predictions } => match predictions {
            Some(p) => cmd_evaluate_file(ctx, p),
            None => cmd_evaluate(ctx),
        },
        Command::GridArch => {
            let data = ctx.dataset()?;
            let plan = ExperimentPlan::architecture_grid(
                &ctx.train_config(&data),
                &ctx.resolved.architectures,
            )?;
            run_grid(ctx, &plan, &data, "grids/arch")
        }
        Command::GridHyper => {
            let data = ctx.dataset()?;
            let plan =
                ExperimentPlan::hyper_grid(&ctx.train_config(&data), &ctx.config.grid.batches)?;
            run_grid(ctx, &plan, &data, "grids/hyper")
        }
        Command::SeedStudy { runs } => {
            let data = ctx.dataset()?;
            let n = runs.unwrap_or(ctx.config.grid.seed_runs);
            let plan = ExperimentPlan::seed_study(&ctx.train_config(&data), n)?;
            run_grid(ctx, &plan, &data, "grids/seeds")
        }
        Command::BaselineRf => cmd_baseline(ctx),
        Command::Analyze => cmd_analyze(ctx),
        Command::Report => cmd_report(ctx),
    }
}

fn cmd_generate(ctx: &Context, days: usize) -> Result<(), CliError> {
    let sources = generate(days, ctx.config.run.seed)?;
    let dir = ctx.config.raw_dir(&ctx.workdir);
    sources.write(&dir)?;
    log::info!(
        "generate: {days} days ({} hours) of sources in {}",
        sources.span.hours(),
        dir.display()
    );
    Ok(())
}

fn schema(ctx: &Context) -> Result<SourceSchema, CliError> {
    let p = &ctx.config.paths.schema;
    if p.as_os_str().is_empty() {
        return Ok(SourceSchema::default());
    }
    let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("schema {}: {e}", p.display())))
}

fn cmd_ingest(ctx: &Context) -> Result<(), CliError> {
    let raw = ctx.config.raw_dir(&ctx.workdir);
    let paths = SourcePaths::in_dir(&raw);
    if !paths.demand.exists() {
        return Err(CliError::Data(format!(
            "missing {}; place the raw sources there or run `loadcast generate`",
            paths.demand.display()
        )));
    }
    let schema = schema(ctx)?;
    let (first, last) = match (ctx.resolved.first_day, ctx.resolved.last_day) {
        (Some(a), Some(b)) => (a, b),
        (a, b) => {
            let rows = parse_demand_csv(&paths.demand, &schema.demand)?;
            let dates: Vec<NaiveDate> = rows.iter().map(|r| r.timestamp.date()).collect();
            let lo = dates.iter().min().copied();
            let hi = dates.iter().max().copied();
            match (a.or(lo), b.or(hi)) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(CliError::Data(
                        "demand file has no rows to infer the span from".into(),
                    ))
                }
            }
        }
    };
    let table = ingest_with(&paths, Span::new(first, last)?, &schema)?;
    table.persist(&ctx.path(TABLE))?;
    let mut summary = String::from("field,missing\n");
    for f in Field::ALL {
        let _ = writeln!(summary, "{},{}", f.name(), table.missing_count(f));
    }
    write(&ctx.path("ingest_summary.csv"), summary)?;
    let missing: usize = Field::ALL.iter().map(|f| table.missing_count(*f)).sum();
    log::info!(
        "ingest: {} hourly rows {first}..{last}, {missing} missing cells",
        table.len()
    );
    Ok(())
}

fn cmd_preprocess(ctx: &Context) -> Result<(), CliError> {
    let table = HourlyTable::load(&ctx.need(TABLE, "ingest")?)?;
    let (clean, report) = clean_table(&table, ctx.resolved.bounds)?;
    clean.persist(&ctx.path(CLEAN))?;
    report.write_csv(&ctx.path("cleaning_report.csv"))?;
    let outliers: usize = report.rows.iter().map(|r| r.outliers).sum();
    let imputed: usize = report
        .rows
        .iter()
        .map(|r| r.imputed_short + r.imputed_long)
        .sum();
    log::info!("preprocess: {imputed} cells imputed, {outliers} outliers flagged");
    Ok(())
}

fn cmd_featurize(ctx: &Context) -> Result<(), CliError> {
    let clean = HourlyTable::load(&ctx.need(CLEAN, "preprocess")?)?;
    let data = Dataset::build(&clean, ctx.resolved.dataset.clone())?;
    data.persist(&ctx.path(DATASET))?;
    let (a, b, c) = data.plan.counts();
    log::info!(
        "featurize: {} features, samples train {a} / val {b} / test {c}",
        data.width()
    );
    Ok(())
}

fn cmd_train(ctx: &Context) -> Result<(), CliError> {
    let data = ctx.dataset()?;
    let config = ctx.train_config(&data);
    let train = data.split(SplitTag::Train);
    let val = data.split(SplitTag::Val);
    match fit(&config, &train, &val) {
        Ok(out) => {
            out.trace.write_csv(&ctx.path(TRACE))?;
            Checkpoint {
                network: out.network,
                features: data.feature_names(),
                normalization: Some(data.norm.clone()),
                seed: config.seed,
            }
            .save(&ctx.path(MODEL))?;
            log::info!(
                "train: {} epochs, best epoch {} (val loss {:.6}), {:.1} s",
                out.trace.epochs.len(),
                out.trace.best_epoch,
                out.trace.best_val_loss().unwrap_or(f64::NAN),
                out.trace.total_seconds()
            );
            Ok(())
        }
        Err(e) => {
            e.trace.write_csv(&ctx.path(TRACE))?;
            Err(e.error.into())
        }
    }
}

/// Test-split predictions in MW, as the report consumes them.
fn predictions_csv(ts: &[NaiveDateTime], y: &[f64], yhat: &[f64], holiday: &[bool]) -> String {
    let mut out = String::from("timestamp,actual,predicted,holiday\n");
    for k in 0..y.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            ts[k].format(TIMESTAMP),
            y[k],
            yhat[k],
            u8::from(holiday[k])
        );
    }
    out
}

/// Error analyses over one prediction series, written under `dir`.
fn write_error_analyses(
    dir: &Path,
    ts: &[NaiveDateTime],
    y: &[f64],
    yhat: &[f64],
    holiday: &[bool],
    bin_width: f64,
) -> Result<(), CliError> {
    let res = residuals(ts, y, yhat, holiday)?;
    write(&dir.join("residuals.csv"), residuals_csv(&res))?;
    let errors: Vec<f64> = res.iter().map(|r| r.error).collect();
    write(
        &dir.join("residual_histogram.csv"),
        residual_histogram(&errors, bin_width)?.to_csv(),
    )?;
    for key in [GroupKey::Weekday, GroupKey::Hour] {
        let g = group_errors(&res, y, key)?;
        write(
            &dir.join(format!("errors_by_{}.csv", key.name())),
            g.to_csv(),
        )?;
    }
    let x = extrema_timing(ts, y, yhat)?;
    write(&dir.join("extrema.csv"), x.to_csv())?;
    write(&dir.join("extrema_summary.csv"), x.summary_csv())?;
    log::info!(
        "extrema over {} days: max exact {:.1}% / ±1 h {:.1}%, min exact {:.1}% / ±1 h {:.1}%",
        x.days.len(),
        x.max_exact_pct,
        x.max_within1_pct,
        x.min_exact_pct,
        x.min_within1_pct
    );
    Ok(())
}

fn cmd_evaluate(ctx: &Context) -> Result<(), CliError> {
    let data = ctx.dataset()?;
    let ckpt = Checkpoint::load(&ctx.need(MODEL, "train")?)?;
    if ckpt.features != data.feature_names() {
        return Err(CliError::Data(format!(
            "checkpoint features {:?} differ from the dataset's; rerun `loadcast train`",
            ckpt.features
        )));
    }
    let dir = ctx.path("eval");
    let mut lines = Vec::new();
    for tag in [SplitTag::Train, SplitTag::Val, SplitTag::Test] {
        let split = data.split(tag);
        let yhat: Vec<f64> = predict(&ckpt.network, &split)?
            .into_iter()
            .map(|v| data.norm.target.invert(v))
            .collect();
        let y = split.demand_mw();
        let report = compute_all(y, &yhat)?;
        log::info!(
            "evaluate {}: RMSE {:.2} MW, MAPE {}%, R2 {}",
            tag.name(),
            report.rmse,
            report.mape.map_or("n/a".into(), |v| format!("{v:.3}")),
            report.r2.map_or("n/a".into(), |v| format!("{v:.4}"))
        );
        lines.push(ResultLine {
            model_id: "lstm".into(),
            subset: tag.name().into(),
            report,
        });
        if tag == SplitTag::Test {
            write(
                &dir.join("predictions.csv"),
                predictions_csv(split.timestamps(), y, &yhat, split.holidays()),
            )?;
            write_error_analyses(
                &dir,
                split.timestamps(),
                y,
                &yhat,
                split.holidays(),
                ctx.config.analysis.bin_width,
            )?;
        }
    }
    write(&dir.join("results.csv"), results_csv(&lines))?;
    Ok(())
}

struct Predictions {
    ts: Vec<NaiveDateTime>,
    y: Vec<f64>,
    yhat: Vec<f64>,
    holiday: Vec<bool>,
}

fn read_predictions(path: &Path) -> Result<Predictions, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let bad =
        |row: usize, what: &str| CliError::Data(format!("{}: row {row}: {what}", path.display()));
    let mut p = Predictions {
        ts: Vec::new(),
        y: Vec::new(),
        yhat: Vec::new(),
        holiday: Vec::new(),
    };
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let row = i + 2;
        let num = |k: usize| rec.get(k).and_then(|v| v.trim().parse::<f64>().ok());
        p.ts.push(
            rec.get(0)
                .and_then(parse_timestamp)
                .ok_or_else(|| bad(row, "bad timestamp"))?,
        );
        p.y.push(num(1).ok_or_else(|| bad(row, "bad actual value"))?);
        p.yhat
            .push(num(2).ok_or_else(|| bad(row, "bad predicted value"))?);
        p.holiday.push(rec.get(3).is_some_and(|v| v.trim() == "1"));
    }
    Ok(p)
}

fn cmd_evaluate_file(ctx: &Context, path: &Path) -> Result<(), CliError> {
    let p = read_predictions(path)?;
    let report = compute_all(&p.y, &p.yhat)?;
    let dir = ctx.path("eval");
    let line = ResultLine {
        model_id: "predictions".into(),
        subset: "all".into(),
        report,
    };
    write(
        &dir.join("results.csv"),
        results_csv(std::slice::from_ref(&line)),
    )?;
    write(
        &dir.join("predictions.csv"),
        predictions_csv(&p.ts, &p.y, &p.yhat, &p.holiday),
    )?;
    write_error_analyses(
        &dir,
        &p.ts,
        &p.y,
        &p.yhat,
        &p.holiday,
        ctx.config.analysis.bin_width,
    )?;
    log::info!("evaluate: {} rows, RMSE {}", p.y.len(), line.report.rmse);
    Ok(())
}

fn run_grid(
    ctx: &Context,
    plan: &ExperimentPlan,
    data: &Dataset,
    sub: &str,
) -> Result<(), CliError> {
    let out = OutputLayout::new(ctx.path(sub));
    let results: GridResults = run_plan(plan, data, Some(&out), ctx.config.run.workers)?;
    let failed = results.failed();
    log::info!(
        "{sub}: {} cells, {} failed, results in {}",
        results.cells.len(),
        failed,
        out.root.display()
    );
    if failed > 0 {
        return Err(CliError::Numeric(format!(
            "{failed} of {} cells failed; see {}",
            results.cells.len(),
            out.root.join("results.csv").display()
        )));
    }
    Ok(())
}

fn cmd_baseline(ctx: &Context) -> Result<(), CliError> {
    let data = ctx.dataset()?;
    let names = data.feature_names();
    let (rows, y) = flat_rows(&data.split(SplitTag::Train));
    let model = fit_forest(&rows, data.width(), &y, &ctx.resolved.forest)?;
    let mut lines = Vec::new();
    for tag in [SplitTag::Train, SplitTag::Val, SplitTag::Test] {
        let (r, t) = flat_rows(&data.split(tag));
        lines.push(ResultLine {
            model_id: "random_forest".into(),
            subset: tag.name().into(),
            report: compute_all(&t, &model.predict_rows(&r))?,
        });
    }
    let importances = importance_report(&model, &names, &rows, &y);
    let dir = ctx.path("rf");
    write(&dir.join("results.csv"), results_csv(&lines))?;
    write(&dir.join("importance.csv"), importance_csv(&importances))?;
    if let (Some(top), Some(test)) = (importances.first(), lines.last()) {
        log::info!(
            "baseline-rf: test R2 {}, top feature {} (MDI {:.3})",
            test.report.r2.map_or("n/a".into(), |v| format!("{v:.4}")),
            top.feature,
            top.mdi
        );
    }
    Ok(())
}

fn cmd_analyze(ctx: &Context) -> Result<(), CliError> {
    let clean = HourlyTable::load(&ctx.need(CLEAN, "preprocess")?)?;
    let demand = clean.column(Field::Demand);
    let temp = clean.column(Field::Temp);
    let dir = ctx.path("analysis");
    let spec = periodogram(demand)?;
    write(&dir.join("periodogram.csv"), spec.to_csv())?;
    let lag = ctx
        .config
        .analysis
        .max_lag
        .min(demand.len().saturating_sub(1));
    match acf(demand, lag)? {
        Some(a) => write(&dir.join("acf.csv"), acf_csv(&a))?,
        None => log::warn!("analyze: demand is constant, autocorrelation undefined"),
    }
    let mut poly = format!("{POLY_CSV_HEADER}\n");
    for degree in 1..=3 {
        let f = fit_poly(temp, demand, degree)?;
        poly.push_str(&f.to_csv_row("all"));
    }
    for (month, fit) in fit_poly_by_month(&clean.timestamps(), temp, demand) {
        match fit {
            Ok(f) => poly.push_str(&f.to_csv_row(&format!("month{month:02}"))),
            Err(e) => log::warn!("analyze: month {month} fit skipped: {e}"),
        }
    }
    write(&dir.join("poly_fits.csv"), poly)?;
    let mix = fit_bimodal(demand)?;
    write(&dir.join("bimodal.csv"), mix.to_csv())?;
    let peaks: Vec<String> = spec
        .peaks(3)
        .iter()
        .map(|(f, _)| format!("{:.1} h", 1.0 / f))
        .collect();
    log::info!("analyze: strongest periods {}", peaks.join(", "));
    Ok(())
}

fn trace_svg(trace: &TrainTrace) -> String {
    let pts = |f: fn(&loadcast::train::EpochRecord) -> f64| {
        trace
            .epochs
            .iter()
            .map(|e| (e.epoch as f64, f(e)))
            .collect::<Vec<_>>()
    };
    line_chart(
        "Training and validation loss",
        "epoch",
        "MSE (normalized)",
        &[
            Series::new("train", pts(|e| e.train_loss)),
            Series::new("validation", pts(|e| e.val_loss)),
        ],
    )
}

fn box_groups(res: &[Residual], key: GroupKey) -> Vec<(String, Option<loadcast::eval::BoxStats>)> {
    let n = match key {
        GroupKey::Weekday => 7,
        GroupKey::Hour => 24,
    };
    (0..n)
        .map(|k| {
            let vals: Vec<f64> = res
                .iter()
                .filter(|r| {
                    (if key == GroupKey::Weekday {
                        r.weekday
                    } else {
                        r.hour
                    }) == k
                })
                .map(|r| r.error)
                .collect();
            let label = match key {
                GroupKey::Weekday => WEEKDAYS[k as usize].to_string(),
                GroupKey::Hour => k.to_string(),
            };
            (label, box_stats(&vals))
        })
        .collect()
}

fn dt_bars(values: impl Iterator<Item = i8>) -> Vec<(String, f64)> {
    let mut counts = [0usize; 47];
    for v in values {
        counts[(v as i32 + 23) as usize] += 1;
    }
    let lo = counts.iter().position(|c| *c > 0).unwrap_or(23).min(23 - 3);
    let hi = counts
        .iter()
        .rposition(|c| *c > 0)
        .unwrap_or(23)
        .max(23 + 3);
    (lo..=hi)
        .map(|i| ((i as i32 - 23).to_string(), counts[i] as f64))
        .collect()
}

/// Copies every stage CSV into `report/` (flattened names) and draws charts.
fn cmd_report(ctx: &Context) -> Result<(), CliError> {
    let trace = TrainTrace::read_csv(&ctx.need(TRACE, "train")?)?;
    let preds = read_predictions(&ctx.need("eval/predictions.csv", "evaluate")?)?;
    let out = ctx.path("report");
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let mut copied = 0;
    let raw = ctx.config.raw_dir(&ctx.workdir);
    let mut stack = vec![ctx.workdir.clone()];
    while let Some(dir) = stack.pop() {
        let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| io_err(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for p in entries {
            if p == out || p == raw || p.file_name().is_some_and(|n| n == "cells") {
                continue;
            }
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                let rel = p.strip_prefix(&ctx.workdir).expect("under workdir");
                let flat = rel.to_string_lossy().replace(['/', '\\'], "_");
                fs::copy(&p, out.join(&flat)).map_err(|e| io_err(&p, e))?;
                copied += 1;
            }
        }
    }
    write(&out.join("config.toml"), ctx.config.to_toml())?;

    write(&out.join("loss.svg"), trace_svg(&trace))?;
    let (ts, y, yhat) = (&preds.ts, &preds.y, &preds.yhat);
    let span = y.len().min(24 * 14);
    let x: Vec<f64> = (0..span).map(|h| h as f64).collect();
    write(
        &out.join("prediction.svg"),
        line_chart(
            "Test set: actual and predicted demand (first 14 days)",
            "hour",
            "MW",
            &[
                Series::new(
                    "actual",
                    x.iter().copied().zip(y[..span].iter().copied()).collect(),
                ),
                Series::new(
                    "predicted",
                    x.iter()
                        .copied()
                        .zip(yhat[..span].iter().copied())
                        .collect(),
                ),
            ],
        ),
    )?;
    let res = residuals(ts, y, yhat, &preds.holiday)?;
    let errors: Vec<f64> = res.iter().map(|r| r.error).collect();
    let hist = residual_histogram(&errors, ctx.config.analysis.bin_width)?;
    let bars: Vec<(String, f64)> = hist
        .counts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            (
                format!("{:.0}", hist.start + (i as f64 + 0.5) * hist.bin_width),
                *c as f64,
            )
        })
        .collect();
    write(
        &out.join("residuals.svg"),
        bar_chart("Test residuals", "error (MW)", "count", &bars),
    )?;
    let pts: Vec<(f64, f64)> = y.iter().copied().zip(yhat.iter().copied()).collect();
    write(
        &out.join("scatter.svg"),
        scatter_chart(
            "Predicted against actual demand",
            "actual (MW)",
            "predicted (MW)",
            &pts,
            true,
        ),
    )?;
    write(
        &out.join("errors_by_weekday.svg"),
        box_chart(
            "Residuals by day of week",
            "error (MW)",
            &box_groups(&res, GroupKey::Weekday),
        ),
    )?;
    write(
        &out.join("errors_by_hour.svg"),
        box_chart(
            "Residuals by hour of day",
            "error (MW)",
            &box_groups(&res, GroupKey::Hour),
        ),
    )?;
    let x = extrema_timing(ts, y, yhat)?;
    write(
        &out.join("dt_max.svg"),
        bar_chart(
            "Daily maximum timing error",
            "real minus predicted hour",
            "days",
            &dt_bars(x.days.iter().map(|d| d.dt_max)),
        ),
    )?;
    write(
        &out.join("dt_min.svg"),
        bar_chart(
            "Daily minimum timing error",
            "real minus predicted hour",
            "days",
            &dt_bars(x.days.iter().map(|d| d.dt_min)),
        ),
    )?;
    log::info!(
        "report: {copied} CSV files and 8 charts in {}",
        out.display()
    );
    Ok(())
}
