//! Experiment grids: the architecture sweep, the activation × optimizer ×
//! batch sweep and the seed study.
//!
//! A plan is a list of uniquely named cells. Each cell trains one network with
//! a seed derived from the plan's base seed and the cell id, so results do not
//! depend on execution order or on how many workers run the plan. Finished
//! cells leave a result file behind and are skipped when the plan is re-run.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{Dataset, SplitTag};
use crate::metrics::{compute_all, MetricsReport};
use crate::nn::{Activation, Architecture, Checkpoint};
use crate::stats::{mean, sample_sd};
use crate::train::{count_parameters, fit, overfit_ratio, predict, OptimizerKind, TrainConfig};

/// The ten stacked architectures of the architecture sweep, smallest first.
pub const ARCHITECTURES: [&str; 10] = [
    "32x32",
    "64x64",
    "128x128",
    "32x32x32",
    "64x64x64",
    "128x128x128",
    "32x32x32x32",
    "64x64x64x64",
    "128x128x128x128",
    "64x128x128x64",
];

pub const ARCHITECTURE_DROPOUT: f64 = 0.2;
pub const HYPER_ARCHITECTURE: &str = "64x128x128x64";
pub const HYPER_BATCHES: [usize; 6] = [12, 24, 36, 48, 60, 72];
pub const SEED_STUDY_RUNS: usize = 30;

/// First eight bytes (little endian) of SHA-256 over the base seed and the id.
pub fn derive_seed(base: u64, cell_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(cell_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: String,
    pub config: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    Architecture,
    Hyper,
    SeedStudy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub kind: PlanKind,
    pub base_seed: u64,
    pub cells: Vec<Cell>,
}

impl ExperimentPlan {
    /// Builds a plan, giving every cell its derived seed.
    pub fn new(kind: PlanKind, base_seed: u64, cells: Vec<(String, TrainConfig)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(cells.len());
        for (id, mut config) in cells {
            if id.is_empty() || id.contains(['/', '\\', ',', '"', '\n']) {
                return Err(Error::Config(format!("invalid cell id {id:?}")));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::Config(format!("duplicate cell id {id}")));
            }
            config.seed = derive_seed(base_seed, &id);
            out.push(Cell { id, config });
        }
        if out.is_empty() {
            return Err(Error::Config("experiment plan has no cells".into()));
        }
        Ok(ExperimentPlan {
            kind,
            base_seed,
            cells: out,
        })
    }

    /// One cell per architecture, all with dropout 0.2.
    pub fn architecture_grid(base: &TrainConfig, architectures: &[Architecture]) -> Result<Self> {
        let cells = architectures
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let config = TrainConfig {
                    architecture: a.clone(),
                    dropout: ARCHITECTURE_DROPOUT,
                    ..base.clone()
                };
                (format!("model{:02}-{a}", k + 1), config)
            })
            .collect();
        Self::new(PlanKind::Architecture, base.seed, cells)
    }

    /// The ten standard architectures.
    pub fn standard_architecture_grid(base: &TrainConfig) -> Result<Self> {
        let archs: Vec<Architecture> = ARCHITECTURES
            .iter()
            .map(|a| a.parse().expect("valid"))
            .collect();
        Self::architecture_grid(base, &archs)
    }

    /// Full cross of activations, optimizers and batch sizes on `base`'s
    /// architecture. Each optimizer runs at its default learning rate.
    pub fn hyper_grid(base: &TrainConfig, batches: &[usize]) -> Result<Self> {
        let mut cells = Vec::new();
        for act in Activation::ALL {
            for opt in OptimizerKind::ALL {
                for &b in batches {
                    let config = TrainConfig {
                        activation: act,
                        optimizer: opt,
                        learning_rate: None,
                        batch_size: b,
                        ..base.clone()
                    };
                    cells.push((format!("{}-{}-b{b:03}", act.name(), opt.name()), config));
                }
            }
        }
        Self::new(PlanKind::Hyper, base.seed, cells)
    }

    /// `runs` copies of `base` that differ only in their derived seed.
    pub fn seed_study(base: &TrainConfig, runs: usize) -> Result<Self> {
        let cells = (1..=runs)
            .map(|k| (format!("seed{k:03}"), base.clone()))
            .collect();
        Self::new(PlanKind::SeedStudy, base.seed, cells)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: ExperimentPlan = serde_json::from_str(text)
            .map_err(|e| Error::Format(format!("experiment plan: {e}")))?;
        let cells = plan.cells.into_iter().map(|c| (c.id, c.config)).collect();
        Self::new(plan.kind, plan.base_seed, cells)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetMetrics {
    pub subset: String,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Completed {
        best_epoch: usize,
        epochs: usize,
        /// Train, validation and test, in that order.
        subsets: Vec<SubsetMetrics>,
    },
    Failed {
        reason: String,
        epochs: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub id: String,
    pub config: TrainConfig,
    pub parameters: usize,
    pub overfit_ratio: f64,
    pub status: CellStatus,
}

impl CellResult {
    pub fn is_completed(&self) -> bool {
        matches!(self.status, CellStatus::Completed { .. })
    }

    pub fn subset(&self, name: &str) -> Option<&MetricsReport> {
        match &self.status {
            CellStatus::Completed { subsets, .. } => {
                subsets.iter().find(|s| s.subset == name).map(|s| &s.report)
            }
            CellStatus::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResults {
    pub kind: PlanKind,
    /// Sorted by cell id.
    pub cells: Vec<CellResult>,
    /// Wall-clock seconds per cell id; never part of the result files.
    pub timings: Vec<(String, f64)>,
}

/// Where a plan's per-cell artifacts live.
#[derive(Debug, Clone)]
pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OutputLayout { root: root.into() }
    }

    fn cells(&self) -> PathBuf {
        self.root.join("cells")
    }

    pub fn result(&self, id: &str) -> PathBuf {
        self.cells().join(format!("{id}.json"))
    }

    pub fn trace(&self, id: &str) -> PathBuf {
        self.cells().join(format!("{id}.trace.csv"))
    }

    pub fn checkpoint(&self, id: &str) -> PathBuf {
        self.cells().join(format!("{id}.ckpt"))
    }

    fn timing(&self, id: &str) -> PathBuf {
        self.cells().join(format!("{id}.seconds"))
    }
}

/// Runs `f` on a dedicated pool of `workers` threads; every parallel loop
/// inside uses that pool.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if workers == 0 {
        return Err(Error::Config("worker count must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn run_cell(cell: &Cell, data: &Dataset, out: Option<&OutputLayout>) -> Result<(CellResult, f64)> {
    let train = data.split(SplitTag::Train);
    let val = data.split(SplitTag::Val);
    let width = data.width();
    let started = Instant::now();
    let base = CellResult {
        id: cell.id.clone(),
        config: cell.config.clone(),
        parameters: count_parameters(&cell.config.architecture, width),
        overfit_ratio: overfit_ratio(train.len(), &cell.config.architecture, width),
        status: CellStatus::Failed {
            reason: String::new(),
            epochs: 0,
        },
    };
    let outcome = match fit(&cell.config, &train, &val) {
        Ok(o) => o,
        Err(e) => {
            log::warn!("cell {} failed: {e}", cell.id);
            if let Some(out) = out {
                e.trace.write_csv(&out.trace(&cell.id))?;
            }
            let status = CellStatus::Failed {
                reason: e.error.to_string(),
                epochs: e.trace.epochs.len(),
            };
            return Ok((
                CellResult { status, ..base },
                started.elapsed().as_secs_f64(),
            ));
        }
    };
    let mut subsets = Vec::with_capacity(3);
    for tag in [SplitTag::Train, SplitTag::Val, SplitTag::Test] {
        let split = data.split(tag);
        let pred: Vec<f64> = predict(&outcome.network, &split)?
            .into_iter()
            .map(|v| data.norm.target.invert(v))
            .collect();
        let report = match compute_all(split.demand_mw(), &pred) {
            Ok(r) => r,
            Err(e) => {
                let status = CellStatus::Failed {
                    reason: format!("{} metrics: {e}", tag.name()),
                    epochs: outcome.trace.epochs.len(),
                };
                return Ok((
                    CellResult { status, ..base },
                    started.elapsed().as_secs_f64(),
                ));
            }
        };
        subsets.push(SubsetMetrics {
            subset: tag.name().to_string(),
            report,
        });
    }
    if let Some(out) = out {
        outcome.trace.write_csv(&out.trace(&cell.id))?;
        Checkpoint {
            network: outcome.network.clone(),
            features: data.feature_names(),
            normalization: Some(data.norm.clone()),
            seed: cell.config.seed,
        }
        .save(&out.checkpoint(&cell.id))?;
    }
    let status = CellStatus::Completed {
        best_epoch: outcome.trace.best_epoch,
        epochs: outcome.trace.epochs.len(),
        subsets,
    };
    Ok((
        CellResult { status, ..base },
        started.elapsed().as_secs_f64(),
    ))
}

fn load_completed(out: &OutputLayout, cell: &Cell) -> Option<(CellResult, f64)> {
    let text = fs::read_to_string(out.result(&cell.id)).ok()?;
    let result: CellResult = serde_json::from_str(&text).ok()?;
    if !result.is_completed() || result.config != cell.config {
        return None;
    }
    let seconds = fs::read_to_string(out.timing(&cell.id))
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(0.0);
    Some((result, seconds))
}

/// Runs every cell of `plan` on `workers` threads. With an output layout,
/// per-cell artifacts are written as cells finish and completed cells from an
/// earlier run are reused. A failing cell is recorded and the grid goes on.
pub fn run_plan(
    plan: &ExperimentPlan,
    data: &Dataset,
    out: Option<&OutputLayout>,
    workers: usize,
) -> Result<GridResults> {
    if let Some(out) = out {
        fs::create_dir_all(out.cells()).map_err(|e| Error::io(out.cells(), e))?;
        write(&out.root.join("plan.json"), plan.to_json())?;
    }
    let done: Vec<Result<(CellResult, f64)>> = with_workers(workers, || {
        plan.cells
            .par_iter()
            .with_max_len(1)
            .map(|cell| {
                if let Some(hit) = out.and_then(|o| load_completed(o, cell)) {
                    log::info!("cell {} already complete, skipping", cell.id);
                    return Ok(hit);
                }
                log::info!("cell {} starting", cell.id);
                let (result, seconds) = run_cell(cell, data, out)?;
                if let Some(out) = out {
                    let json = serde_json::to_string_pretty(&result).expect("result serializes");
                    write(&out.result(&cell.id), json)?;
                    write(&out.timing(&cell.id), format!("{seconds}\n"))?;
                }
                log::info!("cell {} finished in {seconds:.1} s", cell.id);
                Ok((result, seconds))
            })
            .collect()
    })?;
    let mut pairs = done.into_iter().collect::<Result<Vec<_>>>()?;
    pairs.sort_by(|a, b| a.0.id.cmp(&b.0.id));
    let timings = pairs.iter().map(|(r, s)| (r.id.clone(), *s)).collect();
    let results = GridResults {
        kind: plan.kind,
        cells: pairs.into_iter().map(|(r, _)| r).collect(),
        timings,
    };
    if let Some(out) = out {
        results.write(&out.root)?;
    }
    Ok(results)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn metric_fields(r: &MetricsReport) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        r.mse,
        r.mae,
        r.rmse,
        opt(r.r2),
        opt(r.mape),
        opt(r.wape),
        opt(r.mase)
    )
}

pub const GRID_HEADER: &str =
    "cell_id,architecture,activation,optimizer,batch_size,seed,parameters,overfit_ratio,\
status,best_epoch,subset,MSE,MAE,RMSE,R2,MAPE,WAPE,MASE,note";

fn clean_note(s: &str) -> String {
    s.replace([',', '\n', '"'], " ")
}

impl GridResults {
    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_completed()).count()
    }

    /// Three rows per completed cell and one per failed cell, sorted by id.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(GRID_HEADER);
        out.push('\n');
        for c in &self.cells {
            let k = &c.config;
            let prefix = format!(
                "{},{},{},{},{},{},{},{}",
                c.id,
                k.architecture,
                k.activation.name(),
                k.optimizer.name(),
                k.batch_size,
                k.seed,
                c.parameters,
                c.overfit_ratio
            );
            match &c.status {
                CellStatus::Completed {
                    best_epoch,
                    subsets,
                    ..
                } => {
                    for s in subsets {
                        let _ = writeln!(
                            out,
                            "{prefix},completed,{best_epoch},{},{},",
                            s.subset,
                            metric_fields(&s.report)
                        );
                    }
                }
                CellStatus::Failed { reason, .. } => {
                    let _ = writeln!(out, "{prefix},failed,,,,,,,,,,{}", clean_note(reason));
                }
            }
        }
        out
    }

    /// Completed cells ordered by test MSE, ties by id.
    pub fn ranked_by_test_mse(&self) -> Vec<&CellResult> {
        let mut v: Vec<(&CellResult, f64)> = self
            .cells
            .iter()
            .filter_map(|c| c.subset("test").map(|r| (c, r.mse)))
            .collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.id.cmp(&b.0.id)));
        v.into_iter().map(|(c, _)| c).collect()
    }

    pub fn ranking_csv(&self) -> String {
        let mut out = String::from(
            "rank,cell_id,activation,optimizer,batch_size,MSE,MAE,RMSE,R2,MAPE,WAPE,MASE\n",
        );
        for (i, c) in self.ranked_by_test_mse().into_iter().enumerate() {
            let r = c.subset("test").expect("ranked cells are completed");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                i + 1,
                c.id,
                c.config.activation.name(),
                c.config.optimizer.name(),
                c.config.batch_size,
                metric_fields(r)
            );
        }
        out
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("cell_id,wall_seconds\n");
        for (id, s) in &self.timings {
            let _ = writeln!(out, "{id},{s}");
        }
        out
    }

    /// Writes `results.csv` and `timings.csv`, plus `ranking.csv` for the
    /// hyperparameter grid and `aggregate.csv` for the seed study.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(&dir.join("results.csv"), self.to_csv())?;
        write(&dir.join("timings.csv"), self.timings_csv())?;
        match self.kind {
            PlanKind::Hyper => write(&dir.join("ranking.csv"), self.ranking_csv())?,
            PlanKind::SeedStudy => {
                write(&dir.join("aggregate.csv"), seed_aggregate(self).to_csv())?
            }
            PlanKind::Architecture => {}
        }
        Ok(())
    }
}

pub const METRIC_NAMES: [&str; 7] = ["MSE", "MAE", "RMSE", "R2", "MAPE", "WAPE", "MASE"];

pub fn metric_values(r: &MetricsReport) -> [Option<f64>; 7] {
    [
        Some(r.mse),
        Some(r.mae),
        Some(r.rmse),
        r.r2,
        r.mape,
        r.wape,
        r.mase,
    ]
}

/// Test-set summary of a seed study. Failed seeds are left out and listed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedAggregate {
    /// Lowest MAPE, ties broken by the highest R².
    pub best: Option<(String, MetricsReport)>,
    /// Per metric over completed seeds; `None` when no seed defines it.
    pub mean: [Option<f64>; 7],
    /// Sample standard deviation, 0 for a single seed.
    pub sd: [Option<f64>; 7],
    pub completed: usize,
    pub failed: Vec<String>,
}

pub fn seed_aggregate(results: &GridResults) -> SeedAggregate {
    let runs: Vec<(&str, &MetricsReport)> = results
        .cells
        .iter()
        .filter_map(|c| c.subset("test").map(|r| (c.id.as_str(), r)))
        .collect();
    let failed = results
        .cells
        .iter()
        .filter(|c| !c.is_completed())
        .map(|c| c.id.clone())
        .collect();
    let key = |r: &MetricsReport| {
        (
            r.mape.unwrap_or(f64::INFINITY),
            -r.r2.unwrap_or(f64::NEG_INFINITY),
        )
    };
    let best = runs
        .iter()
        .min_by(|a, b| {
            let (ka, kb) = (key(a.1), key(b.1));
            ka.0.total_cmp(&kb.0)
                .then(ka.1.total_cmp(&kb.1))
                .then(a.0.cmp(b.0))
        })
        .map(|(id, r)| (id.to_string(), **r));
    let mut mean_out = [None; 7];
    let mut sd_out = [None; 7];
    for m in 0..7 {
        let vals: Vec<f64> = runs
            .iter()
            .filter_map(|(_, r)| metric_values(r)[m])
            .collect();
        if !vals.is_empty() {
            mean_out[m] = Some(mean(&vals));
            sd_out[m] = Some(if vals.len() > 1 {
                sample_sd(&vals)
            } else {
                0.0
            });
        }
    }
    SeedAggregate {
        best,
        mean: mean_out,
        sd: sd_out,
        completed: runs.len(),
        failed,
    }
}

impl SeedAggregate {
    pub fn to_csv(&self) -> String {
        let mut out = format!("row,cell_id,{},runs,note\n", METRIC_NAMES.join(","));
        let join = |v: &[Option<f64>; 7]| v.iter().map(|x| opt(*x)).collect::<Vec<_>>().join(",");
        let note = if self.failed.is_empty() {
            String::new()
        } else {
            format!("excluded failed: {}", self.failed.join(" "))
        };
        if let Some((id, r)) = &self.best {
            let _ = writeln!(out, "BEST,{id},{},1,", join(&metric_values(r)));
        }
        let _ = writeln!(out, "MEAN,,{},{},{note}", join(&self.mean), self.completed);
        let _ = writeln!(out, "SD,,{},{},{note}", join(&self.sd), self.completed);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::DatasetConfig;
    use crate::ingest::ingest;
    use crate::preprocess::{clean_table, BoundsMode};
    use crate::synthetic::generate;

    fn toy() -> Dataset {
        let s = generate(12, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let t = ingest(&s.write(dir.path()).unwrap(), s.span).unwrap();
        let (clean, _) = clean_table(&t, BoundsMode::Global).unwrap();
        Dataset::build(&clean, DatasetConfig::default()).unwrap()
    }

    fn tiny() -> TrainConfig {
        TrainConfig {
            architecture: "3".parse().unwrap(),
            max_epochs: 2,
            batch_size: 32,
            dropout: 0.0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(42, "a"), derive_seed(42, "a"));
        assert_ne!(derive_seed(42, "a"), derive_seed(42, "b"));
        assert_ne!(derive_seed(42, "a"), derive_seed(43, "a"));
    }

    #[test]
    fn grid_cardinalities() {
        let base = TrainConfig::default();
        assert_eq!(
            ExperimentPlan::standard_architecture_grid(&base)
                .unwrap()
                .cells
                .len(),
            10
        );
        assert_eq!(
            ExperimentPlan::hyper_grid(&base, &HYPER_BATCHES)
                .unwrap()
                .cells
                .len(),
            72
        );
        let with84: Vec<usize> = HYPER_BATCHES.iter().copied().chain([84]).collect();
        assert_eq!(
            ExperimentPlan::hyper_grid(&base, &with84)
                .unwrap()
                .cells
                .len(),
            84
        );
        assert_eq!(
            ExperimentPlan::seed_study(&base, 30).unwrap().cells.len(),
            30
        );
    }

    #[test]
    fn architecture_cells_use_fixed_dropout() {
        let base = TrainConfig {
            dropout: 0.0,
            ..TrainConfig::default()
        };
        let plan = ExperimentPlan::standard_architecture_grid(&base).unwrap();
        assert!(plan
            .cells
            .iter()
            .all(|c| c.config.dropout == ARCHITECTURE_DROPOUT));
        assert_eq!(
            plan.cells[9].config.architecture.to_string(),
            "64x128x128x64"
        );
    }

    #[test]
    fn duplicate_ids_rejected() {
        let c = TrainConfig::default();
        let cells = vec![("x".to_string(), c.clone()), ("x".to_string(), c)];
        assert!(ExperimentPlan::new(PlanKind::Hyper, 1, cells).is_err());
    }

    #[test]
    fn plan_json_round_trip() {
        let plan = ExperimentPlan::seed_study(&tiny(), 3).unwrap();
        assert_eq!(ExperimentPlan::from_json(&plan.to_json()).unwrap(), plan);
    }

    #[test]
    fn two_architectures_give_six_rows() {
        let data = toy();
        let archs = vec!["2".parse().unwrap(), "2x2".parse().unwrap()];
        let plan = ExperimentPlan::architecture_grid(&tiny(), &archs).unwrap();
        let res = run_plan(&plan, &data, None, 1).unwrap();
        assert_eq!(res.failed(), 0);
        assert_eq!(res.to_csv().lines().count(), 1 + 6);
    }

    #[test]
    fn failed_cell_is_recorded_and_grid_continues() {
        let data = toy();
        let bad = TrainConfig {
            learning_rate: Some(-1.0),
            ..tiny()
        };
        let plan = ExperimentPlan::new(
            PlanKind::Hyper,
            1,
            vec![("a-bad".into(), bad), ("b-good".into(), tiny())],
        )
        .unwrap();
        let res = run_plan(&plan, &data, None, 2).unwrap();
        assert_eq!(res.failed(), 1);
        assert!(res.cells[1].is_completed());
        assert_eq!(res.ranked_by_test_mse().len(), 1);
        assert!(res.to_csv().contains("a-bad"));
    }

    #[test]
    fn rerun_reuses_completed_cells() {
        let data = toy();
        let dir = tempfile::tempdir().unwrap();
        let out = OutputLayout::new(dir.path());
        let plan = ExperimentPlan::seed_study(&tiny(), 2).unwrap();
        let first = run_plan(&plan, &data, Some(&out), 1).unwrap();
        let csv = fs::read(dir.path().join("results.csv")).unwrap();
        // a tampered result file proves the second run did not retrain
        let id = &plan.cells[0].id;
        let mut cached = first.cells[0].clone();
        cached.parameters = 999;
        fs::write(out.result(id), serde_json::to_string(&cached).unwrap()).unwrap();
        let second = run_plan(&plan, &data, Some(&out), 1).unwrap();
        assert_eq!(second.cells[0].parameters, 999);
        assert_eq!(first.cells[1], second.cells[1]);
        assert!(!csv.is_empty());
    }

    #[test]
    fn single_seed_aggregate() {
        let data = toy();
        let plan = ExperimentPlan::seed_study(&tiny(), 1).unwrap();
        let res = run_plan(&plan, &data, None, 1).unwrap();
        let agg = seed_aggregate(&res);
        let best = metric_values(&agg.best.as_ref().unwrap().1);
        assert_eq!(agg.mean, best);
        assert!(agg.sd.iter().flatten().all(|s| *s == 0.0));
    }
}
