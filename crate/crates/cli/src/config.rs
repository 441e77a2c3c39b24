//! Run configuration: built-in defaults, overridden by a TOML file, overridden
//! by command-line flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use loadcast::baseline::{ForestConfig, TreeConfig};
use loadcast::features::{Accounting, DatasetConfig, FeatureSet};
use loadcast::harness::{ARCHITECTURES, HYPER_BATCHES, SEED_STUDY_RUNS};
use loadcast::nn::{Activation, Architecture};
use loadcast::preprocess::BoundsMode;
use loadcast::train::{OptimizerKind, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Raw source directory, relative to the work directory unless absolute.
    pub raw: PathBuf,
    /// Header schema file; empty for the default headers.
    pub schema: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            raw: "raw".into(),
            schema: PathBuf::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Data {
    /// First day of the span; empty to take it from the demand file.
    pub first_day: String,
    pub last_day: String,
    pub feature_set: String,
    pub accounting: String,
    pub bounds: String,
    pub window: usize,
    pub val_ratio: f64,
    pub test_ratio: f64,
}

impl Default for Data {
    fn default() -> Self {
        let d = DatasetConfig::default();
        Data {
            first_day: String::new(),
            last_day: String::new(),
            feature_set: "full".into(),
            accounting: "default".into(),
            bounds: "global".into(),
            window: d.window,
            val_ratio: d.val_ratio,
            test_ratio: d.test_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Train {
    pub architecture: String,
    pub activation: String,
    pub optimizer: String,
    /// 0 selects the optimizer's default rate.
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub dropout: f64,
    pub dropout_last_layer: bool,
    pub shuffle: bool,
}

impl Default for Train {
    fn default() -> Self {
        let t = TrainConfig::default();
        Train {
            architecture: t.architecture.to_string(),
            activation: t.activation.name().into(),
            optimizer: t.optimizer.name().into(),
            learning_rate: 0.0,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            early_stop_patience: t.early_stop_patience,
            plateau_patience: t.plateau_patience,
            plateau_factor: t.plateau_factor,
            dropout: t.dropout,
            dropout_last_layer: t.dropout_last_layer,
            shuffle: t.shuffle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Run {
    pub seed: u64,
    pub workers: usize,
}

impl Default for Run {
    fn default() -> Self {
        Run {
            seed: 42,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub architectures: Vec<String>,
    pub batches: Vec<usize>,
    pub seed_runs: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            architectures: ARCHITECTURES.iter().map(|s| s.to_string()).collect(),
            batches: HYPER_BATCHES.to_vec(),
            seed_runs: SEED_STUDY_RUNS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Forest {
    pub trees: usize,
    pub feature_fraction: f64,
    pub min_leaf: usize,
    /// 0 for unlimited depth.
    pub max_depth: usize,
}

impl Default for Forest {
    fn default() -> Self {
        let f = ForestConfig::default();
        Forest {
            trees: f.trees,
            feature_fraction: f.tree.feature_fraction,
            min_leaf: f.tree.min_leaf,
            max_depth: f.tree.max_depth.unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Analysis {
    pub max_lag: usize,
    pub bin_width: f64,
}

impl Default for Analysis {
    fn default() -> Self {
        Analysis {
            max_lag: 168,
            bin_width: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Synthetic {
    pub days: usize,
}

impl Default for Synthetic {
    fn default() -> Self {
        Synthetic { days: 180 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub paths: Paths,
    pub data: Data,
    pub train: Train,
    pub run: Run,
    pub grid: Grid,
    pub forest: Forest,
    pub analysis: Analysis,
    pub synthetic: Synthetic,
}

fn describe(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) if s.is_empty() => "\"\"".into(),
        toml::Value::Array(a) => format!(
            "[{}]",
            a.iter()
                .map(|x| x.to_string().trim_matches('"').to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
        other => other.to_string(),
    }
}

/// Every config key with its default, for `--help`.
pub fn help_table() -> String {
    let notes = [
        (
            "paths.raw",
            "raw source directory, relative to the work directory",
        ),
        (
            "paths.schema",
            "TOML header schema; empty for default headers",
        ),
        (
            "data.first_day",
            "YYYY-MM-DD; empty = first day in the demand file",
        ),
        (
            "data.last_day",
            "YYYY-MM-DD; empty = last day in the demand file",
        ),
        ("data.feature_set", "full | paper-table2"),
        ("data.accounting", "default | paper"),
        ("data.bounds", "outlier bounds: global | daily"),
        ("train.activation", "tanh | relu | softmax | sigmoid"),
        ("train.optimizer", "adam | sgd | rmsprop"),
        ("train.learning_rate", "0 = optimizer default"),
        ("forest.max_depth", "0 = unlimited"),
        ("run.workers", "parallel grid cells / threads"),
    ];
    let value = toml::Value::try_from(CliConfig::default()).expect("defaults serialize");
    let mut out =
        String::from("Config keys (file sections use the part before the dot) and defaults:\n");
    if let toml::Value::Table(sections) = value {
        for (section, body) in sections {
            if let toml::Value::Table(keys) = body {
                for (key, v) in keys {
                    let name = format!("{section}.{key}");
                    let note = notes
                        .iter()
                        .find(|n| n.0 == name)
                        .map(|n| n.1)
                        .unwrap_or("");
                    let _ = writeln!(out, "  {name:<26} {:<28} {note}", describe(&v));
                }
            }
        }
    }
    out.push_str("\nCommand-line flags override the file; the file overrides the defaults.\n");
    out.push_str("Exit codes: 0 success, 1 usage or configuration, 2 data, 3 numeric failure.\n");
    out
}

fn check<T>(r: Result<T, loadcast::Error>, key: &str, errs: &mut Vec<String>) -> Option<T> {
    r.map_err(|e| errs.push(format!("{key}: {e}"))).ok()
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn raw_dir(&self, workdir: &Path) -> PathBuf {
        workdir.join(&self.paths.raw)
    }

    fn day(s: &str, key: &str, errs: &mut Vec<String>) -> Option<NaiveDate> {
        if s.is_empty() {
            return None;
        }
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .map_err(|_| errs.push(format!("{key}: expected YYYY-MM-DD, got '{s}'")))
            .ok()
    }

    /// Validates every key at once; the error lists each violation.
    pub fn resolve(&self) -> Result<Resolved, String> {
        let mut errs = Vec::new();
        let feature_set = check(
            FeatureSet::parse(&self.data.feature_set),
            "data.feature_set",
            &mut errs,
        );
        let accounting = check(
            Accounting::parse(&self.data.accounting),
            "data.accounting",
            &mut errs,
        );
        let architecture = check(
            self.train.architecture.parse::<Architecture>(),
            "train.architecture",
            &mut errs,
        );
        let activation = check(
            self.train.activation.parse::<Activation>(),
            "train.activation",
            &mut errs,
        );
        let optimizer = check(
            self.train.optimizer.parse::<OptimizerKind>(),
            "train.optimizer",
            &mut errs,
        );
        let architectures: Vec<Option<Architecture>> = self
            .grid
            .architectures
            .iter()
            .map(|a| check(a.parse::<Architecture>(), "grid.architectures", &mut errs))
            .collect();
        let bounds = match self.data.bounds.as_str() {
            "global" => Some(BoundsMode::Global),
            "daily" => Some(BoundsMode::Daily),
            other => {
                errs.push(format!(
                    "data.bounds: expected global | daily, got '{other}'"
                ));
                None
            }
        };
        let first_day = Self::day(&self.data.first_day, "data.first_day", &mut errs);
        let last_day = Self::day(&self.data.last_day, "data.last_day", &mut errs);
        if self.run.workers == 0 {
            errs.push("run.workers must be at least 1".into());
        }
        if self.data.window == 0 {
            errs.push("data.window must be at least 1".into());
        }
        if !(self.learning_rate_ok()) {
            errs.push(format!(
                "train.learning_rate must be >= 0, got {}",
                self.train.learning_rate
            ));
        }
        if self.grid.batches.is_empty() || self.grid.batches.contains(&0) {
            errs.push("grid.batches must be non-empty positive sizes".into());
        }
        if self.grid.seed_runs == 0 {
            errs.push("grid.seed_runs must be at least 1".into());
        }
        if self.forest.trees == 0 {
            errs.push("forest.trees must be at least 1".into());
        }
        if !(self.forest.feature_fraction > 0.0 && self.forest.feature_fraction <= 1.0) {
            errs.push(format!(
                "forest.feature_fraction must lie in (0, 1], got {}",
                self.forest.feature_fraction
            ));
        }
        if self.analysis.bin_width.is_nan() || self.analysis.bin_width <= 0.0 {
            errs.push("analysis.bin_width must be positive".into());
        }
        if self.synthetic.days < 3 {
            errs.push("synthetic.days must be at least 3".into());
        }
        // unparsable fields fall back to defaults so the numeric checks still run
        let fallback = TrainConfig::default();
        let train = TrainConfig {
            architecture: architecture.unwrap_or(fallback.architecture),
            activation: activation.unwrap_or(fallback.activation),
            optimizer: optimizer.unwrap_or(fallback.optimizer),
            learning_rate: (self.train.learning_rate > 0.0).then_some(self.train.learning_rate),
            batch_size: self.train.batch_size,
            max_epochs: self.train.max_epochs,
            early_stop_patience: self.train.early_stop_patience,
            plateau_patience: self.train.plateau_patience,
            plateau_factor: self.train.plateau_factor,
            dropout: self.train.dropout,
            dropout_last_layer: self.train.dropout_last_layer,
            shuffle: self.train.shuffle,
            seed: self.run.seed,
            feature_set: feature_set.unwrap_or_default(),
        };
        errs.extend(
            train
                .violations()
                .into_iter()
                .map(|v| format!("train: {v}")),
        );
        if !errs.is_empty() {
            return Err(errs.join("\n"));
        }
        Ok(Resolved {
            dataset: DatasetConfig {
                feature_set: feature_set.expect("checked"),
                accounting: accounting.expect("checked"),
                window: self.data.window,
                val_ratio: self.data.val_ratio,
                test_ratio: self.data.test_ratio,
            },
            train,
            bounds: bounds.expect("checked"),
            first_day,
            last_day,
            architectures: architectures
                .into_iter()
                .map(|a| a.expect("checked"))
                .collect(),
            forest: ForestConfig {
                trees: self.forest.trees,
                tree: TreeConfig {
                    max_depth: (self.forest.max_depth > 0).then_some(self.forest.max_depth),
                    min_leaf: self.forest.min_leaf.max(1),
                    feature_fraction: self.forest.feature_fraction,
                },
                bootstrap: true,
                seed: self.run.seed,
            },
        })
    }

    fn learning_rate_ok(&self) -> bool {
        self.train.learning_rate >= 0.0 && self.train.learning_rate.is_finite()
    }
}

/// Typed view of a validated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub bounds: BoundsMode,
    pub first_day: Option<NaiveDate>,
    pub last_day: Option<NaiveDate>,
    pub architectures: Vec<Architecture>,
    pub forest: ForestConfig,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let r = CliConfig::default().resolve().unwrap();
        assert_eq!(r.train, TrainConfig::default());
        assert_eq!(r.architectures.len(), 10);
    }

    #[test]
    fn every_violation_is_listed() {
        let mut c = CliConfig::default();
        c.train.activation = "swish".into();
        c.data.bounds = "weekly".into();
        c.run.workers = 0;
        let msg = c.resolve().unwrap_err();
        assert_eq!(msg.lines().count(), 3, "{msg}");
        c.train.dropout = 2.0;
        assert_eq!(c.resolve().unwrap_err().lines().count(), 4);
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let c = CliConfig::default();
        assert_eq!(toml::from_str::<CliConfig>(&c.to_toml()).unwrap(), c);
        let partial: CliConfig = toml::from_str("[train]\nbatch_size = 12\n").unwrap();
        assert_eq!(partial.train.batch_size, 12);
        assert_eq!(partial.run, Run::default());
        assert!(toml::from_str::<CliConfig>("[train]\nbogus = 1\n").is_err());
    }

    #[test]
    fn help_lists_every_key() {
        let help = help_table();
        let value = toml::Value::try_from(CliConfig::default()).unwrap();
        for (section, body) in value.as_table().unwrap() {
            for key in body.as_table().unwrap().keys() {
                assert!(
                    help.contains(&format!("{section}.{key}")),
                    "{section}.{key}"
                );
            }
        }
    }
}
