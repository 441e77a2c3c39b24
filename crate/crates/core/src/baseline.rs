//! Random-forest regression baseline with impurity-based (MDI) feature
//! importances, plus Pearson correlations against demand.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::WindowedDataset;
use crate::stats::mix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Reduction of the summed squared error achieved by this split.
        impurity_decrease: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
    pub width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Fraction of features considered at each split (at least one).
    pub feature_fraction: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            min_leaf: 1,
            feature_fraction: 1.0 / 3.0,
        }
    }
}

struct Builder<'a> {
    rows: &'a [f64],
    width: usize,
    y: &'a [f64],
    config: TreeConfig,
    candidates: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
    /// Number of samples going left in the sorted order.
    left: usize,
}

fn sse(sum: f64, sum_sq: f64, n: usize) -> f64 {
    (sum_sq - sum * sum / n as f64).max(0.0)
}

impl Builder<'_> {
    fn value(&self, i: usize, f: usize) -> f64 {
        self.rows[i * self.width + f]
    }

    fn leaf(&mut self, idx: &[usize]) -> usize {
        let value = idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node::Leaf {
            value,
            samples: idx.len(),
        });
        self.nodes.len() - 1
    }

    fn best_split(&mut self, idx: &mut [usize]) -> Option<(BestSplit, Vec<usize>)> {
        let n = idx.len();
        // prefix sums run on centred targets to avoid cancellation
        let mu = idx.iter().map(|&i| self.y[i]).sum::<f64>() / n as f64;
        let total: f64 = idx.iter().map(|&i| self.y[i] - mu).sum();
        let total_sq: f64 = idx.iter().map(|&i| (self.y[i] - mu).powi(2)).sum();
        let parent = sse(total, total_sq, n);
        if parent <= 1e-12 * mu.abs().max(1.0).powi(2) {
            return None;
        }
        let mut features = sample(&mut self.rng, self.width, self.candidates).into_vec();
        features.sort_unstable();
        let mut best: Option<BestSplit> = None;
        let min_leaf = self.config.min_leaf.max(1);
        let mut order = idx.to_vec();
        for f in features {
            self.sort_by_feature(&mut order, f);
            let (mut ls, mut lq) = (0.0, 0.0);
            for k in 0..n - 1 {
                let yi = self.y[order[k]] - mu;
                ls += yi;
                lq += yi * yi;
                let (a, b) = (self.value(order[k], f), self.value(order[k + 1], f));
                if a == b || k + 1 < min_leaf || n - k - 1 < min_leaf {
                    continue;
                }
                let decrease =
                    parent - sse(ls, lq, k + 1) - sse(total - ls, total_sq - lq, n - k - 1);
                // near-equal candidates keep the earlier one so that the
                // choice survives rescaling of the target
                let bar = best
                    .as_ref()
                    .map_or(parent * 1e-12, |b| b.decrease * (1.0 + 1e-9));
                if decrease > bar {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: a + (b - a) / 2.0,
                        decrease,
                        left: k + 1,
                    });
                }
            }
        }
        let best = best?;
        self.sort_by_feature(&mut order, best.feature);
        Some((best, order))
    }

    fn sort_by_feature(&self, order: &mut [usize], f: usize) {
        order.sort_by(|&a, &b| {
            self.value(a, f)
                .total_cmp(&self.value(b, f))
                .then(a.cmp(&b))
        });
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let depth_ok = self.config.max_depth.is_none_or(|d| depth < d);
        if idx.len() < 2 * self.config.min_leaf.max(1) || !depth_ok {
            return self.leaf(idx);
        }
        let Some((split, mut order)) = self.best_split(idx) else {
            return self.leaf(idx);
        };
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: 0.0,
            samples: 0,
        });
        let (l, r) = order.split_at_mut(split.left);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            impurity_decrease: split.decrease,
            left,
            right,
        };
        slot
    }
}

impl RegressionTree {
    /// Fits a variance-reduction tree on the samples listed in `idx`
    /// (duplicates allowed). Thresholds are midpoints between adjacent
    /// distinct values.
    pub fn fit(
        rows: &[f64],
        width: usize,
        y: &[f64],
        idx: &[usize],
        config: TreeConfig,
        seed: u64,
    ) -> Result<Self> {
        if width == 0 || rows.len() != width * y.len() {
            return Err(Error::Shape(format!(
                "{} values do not form rows of width {width} for {} targets",
                rows.len(),
                y.len()
            )));
        }
        if idx.is_empty() {
            return Err(Error::Data("cannot fit a tree on zero samples".into()));
        }
        let candidates = ((config.feature_fraction * width as f64).ceil() as usize).clamp(1, width);
        let mut b = Builder {
            rows,
            width,
            y,
            config,
            candidates,
            rng: ChaCha8Rng::seed_from_u64(seed),
            nodes: Vec::new(),
        };
        let mut idx = idx.to_vec();
        b.grow(&mut idx, 0);
        Ok(RegressionTree {
            nodes: b.nodes,
            width,
        })
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    k = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &RegressionTree, k: usize) -> usize {
            match &t.nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    fn add_importances(&self, acc: &mut [f64]) {
        for node in &self.nodes {
            if let Node::Split {
                feature,
                impurity_decrease,
                ..
            } = node
            {
                acc[*feature] += impurity_decrease;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub tree: TreeConfig,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 200,
            tree: TreeConfig::default(),
            bootstrap: true,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<RegressionTree>,
    /// Normalized MDI per feature; all zero when no split was ever made.
    pub importances: Vec<f64>,
    /// True when the target was constant and no tree could split.
    pub degenerate: bool,
    pub seed: u64,
}

pub fn fit_forest(
    rows: &[f64],
    width: usize,
    y: &[f64],
    config: &ForestConfig,
) -> Result<ForestModel> {
    if y.len() < 2 {
        return Err(Error::Data("a forest needs at least two rows".into()));
    }
    if config.trees == 0 {
        return Err(Error::Config("forest needs at least one tree".into()));
    }
    let n = y.len();
    let trees = (0..config.trees)
        .into_par_iter()
        .map(|k| {
            let seed = mix64(config.seed ^ mix64(k as u64));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            RegressionTree::fit(rows, width, y, &idx, config.tree, rng.random())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut importances = vec![0.0; width];
    for t in &trees {
        t.add_importances(&mut importances);
    }
    let total: f64 = importances.iter().sum();
    let degenerate = total <= 0.0;
    if !degenerate {
        importances.iter_mut().for_each(|v| *v /= total);
    }
    Ok(ForestModel {
        trees,
        importances,
        degenerate,
        seed: config.seed,
    })
}

impl ForestModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict_rows(&self, rows: &[f64]) -> Vec<f64> {
        let w = self.trees[0].width;
        rows.par_chunks(w).map(|r| self.predict(r)).collect()
    }
}

/// Sample Pearson correlation; `None` when either input is constant.
pub fn pearson(x: &[f64], z: &[f64]) -> Option<f64> {
    if x.len() != z.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let (mx, mz) = (x.iter().sum::<f64>() / n, z.iter().sum::<f64>() / n);
    let (mut sxz, mut sxx, mut szz) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(z) {
        sxz += (a - mx) * (b - mz);
        sxx += (a - mx).powi(2);
        szz += (b - mz).powi(2);
    }
    if sxx == 0.0 || szz == 0.0 {
        return None;
    }
    Some((sxz / (sxx * szz).sqrt()).clamp(-1.0, 1.0))
}

/// Non-windowed regression rows: the feature row of hour `t − 1` (which
/// carries the previous-hour demand) against the MW demand at `t`.
pub fn flat_rows(data: &WindowedDataset) -> (Vec<f64>, Vec<f64>) {
    let m = &data.matrix;
    let mut rows = Vec::with_capacity(data.len() * m.width());
    for k in 0..data.len() {
        rows.extend_from_slice(m.row(data.target_row(k) - 1));
    }
    (rows, data.demand_mw().to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub feature: String,
    pub mdi: f64,
    pub pearson: Option<f64>,
}

/// Importances and correlations per feature, most important first.
pub fn importance_report(
    model: &ForestModel,
    names: &[String],
    rows: &[f64],
    y: &[f64],
) -> Vec<ImportanceRow> {
    let w = names.len();
    let mut out: Vec<ImportanceRow> = names
        .iter()
        .enumerate()
        .map(|(f, name)| {
            let col: Vec<f64> = rows.chunks(w).map(|r| r[f]).collect();
            ImportanceRow {
                feature: name.clone(),
                mdi: model.importances[f],
                pearson: pearson(&col, y),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.mdi
            .total_cmp(&a.mdi)
            .then_with(|| a.feature.cmp(&b.feature))
    });
    out
}

pub fn importance_csv(rows: &[ImportanceRow]) -> String {
    let mut out = String::from("feature,mdi,pearson\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            r.feature,
            r.mdi,
            r.pearson.map(|v| v.to_string()).unwrap_or_default()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn planted(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let r: [f64; 4] = std::array::from_fn(|_| rng.random());
            y.push(r[0]);
            rows.extend_from_slice(&r);
        }
        (rows, y)
    }

    #[test]
    fn planted_signal_ranks_first() {
        let (rows, y) = planted(300, 1);
        let cfg = ForestConfig {
            trees: 30,
            ..ForestConfig::default()
        };
        let m = fit_forest(&rows, 4, &y, &cfg).unwrap();
        assert!((m.importances.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(m.importances[1..].iter().all(|v| *v < m.importances[0]));
    }

    #[test]
    fn stump_recovers_step() {
        let xs: Vec<f64> = (0..50).map(|k| k as f64 / 10.0).collect();
        let y: Vec<f64> = xs
            .iter()
            .map(|x| if *x <= 2.0 { 1.0 } else { 4.0 })
            .collect();
        let idx: Vec<usize> = (0..50).collect();
        let cfg = TreeConfig {
            max_depth: Some(1),
            min_leaf: 1,
            feature_fraction: 1.0,
        };
        let t = RegressionTree::fit(&xs, 1, &y, &idx, cfg, 0).unwrap();
        match &t.nodes[0] {
            Node::Split { threshold, .. } => assert!((threshold - 2.05).abs() <= 0.05 + 1e-12),
            n => panic!("expected split, got {n:?}"),
        }
        assert_eq!(t.predict(&[1.0]), 1.0);
        assert_eq!(t.predict(&[3.0]), 4.0);
    }

    #[test]
    fn constant_target_is_degenerate() {
        let (rows, _) = planted(40, 2);
        let y = vec![7.0; 40];
        let m = fit_forest(
            &rows,
            4,
            &y,
            &ForestConfig {
                trees: 5,
                ..ForestConfig::default()
            },
        )
        .unwrap();
        assert!(m.degenerate);
        assert!(m.importances.iter().all(|v| *v == 0.0));
        assert_eq!(m.predict(&rows[..4]), 7.0);
    }

    #[test]
    fn identical_trees_average_to_one() {
        let (rows, y) = planted(60, 3);
        let cfg = ForestConfig {
            trees: 1,
            bootstrap: false,
            ..ForestConfig::default()
        };
        let one = fit_forest(&rows, 4, &y, &cfg).unwrap();
        let many = ForestModel {
            trees: vec![one.trees[0].clone(); 5],
            ..one.clone()
        };
        for r in rows.chunks(4) {
            assert!((many.predict(r) - one.predict(r)).abs() < 1e-12);
        }
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 5.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap() - 0.9820).abs() < 1e-4);
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
    }

    #[test]
    fn forest_is_seed_deterministic() {
        let (rows, y) = planted(80, 4);
        let cfg = ForestConfig {
            trees: 8,
            ..ForestConfig::default()
        };
        assert_eq!(
            fit_forest(&rows, 4, &y, &cfg).unwrap(),
            fit_forest(&rows, 4, &y, &cfg).unwrap()
        );
    }

    #[test]
    fn every_split_reduces_impurity() {
        let (rows, y) = planted(120, 5);
        let m = fit_forest(
            &rows,
            4,
            &y,
            &ForestConfig {
                trees: 4,
                ..ForestConfig::default()
            },
        )
        .unwrap();
        for t in &m.trees {
            for node in &t.nodes {
                if let Node::Split {
                    impurity_decrease, ..
                } = node
                {
                    assert!(*impurity_decrease > 0.0);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn importances_ignore_affine_target_rescaling(a in 0.5..20.0f64, b in -100.0..100.0f64) {
            let (rows, y) = planted(60, 6);
            let cfg = ForestConfig { trees: 3, ..ForestConfig::default() };
            let base = fit_forest(&rows, 4, &y, &cfg).unwrap();
            let scaled: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            let other = fit_forest(&rows, 4, &scaled, &cfg).unwrap();
            for (p, q) in base.importances.iter().zip(&other.importances) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }

        #[test]
        fn pearson_is_bounded(xs in prop::collection::vec(-10.0..10.0f64, 3..50), seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let zs: Vec<f64> = xs.iter().map(|x| x + rng.random_range(-5.0..5.0)).collect();
            if let Some(r) = pearson(&xs, &zs) {
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
