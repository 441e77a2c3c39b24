use std::collections::BTreeMap;

use loadcast::baseline::{fit_forest, ForestConfig, ForestModel, Node, RegressionTree};
use loadcast::eval::residual_histogram;
use loadcast::features::{Dataset, DatasetConfig};
use loadcast::harness::{run_plan, seed_aggregate, ExperimentPlan, OutputLayout, METRIC_NAMES};
use loadcast::ingest::ingest;
use loadcast::preprocess::{clean_table, BoundsMode};
use loadcast::synthetic::generate;
use loadcast::train::TrainConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn symmetric_residuals_have_small_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(538);
    let normal = Normal::new(0.0, 40.0).unwrap();
    for n in [50, 500, 5000] {
        let r: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let h = residual_histogram(&r, 10.0).unwrap();
        assert!(
            h.mean.abs() < 3.0 * h.sd / (n as f64).sqrt(),
            "n={n}: {} vs {}",
            h.mean,
            h.sd
        );
        let area: f64 = h.density.iter().map(|d| d * h.bin_width).sum();
        assert!((area - 1.0).abs() < 1e-9);
    }
}

fn walk(tree: &RegressionTree, row: &[f64]) -> f64 {
    let mut k = 0;
    while let Node::Split {
        feature,
        threshold,
        left,
        right,
        ..
    } = &tree.nodes[k]
    {
        k = if row[*feature] > *threshold {
            *right
        } else {
            *left
        };
    }
    match tree.nodes[k] {
        Node::Leaf { value, .. } => value,
        Node::Split { .. } => unreachable!(),
    }
}

fn oracle_forest(model: &ForestModel, row: &[f64]) -> f64 {
    let mut sum = 0.0;
    for t in &model.trees {
        sum += walk(t, row);
    }
    sum / model.trees.len() as f64
}

#[test]
fn forest_prediction_matches_traversal_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(601);
    let w = 5;
    let train: Vec<f64> = (0..300 * w).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = train
        .chunks(w)
        .map(|r| r[0] * 3.0 + r[1].sin() + r[4] * r[2])
        .collect();
    let config = ForestConfig {
        trees: 25,
        ..ForestConfig::default()
    };
    let model = fit_forest(&train, w, &y, &config).unwrap();
    let rows: Vec<f64> = (0..1000 * w).map(|_| rng.random_range(-1.5..1.5)).collect();
    let got = model.predict_rows(&rows);
    for (k, row) in rows.chunks(w).enumerate() {
        assert_eq!(got[k], oracle_forest(&model, row), "row {k}");
    }
}

fn toy() -> Dataset {
    let s = generate(10, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let t = ingest(&s.write(dir.path()).unwrap(), s.span).unwrap();
    let (clean, _) = clean_table(&t, BoundsMode::Global).unwrap();
    Dataset::build(&clean, DatasetConfig::default()).unwrap()
}

#[test]
fn seed_aggregate_matches_recomputation_from_csv() {
    let base = TrainConfig {
        architecture: "3".parse().unwrap(),
        max_epochs: 2,
        batch_size: 32,
        ..TrainConfig::default()
    };
    let plan = ExperimentPlan::seed_study(&base, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let results = run_plan(&plan, &toy(), Some(&OutputLayout::new(dir.path())), 2).unwrap();
    let agg = seed_aggregate(&results);

    // per-seed test rows, read back from the written CSV
    let mut reader = csv::Reader::from_path(dir.path().join("results.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let mut per_metric: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut runs = Vec::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        if &rec[col("subset")] != "test" {
            continue;
        }
        let mape: f64 = rec[col("MAPE")].parse().unwrap();
        let r2: f64 = rec[col("R2")].parse().unwrap();
        runs.push((mape, -r2, rec[col("cell_id")].to_string()));
        for m in METRIC_NAMES {
            per_metric
                .entry(m)
                .or_default()
                .push(rec[col(m)].parse().unwrap());
        }
    }
    assert_eq!(runs.len(), 5);
    runs.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    assert_eq!(agg.best.as_ref().unwrap().0, runs[0].2);
    for (m, name) in METRIC_NAMES.iter().enumerate() {
        let v = &per_metric[name];
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let (got_mean, got_sd) = (agg.mean[m].unwrap(), agg.sd[m].unwrap());
        assert!(
            (got_mean - mean).abs() <= 1e-12 * mean.abs().max(1.0),
            "{name} mean"
        );
        assert!(
            (got_sd - var.sqrt()).abs() <= 1e-9 * var.sqrt().max(1e-12),
            "{name} sd"
        );
    }
}
