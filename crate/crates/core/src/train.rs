//! Backpropagation through time, optimizers and the epoch loop.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSet, WindowedDataset};
use crate::nn::{
    forward, Activation, Architecture, DropoutMasks, ForwardPass, LstmNetwork, Mode, NetworkConfig,
};
use crate::stats::mix64;

/// Samples per gradient work unit. Chunk sums are reduced in a fixed order,
/// so results do not depend on the number of threads.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
    Rmsprop,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 3] = [
        OptimizerKind::Adam,
        OptimizerKind::Sgd,
        OptimizerKind::Rmsprop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Rmsprop => "rmsprop",
        }
    }

    pub fn default_learning_rate(self) -> f64 {
        match self {
            OptimizerKind::Adam | OptimizerKind::Rmsprop => 0.001,
            OptimizerKind::Sgd => 0.01,
        }
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            "rmsprop" => Ok(OptimizerKind::Rmsprop),
            other => Err(Error::Config(format!(
                "unknown optimizer '{other}' (expected adam | sgd | rmsprop)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub rho: f64,
    pub eps: f64,
    /// First moment (adam) or squared-gradient accumulator (rmsprop).
    pub m: Vec<f64>,
    /// Second moment (adam only).
    pub v: Vec<f64>,
    pub t: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, n: usize) -> Self {
        let (m, v) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Rmsprop => (vec![0.0; n], Vec::new()),
            OptimizerKind::Adam => (vec![0.0; n], vec![0.0; n]),
        };
        OptimizerState {
            kind,
            beta1: 0.9,
            beta2: 0.999,
            rho: 0.9,
            eps: 1e-8,
            m,
            v,
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grads.len());
        self.t += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Rmsprop => {
                for ((p, g), acc) in params.iter_mut().zip(grads).zip(&mut self.m) {
                    *acc = self.rho * *acc + (1.0 - self.rho) * g * g;
                    *p -= lr * g / (*acc + self.eps).sqrt();
                }
            }
            OptimizerKind::Adam => {
                let c1 = 1.0 - self.beta1.powi(self.t as i32);
                let c2 = 1.0 - self.beta2.powi(self.t as i32);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(&mut self.m)
                    .zip(&mut self.v)
                {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
                }
            }
        }
    }
}

/// Human-readable name of a flat parameter index.
pub fn parameter_name(net: &LstmNetwork, index: usize) -> String {
    const GATES: [char; 4] = ['f', 'i', 'g', 'o'];
    for (k, l) in net.layouts().iter().enumerate() {
        let width = l.hidden + l.input;
        if index >= l.w && index < l.b {
            let r = (index - l.w) / width;
            let c = (index - l.w) % width;
            return format!(
                "layer{} W_{}[{}, {}]",
                k + 1,
                GATES[r / l.hidden],
                r % l.hidden,
                c
            );
        }
        if index >= l.b && index < l.b + 4 * l.hidden {
            let r = index - l.b;
            return format!("layer{} b_{}[{}]", k + 1, GATES[r / l.hidden], r % l.hidden);
        }
    }
    if index + 1 == net.param_count() {
        "dense bias".into()
    } else {
        format!("dense W[{}]", index - net.dense_offset())
    }
}

/// Accumulates `d(loss)/d(params)` for one sample into `grads`, given the
/// derivative of the loss with respect to the prediction.
fn backward(
    net: &LstmNetwork,
    pass: &ForwardPass,
    masks: Option<&DropoutMasks>,
    dl_dy: f64,
    grads: &mut [f64],
) {
    let cfg = &net.config;
    let d_pre = dl_dy * cfg.dense_activation.scalar_derivative(pass.head_pre);
    let dense = net.dense_offset();
    let n_last = cfg.architecture.last_width();
    for (g, h) in grads[dense..dense + n_last]
        .iter_mut()
        .zip(&pass.head_input)
    {
        *g += d_pre * h;
    }
    grads[dense + n_last] += d_pre;

    let steps = pass.layers[0].steps.len();
    // gradient w.r.t. the (masked) output sequence of the current layer
    let mut d_out = vec![0.0; steps * n_last];
    for (d, w) in d_out[(steps - 1) * n_last..]
        .iter_mut()
        .zip(net.dense_weights())
    {
        *d = d_pre * w;
    }

    for k in (0..net.num_layers()).rev() {
        let layout = net.layouts()[k];
        let p = net.layer(k);
        let trace = &pass.layers[k];
        let (n, m) = (p.hidden, p.input);
        let width = n + m;
        if let Some(Some(mask)) = masks.map(|ms| &ms.layers[k]) {
            for (d, s) in d_out.iter_mut().zip(mask) {
                *d *= s;
            }
        }
        let mut d_in = vec![0.0; steps * m];
        let mut dh_next = vec![0.0; n];
        let mut dc_next = vec![0.0; n];
        let mut ds = vec![0.0; n];
        let mut dc = vec![0.0; n];
        let mut dg = vec![0.0; n];
        let mut da = vec![0.0; 4 * n];
        let mut dg_pre = vec![0.0; n];
        for t in (0..steps).rev() {
            let cache = &trace.steps[t];
            let prev = &trace.states[t];
            let c = &trace.states[t + 1].c;
            for j in 0..n {
                let dh = d_out[t * n + j] + dh_next[j];
                ds[j] = dh * cache.o[j];
                da[3 * n + j] = dh * cache.act_c[j] * cache.o[j] * (1.0 - cache.o[j]);
            }
            cfg.cell_activation.backward(c, &cache.act_c, &ds, &mut dc);
            for j in 0..n {
                dc[j] += dc_next[j];
                da[j] = dc[j] * prev.c[j] * cache.f[j] * (1.0 - cache.f[j]);
                da[n + j] = dc[j] * cache.g[j] * cache.i[j] * (1.0 - cache.i[j]);
                dg[j] = dc[j] * cache.i[j];
                dc_next[j] = dc[j] * cache.f[j];
            }
            cfg.cell_activation
                .backward(&cache.pre_g, &cache.g, &dg, &mut dg_pre);
            da[2 * n..3 * n].copy_from_slice(&dg_pre);

            let x = &trace.inputs[t * m..(t + 1) * m];
            let (gw, rest) = grads[layout.w..].split_at_mut(layout.w_len());
            let gb = &mut rest[..4 * n];
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            let dx = &mut d_in[t * m..(t + 1) * m];
            for (r, &a) in da.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                gb[r] += a;
                let grow = &mut gw[r * width..(r + 1) * width];
                let wrow = &p.w[r * width..(r + 1) * width];
                for j in 0..n {
                    grow[j] += a * prev.h[j];
                    dh_next[j] += a * wrow[j];
                }
                for j in 0..m {
                    grow[n + j] += a * x[j];
                    dx[j] += a * wrow[n + j];
                }
            }
        }
        d_out = d_in;
    }
}

/// Mean squared error over the batch and its exact gradient with respect to
/// every parameter, averaged over the batch.
pub fn bptt_gradients(
    net: &LstmNetwork,
    windows: &[&[f64]],
    targets: &[f64],
    masks: Option<&[DropoutMasks]>,
) -> Result<(f64, Vec<f64>)> {
    if windows.len() != targets.len() || windows.is_empty() {
        return Err(Error::Shape(format!(
            "{} windows for {} targets",
            windows.len(),
            targets.len()
        )));
    }
    if let Some(ms) = masks {
        if ms.len() != windows.len() {
            return Err(Error::Shape(
                "one dropout mask set per sample required".into(),
            ));
        }
    }
    let batch = windows.len() as f64;
    let partials: Vec<Result<(f64, Vec<f64>)>> = (0..windows.len())
        .collect::<Vec<_>>()
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grads = vec![0.0; net.param_count()];
            let mut loss = 0.0;
            for &s in chunk {
                let mask = masks.map(|ms| &ms[s]);
                let mode = mask.map_or(Mode::Infer, Mode::Train);
                let pass = forward(net, windows[s], mode)?;
                let err = pass.prediction - targets[s];
                loss += err * err;
                backward(net, &pass, mask, 2.0 * err / batch, &mut grads);
            }
            Ok((loss, grads))
        })
        .collect();
    let mut loss = 0.0;
    let mut grads = vec![0.0; net.param_count()];
    for part in partials {
        let (l, g) = part?;
        loss += l;
        for (a, b) in grads.iter_mut().zip(&g) {
            *a += b;
        }
    }
    if let Some(bad) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite gradient for {}",
            parameter_name(net, bad)
        )));
    }
    Ok((loss / batch, grads))
}

/// Σ over layers of `4·(n·(m+n) + n)` plus the dense head `n_last + 1`.
pub fn count_parameters(arch: &Architecture, input_width: usize) -> usize {
    let mut m = input_width;
    let mut total = 0;
    for &n in arch.layers() {
        total += 4 * (n * (m + n) + n);
        m = n;
    }
    total + arch.last_width() + 1
}

/// Training samples per trainable parameter.
pub fn overfit_ratio(train_samples: usize, arch: &Architecture, input_width: usize) -> f64 {
    train_samples as f64 / count_parameters(arch, input_width) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub activation: Activation,
    pub optimizer: OptimizerKind,
    /// `None` selects the optimizer's default rate.
    pub learning_rate: Option<f64>,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub dropout: f64,
    pub dropout_last_layer: bool,
    pub shuffle: bool,
    pub seed: u64,
    pub feature_set: FeatureSet,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            architecture: "64x128x128x64".parse().expect("valid"),
            activation: Activation::Tanh,
            optimizer: OptimizerKind::Adam,
            learning_rate: None,
            batch_size: 60,
            max_epochs: 80,
            early_stop_patience: 10,
            plateau_patience: 5,
            plateau_factor: 0.5,
            dropout: 0.2,
            dropout_last_layer: true,
            shuffle: false,
            seed: 42,
            feature_set: FeatureSet::Full,
        }
    }
}

impl TrainConfig {
    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
            .unwrap_or_else(|| self.optimizer.default_learning_rate())
    }

    pub fn network_config(&self, input_width: usize) -> NetworkConfig {
        NetworkConfig {
            architecture: self.architecture.clone(),
            input_width,
            cell_activation: self.activation,
            dense_activation: self.activation,
            dropout: self.dropout,
            dropout_last_layer: self.dropout_last_layer,
        }
    }

    /// Every violated constraint, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.batch_size == 0 {
            out.push("batch_size must be at least 1".to_string());
        }
        if self.max_epochs == 0 {
            out.push("max_epochs must be at least 1".to_string());
        }
        let lr = self.learning_rate();
        if !(lr > 0.0 && lr.is_finite()) {
            out.push(format!("learning_rate must be positive, got {lr}"));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor <= 1.0) {
            out.push(format!(
                "plateau_factor must lie in (0, 1], got {}",
                self.plateau_factor
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            out.push(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch with the lowest validation loss.
    pub best_epoch: usize,
    pub stop: Option<StopReason>,
    /// Wall-clock seconds per epoch; kept out of the CSV.
    pub wall_seconds: Vec<f64>,
}

impl TrainTrace {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.epochs
            .get(self.best_epoch.checked_sub(1)?)
            .map(|e| e.val_loss)
    }

    pub fn total_seconds(&self) -> f64 {
        self.wall_seconds.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,lr\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.epoch, e.train_loss, e.val_loss, e.lr
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut trace = TrainTrace::default();
        for rec in reader.deserialize::<EpochRecord>() {
            trace.epochs.push(rec.map_err(|e| Error::Csv {
                path: path.to_path_buf(),
                source: e,
            })?);
        }
        trace.best_epoch = trace
            .epochs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.val_loss.total_cmp(&b.1.val_loss))
            .map_or(0, |(i, _)| i + 1);
        Ok(trace)
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub network: LstmNetwork,
    pub trace: TrainTrace,
}

/// A failed fit together with the epochs completed before the failure.
#[derive(Debug)]
pub struct FitError {
    pub error: Error,
    pub trace: TrainTrace,
}

impl fmt::Display for FitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (after {} epochs)",
            self.error,
            self.trace.epochs.len()
        )
    }
}

impl std::error::Error for FitError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<FitError> for Error {
    fn from(e: FitError) -> Error {
        e.error
    }
}

fn sample_rng(seed: u64, epoch: usize, sample: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(mix64(seed ^ mix64(epoch as u64)) ^ sample as u64))
}

/// Normalized predictions for every sample of the split, in order.
pub fn predict(net: &LstmNetwork, data: &WindowedDataset) -> Result<Vec<f64>> {
    (0..data.len())
        .into_par_iter()
        .map(|k| net.predict(data.window(k)))
        .collect()
}

/// Mean squared error on normalized targets.
pub fn evaluate_loss(net: &LstmNetwork, data: &WindowedDataset) -> Result<f64> {
    let pred = predict(net, data)?;
    let sse: f64 = pred
        .iter()
        .zip(data.targets_normalized())
        .map(|(p, y)| (p - y).powi(2))
        .sum();
    Ok(sse / data.len() as f64)
}

/// Trains a freshly initialized network on `train`, monitoring `val`.
pub fn fit(
    config: &TrainConfig,
    train: &WindowedDataset,
    val: &WindowedDataset,
) -> std::result::Result<FitOutcome, FitError> {
    let mut trace = TrainTrace::default();
    let fail = |error: Error, trace: &TrainTrace| FitError {
        error,
        trace: trace.clone(),
    };
    config.validate().map_err(|e| fail(e, &trace))?;
    if train.is_empty() || val.is_empty() {
        return Err(fail(
            Error::Data("training and validation splits must be non-empty".into()),
            &trace,
        ));
    }
    if train.width() != val.width() {
        return Err(fail(
            Error::Shape("train and validation widths differ".into()),
            &trace,
        ));
    }
    let mut net = LstmNetwork::init(config.network_config(train.width()), config.seed)
        .map_err(|e| fail(e, &trace))?;
    let mut opt = OptimizerState::new(config.optimizer, net.param_count());
    let mut lr = config.learning_rate();
    let mut best = (f64::INFINITY, net.params.clone());
    let mut stale = 0;
    let mut plateau = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let targets = train.targets_normalized();
    let steps = train.window;

    for epoch in 1..=config.max_epochs {
        let started = Instant::now();
        if config.shuffle {
            order.sort_unstable();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix64(
                config.seed ^ mix64(!(epoch as u64)),
            )));
        }
        let mut sse = 0.0;
        for batch in order.chunks(config.batch_size) {
            let windows: Vec<&[f64]> = batch.iter().map(|&k| train.window(k)).collect();
            let ys: Vec<f64> = batch.iter().map(|&k| targets[k]).collect();
            let masks: Option<Vec<DropoutMasks>> = (net.config.dropout > 0.0).then(|| {
                batch
                    .iter()
                    .map(|&k| {
                        DropoutMasks::sample(&net, steps, &mut sample_rng(config.seed, epoch, k))
                    })
                    .collect()
            });
            let (loss, grads) = bptt_gradients(&net, &windows, &ys, masks.as_deref())
                .map_err(|e| fail(e, &trace))?;
            sse += loss * batch.len() as f64;
            opt.step(&mut net.params, &grads, lr);
        }
        let train_loss = sse / train.len() as f64;
        let val_loss = evaluate_loss(&net, val).map_err(|e| fail(e, &trace))?;
        trace.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
        });
        trace.wall_seconds.push(started.elapsed().as_secs_f64());
        log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6} lr {lr}");
        if !(train_loss.is_finite() && val_loss.is_finite()) {
            trace.stop = Some(StopReason::Diverged);
            return Err(fail(
                Error::Numeric(format!("loss diverged at epoch {epoch}")),
                &trace,
            ));
        }
        if val_loss < best.0 {
            best = (val_loss, net.params.clone());
            trace.best_epoch = epoch;
            stale = 0;
            plateau = 0;
        } else {
            stale += 1;
            plateau += 1;
            if stale >= config.early_stop_patience {
                trace.stop = Some(StopReason::EarlyStop);
                break;
            }
            if plateau >= config.plateau_patience {
                lr *= config.plateau_factor;
                plateau = 0;
            }
        }
    }
    trace.stop.get_or_insert(StopReason::MaxEpochs);
    net.params = best.1;
    Ok(FitOutcome {
        network: net,
        trace,
    })
}
