//! Stacked LSTM network with a single-output dense head.
//!
//! All parameters live in one flat vector so optimizers and gradient checks
//! can treat them uniformly. Per layer the layout is
//! `[W_f, W_i, W_g, W_o, b_f, b_i, b_g, b_o]`; each `W_*` is row-major
//! `hidden × (hidden + input)` acting on the concatenation `[h_{t-1}, x_t]`.
//! The dense weights and bias follow the last layer.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::NormalizationSpec;
use crate::ingest::{manifest_path, ByteReader};

pub const CHECKPOINT_MAGIC: &[u8; 9] = b"LSTMCKPT1";

const GATE_NAMES: [&str; 4] = ["forget", "input", "modulation", "output"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    /// Normalized exponential across the whole vector.
    Softmax,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Tanh,
        Activation::Relu,
        Activation::Softmax,
        Activation::Sigmoid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Softmax => "softmax",
        }
    }

    /// Scalar form; softmax over a single element is the constant 1.
    pub fn scalar(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Softmax => 1.0,
        }
    }

    pub fn scalar_derivative(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Tanh => 1.0 - x.tanh().powi(2),
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softmax => 0.0,
        }
    }

    pub fn forward(self, pre: &[f64], out: &mut [f64]) {
        match self {
            Activation::Softmax => {
                let max = pre.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for (o, p) in out.iter_mut().zip(pre) {
                    *o = (p - max).exp();
                    sum += *o;
                }
                for o in out.iter_mut() {
                    *o /= sum;
                }
            }
            _ => {
                for (o, p) in out.iter_mut().zip(pre) {
                    *o = self.scalar(*p);
                }
            }
        }
    }

    /// Vector-Jacobian product: `grad_pre = J(pre)ᵀ · grad_out`, given the
    /// forward output `out`.
    pub fn backward(self, pre: &[f64], out: &[f64], grad_out: &[f64], grad_pre: &mut [f64]) {
        match self {
            Activation::Sigmoid => {
                for ((g, o), d) in grad_pre.iter_mut().zip(out).zip(grad_out) {
                    *g = d * o * (1.0 - o);
                }
            }
            Activation::Tanh => {
                for ((g, o), d) in grad_pre.iter_mut().zip(out).zip(grad_out) {
                    *g = d * (1.0 - o * o);
                }
            }
            Activation::Relu => {
                for ((g, p), d) in grad_pre.iter_mut().zip(pre).zip(grad_out) {
                    *g = if *p > 0.0 { *d } else { 0.0 };
                }
            }
            Activation::Softmax => {
                let dot: f64 = out.iter().zip(grad_out).map(|(o, d)| o * d).sum();
                for ((g, o), d) in grad_pre.iter_mut().zip(out).zip(grad_out) {
                    *g = o * (d - dot);
                }
            }
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "softmax" => Ok(Activation::Softmax),
            other => Err(Error::Config(format!(
                "unknown activation '{other}' (expected tanh | relu | softmax | sigmoid)"
            ))),
        }
    }
}

/// Hidden widths of the stacked layers, written `64x128x128x64`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Architecture(Vec<usize>);

impl Architecture {
    pub fn new(layers: Vec<usize>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("architecture has no layers".into()));
        }
        if layers.contains(&0) {
            return Err(Error::Config("architecture has a zero-width layer".into()));
        }
        Ok(Architecture(layers))
    }

    pub fn layers(&self) -> &[usize] {
        &self.0
    }

    pub fn last_width(&self) -> usize {
        *self.0.last().expect("non-empty")
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let layers = s
            .split(['x', 'X', '×'])
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("invalid architecture '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Architecture::new(layers)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

impl TryFrom<String> for Architecture {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Architecture> for String {
    fn from(a: Architecture) -> String {
        a.to_string()
    }
}

/// Borrowed parameters of one LSTM layer.
#[derive(Debug, Clone, Copy)]
pub struct LayerParams<'a> {
    pub input: usize,
    pub hidden: usize,
    /// `4·hidden × (hidden + input)`, gate-major `[f, i, g, o]`.
    pub w: &'a [f64],
    /// `4·hidden`, gate-major.
    pub b: &'a [f64],
}

impl LayerParams<'_> {
    pub fn concat_width(&self) -> usize {
        self.hidden + self.input
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(hidden: usize) -> Self {
        CellState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Intermediate values of one time step, kept for backpropagation.
#[derive(Debug, Clone, Default)]
pub(crate) struct StepCache {
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub pre_g: Vec<f64>,
    /// `act(c_t)`.
    pub act_c: Vec<f64>,
}

/// Computes gate pre-activations `W·[h, x] + b` into `a`.
fn gate_preactivations(p: &LayerParams<'_>, h: &[f64], x: &[f64], a: &mut [f64]) {
    let width = p.concat_width();
    for (r, out) in a.iter_mut().enumerate() {
        let row = &p.w[r * width..(r + 1) * width];
        let (wh, wx) = row.split_at(p.hidden);
        let mut acc = p.b[r];
        for (w, v) in wh.iter().zip(h) {
            acc += w * v;
        }
        for (w, v) in wx.iter().zip(x) {
            acc += w * v;
        }
        *out = acc;
    }
}

pub(crate) fn step(
    p: &LayerParams<'_>,
    activation: Activation,
    x: &[f64],
    prev: &CellState,
) -> Result<(CellState, StepCache)> {
    let n = p.hidden;
    if x.len() != p.input || prev.h.len() != n || prev.c.len() != n {
        return Err(Error::Shape(format!(
            "cell expects input {} and state {n}, got input {} and state {}/{}",
            p.input,
            x.len(),
            prev.h.len(),
            prev.c.len()
        )));
    }
    let mut a = vec![0.0; 4 * n];
    gate_preactivations(p, &prev.h, x, &mut a);
    if let Some(bad) = a.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite {} gate pre-activation",
            GATE_NAMES[bad / n]
        )));
    }
    let f: Vec<f64> = a[..n].iter().map(|v| sigmoid(*v)).collect();
    let i: Vec<f64> = a[n..2 * n].iter().map(|v| sigmoid(*v)).collect();
    let pre_g = a[2 * n..3 * n].to_vec();
    let mut g = vec![0.0; n];
    activation.forward(&pre_g, &mut g);
    let o: Vec<f64> = a[3 * n..].iter().map(|v| sigmoid(*v)).collect();
    let c: Vec<f64> = (0..n).map(|k| f[k] * prev.c[k] + i[k] * g[k]).collect();
    let mut act_c = vec![0.0; n];
    activation.forward(&c, &mut act_c);
    let h: Vec<f64> = o.iter().zip(&act_c).map(|(o, s)| o * s).collect();
    if let Some(k) = c.iter().chain(&h).position(|v| !v.is_finite()) {
        let what = if k < n { "cell state" } else { "hidden state" };
        return Err(Error::Numeric(format!("non-finite {what}")));
    }
    Ok((
        CellState { h, c },
        StepCache {
            f,
            i,
            g,
            o,
            pre_g,
            act_c,
        },
    ))
}

/// One LSTM time step: forget, input and output gates use the sigmoid;
/// the candidate and the cell output use `activation`.
pub fn cell_step(
    params: &LayerParams<'_>,
    activation: Activation,
    x: &[f64],
    prev: &CellState,
) -> Result<CellState> {
    step(params, activation, x, prev).map(|(s, _)| s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LayerLayout {
    pub input: usize,
    pub hidden: usize,
    pub w: usize,
    pub b: usize,
}

impl LayerLayout {
    pub fn w_len(&self) -> usize {
        4 * self.hidden * (self.hidden + self.input)
    }
}

fn layout(arch: &Architecture, input_width: usize) -> (Vec<LayerLayout>, usize) {
    let mut offset = 0;
    let mut input = input_width;
    let mut out = Vec::new();
    for &hidden in arch.layers() {
        let l = LayerLayout {
            input,
            hidden,
            w: offset,
            b: offset + 4 * hidden * (hidden + input),
        };
        offset = l.b + 4 * hidden;
        input = hidden;
        out.push(l);
    }
    (out, offset)
}

/// Everything needed to rebuild a network besides its parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub architecture: Architecture,
    pub input_width: usize,
    pub cell_activation: Activation,
    pub dense_activation: Activation,
    pub dropout: f64,
    /// When false the last LSTM layer's output is exempt from dropout.
    pub dropout_last_layer: bool,
}

impl NetworkConfig {
    pub fn new(architecture: Architecture, input_width: usize) -> Self {
        NetworkConfig {
            architecture,
            input_width,
            cell_activation: Activation::Tanh,
            dense_activation: Activation::Tanh,
            dropout: 0.0,
            dropout_last_layer: true,
        }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.cell_activation = activation;
        self.dense_activation = activation;
        self
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout = rate;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.input_width == 0 {
            return Err(Error::Config("input width must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmNetwork {
    pub config: NetworkConfig,
    pub params: Vec<f64>,
    layers: Vec<LayerLayout>,
    dense: usize,
}

impl LstmNetwork {
    /// A network with every parameter zero.
    pub fn zeros(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let (layers, dense) = layout(&config.architecture, config.input_width);
        let n_last = config.architecture.last_width();
        Ok(LstmNetwork {
            params: vec![0.0; dense + n_last + 1],
            config,
            layers,
            dense,
        })
    }

    /// Glorot-uniform weights, zero biases except the forget gate (1.0).
    /// The same seed always yields the same parameters.
    pub fn init(config: NetworkConfig, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in net.layers.clone() {
            let limit = (6.0 / ((l.hidden + l.input) + l.hidden) as f64).sqrt();
            for w in &mut net.params[l.w..l.w + l.w_len()] {
                *w = rng.random_range(-limit..limit);
            }
            for b in &mut net.params[l.b..l.b + l.hidden] {
                *b = 1.0;
            }
        }
        let n_last = net.config.architecture.last_width();
        let limit = (6.0 / (n_last + 1) as f64).sqrt();
        for w in &mut net.params[net.dense..net.dense + n_last] {
            *w = rng.random_range(-limit..limit);
        }
        Ok(net)
    }

    pub fn from_params(config: NetworkConfig, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        if params.len() != net.params.len() {
            return Err(Error::Shape(format!(
                "network needs {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_width(&self) -> usize {
        self.config.input_width
    }

    pub(crate) fn layouts(&self) -> &[LayerLayout] {
        &self.layers
    }

    pub(crate) fn dense_offset(&self) -> usize {
        self.dense
    }

    pub fn layer(&self, k: usize) -> LayerParams<'_> {
        let l = self.layers[k];
        LayerParams {
            input: l.input,
            hidden: l.hidden,
            w: &self.params[l.w..l.w + l.w_len()],
            b: &self.params[l.b..l.b + 4 * l.hidden],
        }
    }

    pub fn dense_weights(&self) -> &[f64] {
        &self.params[self.dense..self.params.len() - 1]
    }

    pub fn dense_bias(&self) -> f64 {
        self.params[self.params.len() - 1]
    }

    fn dropout_applies(&self, layer: usize) -> bool {
        self.config.dropout > 0.0
            && (self.config.dropout_last_layer || layer + 1 < self.layers.len())
    }

    /// Prediction for one `steps × input_width` window, without dropout.
    pub fn predict(&self, window: &[f64]) -> Result<f64> {
        forward(self, window, Mode::Infer).map(|p| p.prediction)
    }
}

/// Per-layer multiplicative dropout factors: 0 for dropped units and
/// `1 / keep` for kept ones. `None` where dropout does not apply.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub layers: Vec<Option<Vec<f64>>>,
}

impl DropoutMasks {
    pub fn sample(net: &LstmNetwork, steps: usize, rng: &mut impl Rng) -> Self {
        let keep = 1.0 - net.config.dropout;
        let layers = (0..net.num_layers())
            .map(|k| {
                net.dropout_applies(k).then(|| {
                    (0..steps * net.layers[k].hidden)
                        .map(|_| {
                            if rng.random::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
            })
            .collect();
        DropoutMasks { layers }
    }

    pub fn none(net: &LstmNetwork) -> Self {
        DropoutMasks {
            layers: vec![None; net.num_layers()],
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    Train(&'a DropoutMasks),
    Infer,
}

/// Cached activations of one layer over the whole window.
#[derive(Debug, Clone)]
pub(crate) struct LayerTrace {
    /// Input sequence seen by this layer, `steps × input`.
    pub inputs: Vec<f64>,
    /// Hidden and cell states, `steps + 1` entries starting at zeros.
    pub states: Vec<CellState>,
    pub steps: Vec<StepCache>,
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub prediction: f64,
    pub(crate) layers: Vec<LayerTrace>,
    /// Input to the dense head (last layer's final, possibly masked, output).
    pub(crate) head_input: Vec<f64>,
    pub(crate) head_pre: f64,
}

/// Runs the window through every layer left to right and applies the dense
/// head to the last layer's final output.
pub fn forward(net: &LstmNetwork, window: &[f64], mode: Mode<'_>) -> Result<ForwardPass> {
    let width = net.input_width();
    if window.is_empty() || !window.len().is_multiple_of(width) {
        return Err(Error::Shape(format!(
            "window of {} values is not a multiple of input width {width}",
            window.len()
        )));
    }
    let steps = window.len() / width;
    let mut inputs = window.to_vec();
    let mut traces = Vec::with_capacity(net.num_layers());
    for k in 0..net.num_layers() {
        let p = net.layer(k);
        let n = p.hidden;
        let mut states = Vec::with_capacity(steps + 1);
        states.push(CellState::zeros(n));
        let mut caches = Vec::with_capacity(steps);
        let mut outputs = Vec::with_capacity(steps * n);
        for t in 0..steps {
            let x = &inputs[t * p.input..(t + 1) * p.input];
            let (state, cache) = step(&p, net.config.cell_activation, x, &states[t])?;
            outputs.extend_from_slice(&state.h);
            states.push(state);
            caches.push(cache);
        }
        if let Mode::Train(masks) = mode {
            if let Some(Some(mask)) = masks.layers.get(k) {
                for (o, m) in outputs.iter_mut().zip(mask) {
                    *o *= m;
                }
            }
        }
        traces.push(LayerTrace {
            inputs: std::mem::replace(&mut inputs, outputs),
            states,
            steps: caches,
        });
    }
    let n_last = net.config.architecture.last_width();
    let head_input = inputs[(steps - 1) * n_last..].to_vec();
    let head_pre: f64 = net
        .dense_weights()
        .iter()
        .zip(&head_input)
        .map(|(w, h)| w * h)
        .sum::<f64>()
        + net.dense_bias();
    let prediction = net.config.dense_activation.scalar(head_pre);
    if !prediction.is_finite() {
        return Err(Error::Numeric("non-finite dense output".into()));
    }
    Ok(ForwardPass {
        prediction,
        layers: traces,
        head_input,
        head_pre,
    })
}

/// Metadata stored next to a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub network: NetworkConfig,
    pub parameters: usize,
    pub features: Vec<String>,
    pub normalization: Option<NormalizationSpec>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: LstmNetwork,
    pub features: Vec<String>,
    pub normalization: Option<NormalizationSpec>,
    pub seed: u64,
}

impl Checkpoint {
    pub fn manifest(&self) -> CheckpointManifest {
        CheckpointManifest {
            format: String::from_utf8_lossy(CHECKPOINT_MAGIC).into_owned(),
            network: self.network.config.clone(),
            parameters: self.network.param_count(),
            features: self.features.clone(),
            normalization: self.normalization.clone(),
            seed: self.seed,
        }
    }

    /// Parameter bytes exactly as written to disk.
    pub fn to_bytes(&self) -> Vec<u8> {
        let params = &self.network.params;
        let mut out = Vec::with_capacity(CHECKPOINT_MAGIC.len() + 8 + 8 * params.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(params.len() as u64).to_le_bytes());
        for p in params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&self.to_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))?;
        let mp = manifest_path(path);
        let json = serde_json::to_string_pretty(&self.manifest())
            .map_err(|e| Error::Format(e.to_string()))?;
        fs::write(&mp, json).map_err(|e| Error::io(&mp, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mp = manifest_path(path);
        let manifest: CheckpointManifest =
            serde_json::from_str(&fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?)
                .map_err(|e| Error::Format(format!("{}: {e}", mp.display())))?;
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let mut r = ByteReader::new(&bytes);
        if r.take(CHECKPOINT_MAGIC.len())? != CHECKPOINT_MAGIC {
            return Err(Error::Format(format!(
                "{} is not an LSTMCKPT1 checkpoint",
                path.display()
            )));
        }
        let count = r.u64()? as usize;
        let params = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        if !r.is_at_end() {
            return Err(Error::Format(
                "trailing bytes after checkpoint parameters".into(),
            ));
        }
        Ok(Checkpoint {
            network: LstmNetwork::from_params(manifest.network, params)?,
            features: manifest.features,
            normalization: manifest.normalization,
            seed: manifest.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(arch: &str, width: usize, seed: u64) -> LstmNetwork {
        LstmNetwork::init(NetworkConfig::new(arch.parse().unwrap(), width), seed).unwrap()
    }

    #[test]
    fn activation_derivatives_match_finite_differences() {
        let h = 1e-6;
        for act in Activation::ALL {
            for &x in &[-2.3, -0.4, 0.7, 1.9] {
                let fd = (act.scalar(x + h) - act.scalar(x - h)) / (2.0 * h);
                assert!(
                    (fd - act.scalar_derivative(x)).abs() < 1e-6,
                    "{act:?} at {x}"
                );
            }
        }
    }

    #[test]
    fn softmax_vector_jacobian() {
        let pre = [0.3, -1.2, 2.0];
        let grad = [0.5, -0.25, 1.0];
        let mut out = [0.0; 3];
        Activation::Softmax.forward(&pre, &mut out);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let mut analytic = [0.0; 3];
        Activation::Softmax.backward(&pre, &out, &grad, &mut analytic);
        let h = 1e-6;
        for j in 0..3 {
            let eval = |d: f64| {
                let mut p = pre;
                p[j] += d;
                let mut o = [0.0; 3];
                Activation::Softmax.forward(&p, &mut o);
                o.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            assert!((fd - analytic[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_network_stays_at_zero() {
        let net = LstmNetwork::zeros(NetworkConfig::new("3".parse().unwrap(), 2)).unwrap();
        let p = net.layer(0);
        let mut s = CellState::zeros(3);
        for _ in 0..5 {
            s = cell_step(&p, Activation::Tanh, &[0.7, -1.3], &s).unwrap();
            assert_eq!(s, CellState::zeros(3));
        }
    }

    #[test]
    fn saturated_gates_scalar_reference() {
        // all weights zero, forget/input/output biases +50, candidate bias 1
        let w = vec![0.0; 4 * 2];
        let b = vec![50.0, 50.0, 1.0, 50.0];
        let p = LayerParams {
            input: 1,
            hidden: 1,
            w: &w,
            b: &b,
        };
        let s = cell_step(&p, Activation::Tanh, &[0.3], &CellState::zeros(1)).unwrap();
        assert!((s.c[0] - 1f64.tanh()).abs() < 1e-12);
        assert!((s.c[0] - 0.7616).abs() < 1e-4);
        assert!((s.h[0] - 0.6421).abs() < 1e-4);
    }

    #[test]
    fn zero_weight_network_outputs_activated_bias() {
        let mut net = LstmNetwork::zeros(
            NetworkConfig::new("4x3".parse().unwrap(), 2).with_activation(Activation::Sigmoid),
        )
        .unwrap();
        *net.params.last_mut().unwrap() = 0.4;
        let y = net.predict(&[0.5; 2 * 7]).unwrap();
        assert_eq!(y, sigmoid(0.4));
    }

    #[test]
    fn inference_is_deterministic() {
        let net = tiny("5x4", 3, 11);
        let window: Vec<f64> = (0..24 * 3).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(
            net.predict(&window).unwrap().to_bits(),
            net.predict(&window).unwrap().to_bits()
        );
    }

    #[test]
    fn seeded_init_is_reproducible() {
        assert_eq!(tiny("8x8", 4, 5), tiny("8x8", 4, 5));
        assert_ne!(tiny("8x8", 4, 5).params, tiny("8x8", 4, 6).params);
        let net = tiny("8", 4, 5);
        let b = net.layer(0).b;
        assert!(b[..8].iter().all(|v| *v == 1.0));
        assert!(b[8..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn four_layer_parameter_count() {
        assert_eq!(tiny("64x128x128x64", 14, 0).param_count(), 300_097);
    }

    #[test]
    fn architecture_parsing() {
        let a: Architecture = "64x128x128x64".parse().unwrap();
        assert_eq!(a.layers(), &[64, 128, 128, 64]);
        assert_eq!(a.to_string(), "64x128x128x64");
        assert!("64x0".parse::<Architecture>().is_err());
        assert!("".parse::<Architecture>().is_err());
        assert!("abc".parse::<Architecture>().is_err());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let net = tiny("3", 2, 1);
        assert!(matches!(net.predict(&[0.0; 5]), Err(Error::Shape(_))));
    }

    #[test]
    fn non_finite_input_names_the_gate() {
        let net = tiny("3", 2, 1);
        let err = net.predict(&[f64::NAN, 0.0]).unwrap_err();
        assert!(err.to_string().contains("forget"), "{err}");
    }

    #[test]
    fn checkpoint_round_trip_preserves_predictions() {
        let net = tiny("6x5", 3, 9);
        let ck = Checkpoint {
            network: net.clone(),
            features: vec!["a".into(), "b".into(), "c".into()],
            normalization: None,
            seed: 9,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        let window: Vec<f64> = (0..30).map(|i| i as f64 / 30.0).collect();
        assert_eq!(
            back.network.predict(&window).unwrap().to_bits(),
            net.predict(&window).unwrap().to_bits()
        );
    }
}
