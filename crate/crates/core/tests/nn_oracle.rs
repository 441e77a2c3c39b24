//! Straight-line reimplementation of the LSTM cell and network, used as an
//! oracle for the production forward pass.

use loadcast::nn::{
    cell_step, forward, Activation, CellState, DropoutMasks, LstmNetwork, Mode, NetworkConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn act(a: Activation, v: &[f64]) -> Vec<f64> {
    match a {
        Activation::Sigmoid => v.iter().map(|x| sig(*x)).collect(),
        Activation::Tanh => v.iter().map(|x| x.tanh()).collect(),
        Activation::Relu => v.iter().map(|x| if *x > 0.0 { *x } else { 0.0 }).collect(),
        Activation::Softmax => {
            let m = v.iter().cloned().fold(f64::MIN, f64::max);
            let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|x| x / s).collect()
        }
    }
}

#[allow(clippy::too_many_arguments)]
/// One cell step from raw slices: `w` is `4n × (n + m)` row-major with rows
/// ordered forget, input, candidate, output and columns `[h, x]`.
fn oracle_step(
    w: &[f64],
    b: &[f64],
    n: usize,
    m: usize,
    a: Activation,
    x: &[f64],
    h: &[f64],
    c: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let gate = |g: usize| -> Vec<f64> {
        (0..n)
            .map(|j| {
                let r = g * n + j;
                let mut z = b[r];
                for k in 0..n {
                    z += w[r * (n + m) + k] * h[k];
                }
                for k in 0..m {
                    z += w[r * (n + m) + n + k] * x[k];
                }
                z
            })
            .collect()
    };
    let f: Vec<f64> = gate(0).into_iter().map(sig).collect();
    let i: Vec<f64> = gate(1).into_iter().map(sig).collect();
    let g = act(a, &gate(2));
    let o: Vec<f64> = gate(3).into_iter().map(sig).collect();
    let c_new: Vec<f64> = (0..n).map(|j| f[j] * c[j] + i[j] * g[j]).collect();
    let s = act(a, &c_new);
    let h_new = (0..n).map(|j| o[j] * s[j]).collect();
    (h_new, c_new)
}

fn oracle_predict(net: &LstmNetwork, window: &[f64]) -> f64 {
    let a = net.config.cell_activation;
    let mut seq = window.to_vec();
    let mut m = net.input_width();
    let steps = window.len() / m;
    for k in 0..net.num_layers() {
        let p = net.layer(k);
        let n = p.hidden;
        let (mut h, mut c) = (vec![0.0; n], vec![0.0; n]);
        let mut out = Vec::new();
        for t in 0..steps {
            let (h2, c2) = oracle_step(p.w, p.b, n, m, a, &seq[t * m..(t + 1) * m], &h, &c);
            out.extend_from_slice(&h2);
            h = h2;
            c = c2;
        }
        seq = out;
        m = n;
    }
    let last = &seq[(steps - 1) * m..];
    let z: f64 = net
        .dense_weights()
        .iter()
        .zip(last)
        .map(|(w, h)| w * h)
        .sum::<f64>()
        + net.dense_bias();
    act(net.config.dense_activation, &[z])[0]
}

fn random_net(rng: &mut ChaCha8Rng, a: Activation) -> LstmNetwork {
    let f = rng.random_range(1..=4);
    let layers: Vec<String> = (0..rng.random_range(1..=3))
        .map(|_| rng.random_range(1..=5).to_string())
        .collect();
    let config = NetworkConfig::new(layers.join("x").parse().unwrap(), f).with_activation(a);
    let mut net = LstmNetwork::init(config, rng.random()).unwrap();
    for p in net.params.iter_mut() {
        *p += rng.random_range(-0.5..0.5);
    }
    net
}

#[test]
fn cell_step_matches_oracle_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(325);
    for trial in 0..1000 {
        let a = Activation::ALL[trial % 4];
        let (n, m) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let config = NetworkConfig::new(n.to_string().parse().unwrap(), m).with_activation(a);
        let params: Vec<f64> = (0..LstmNetwork::zeros(config.clone()).unwrap().param_count())
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let net = LstmNetwork::from_params(config, params).unwrap();
        let p = net.layer(0);
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let prev = CellState {
            h: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            c: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
        };
        let got = cell_step(&p, a, &x, &prev).unwrap();
        let (h, c) = oracle_step(p.w, p.b, n, m, a, &x, &prev.h, &prev.c);
        for (u, v) in got.h.iter().chain(&got.c).zip(h.iter().chain(&c)) {
            assert!((u - v).abs() <= 1e-12, "trial {trial} {a:?}: {u} vs {v}");
        }
    }
}

#[test]
fn network_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(302);
    for trial in 0..200 {
        let net = random_net(&mut rng, Activation::ALL[trial % 4]);
        let steps = rng.random_range(1..=8);
        let window: Vec<f64> = (0..steps * net.input_width())
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        let got = net.predict(&window).unwrap();
        let want = oracle_predict(&net, &window);
        assert!(
            (got - want).abs() <= 1e-12,
            "trial {trial}: {got} vs {want}"
        );
    }
}

#[test]
fn dropout_expectation_matches_inference() {
    let config = NetworkConfig::new("8x8".parse().unwrap(), 3).with_dropout(0.2);
    let net = LstmNetwork::init(config, 311).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(311);
    let steps = 6;
    let window: Vec<f64> = (0..steps * 3).map(|_| rng.random_range(0.0..1.0)).collect();
    let infer = net.predict(&window).unwrap();
    let draws = 10_000;
    let mut sum = 0.0;
    for _ in 0..draws {
        let masks = DropoutMasks::sample(&net, steps, &mut rng);
        sum += forward(&net, &window, Mode::Train(&masks))
            .unwrap()
            .prediction;
    }
    let mean = sum / draws as f64;
    assert!(
        (mean - infer).abs() <= 0.02 * infer.abs(),
        "mean {mean} vs inference {infer}"
    );
}

#[test]
fn dropout_masks_are_inverted_and_skip_exempt_layers() {
    let config = NetworkConfig {
        dropout_last_layer: false,
        ..NetworkConfig::new("4x4".parse().unwrap(), 2).with_dropout(0.25)
    };
    let net = LstmNetwork::init(config, 1).unwrap();
    let masks = DropoutMasks::sample(&net, 3, &mut ChaCha8Rng::seed_from_u64(2));
    assert!(masks.layers[1].is_none());
    let first = masks.layers[0].as_ref().unwrap();
    assert_eq!(first.len(), 12);
    assert!(first
        .iter()
        .all(|v| *v == 0.0 || (*v - 1.0 / 0.75).abs() < 1e-15));
}

proptest! {
    #[test]
    fn prediction_is_bounded_by_dense_activation(seed in any::<u64>(), steps in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for a in [Activation::Tanh, Activation::Sigmoid] {
            let net = random_net(&mut rng, a);
            let window: Vec<f64> = (0..steps * net.input_width()).map(|_| rng.random_range(-5.0..5.0)).collect();
            let y = net.predict(&window).unwrap();
            let (lo, hi) = if a == Activation::Tanh { (-1.0, 1.0) } else { (0.0, 1.0) };
            prop_assert!((lo..=hi).contains(&y));
        }
    }

    #[test]
    fn all_kept_masks_equal_inference(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_net(&mut rng, Activation::Tanh);
        let window: Vec<f64> = (0..4 * net.input_width()).map(|_| rng.random_range(0.0..1.0)).collect();
        let masks = DropoutMasks::none(&net);
        let train = forward(&net, &window, Mode::Train(&masks)).unwrap().prediction;
        prop_assert_eq!(train, net.predict(&window).unwrap());
    }
}
