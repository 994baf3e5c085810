#![allow(dead_code)]
#![allow(clippy::type_complexity, clippy::needless_range_loop)]

use parnet::network::cost_cross_entropy;
use parnet::{ActivationKind, Dataset, Layer, Matrix, Network, NetworkConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const HIDDEN_KINDS: [ActivationKind; 4] = [
    ActivationKind::Sigmoid,
    ActivationKind::Tanh,
    ActivationKind::Relu,
    ActivationKind::LeakyRelu { slope: 0.01 },
];

pub fn config(sizes: &[usize], hidden: ActivationKind, output: ActivationKind, seed: u64) -> NetworkConfig {
    let mut activations = vec![hidden; sizes.len() - 2];
    activations.push(output);
    NetworkConfig {
        layer_sizes: sizes.to_vec(),
        activations,
        learning_rate: 0.1,
        batch_size: 4,
        epochs: 1,
        seed,
        weight_init: Default::default(),
    }
}

/// Inputs uniform in [0, 1], labels uniform over the classes.
pub fn random_batch(rng: &mut ChaCha8Rng, dim: usize, classes: usize, m: usize) -> (Matrix, Matrix) {
    let x = Matrix::from_fn(dim, m, |_, _| rng.random_range(0.0..1.0));
    let mut e = Matrix::zeros(classes, m);
    for c in 0..m {
        e.set(rng.random_range(0..classes), c, 1.0);
    }
    (x, e)
}

pub fn batch_cost(net: &Network, x: &Matrix, e: &Matrix) -> f64 {
    cost_cross_entropy(&net.output(x).unwrap(), e).unwrap()
}

#[derive(Debug, Default)]
pub struct FdReport {
    pub checked: usize,
    pub worst_abs: f64,
    pub failures: Vec<String>,
}

fn close(analytic: f64, numeric: f64, rel: f64, abs: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= abs || diff <= rel * analytic.abs().max(numeric.abs())
}

fn param_mut(net: &mut Network, l: usize, which: usize, i: usize) -> &mut f64 {
    let layer = &mut net.layers_mut()[l];
    let m = if which == 0 { &mut layer.weights } else { &mut layer.biases };
    &mut m.data_mut()[i]
}

/// Compares every backpropagated partial with a central difference of step `h`.
pub fn finite_difference_check(net: &Network, x: &Matrix, e: &Matrix, h: f64, rel: f64, abs: f64) -> FdReport {
    let grads = net.backward(&net.forward(x).unwrap(), e).unwrap();
    let mut report = FdReport::default();
    let mut probe = net.clone();
    for l in 0..net.layers().len() {
        for (which, analytic) in [(0, &grads.d_weights[l]), (1, &grads.d_biases[l])] {
            for i in 0..analytic.data().len() {
                let original = *param_mut(&mut probe, l, which, i);
                *param_mut(&mut probe, l, which, i) = original + h;
                let up = batch_cost(&probe, x, e);
                *param_mut(&mut probe, l, which, i) = original - h;
                let down = batch_cost(&probe, x, e);
                *param_mut(&mut probe, l, which, i) = original;
                let numeric = (up - down) / (2.0 * h);
                let a = analytic.data()[i];
                report.checked += 1;
                report.worst_abs = report.worst_abs.max((a - numeric).abs());
                if !close(a, numeric, rel, abs) {
                    report.failures.push(format!(
                        "layer {l} {} [{i}]: backprop {a:e}, finite difference {numeric:e}",
                        if which == 0 { "weight" } else { "bias" }
                    ));
                }
            }
        }
    }
    report
}

/// A 2-3-2 sigmoid/softmax network with fixed, unremarkable parameters.
pub fn net_232() -> Network {
    let layers = vec![
        Layer {
            weights: Matrix::from_rows(&[[0.15, -0.25], [0.30, 0.05], [-0.40, 0.20]]),
            biases: Matrix::column(&[0.10, -0.20, 0.05]),
            activation: ActivationKind::Sigmoid,
        },
        Layer {
            weights: Matrix::from_rows(&[[0.50, -0.30, 0.20], [-0.10, 0.40, 0.35]]),
            biases: Matrix::column(&[0.02, -0.03]),
            activation: ActivationKind::Softmax,
        },
    ];
    let cfg = NetworkConfig {
        layer_sizes: vec![2, 3, 2],
        activations: vec![ActivationKind::Sigmoid, ActivationKind::Softmax],
        learning_rate: 0.5,
        batch_size: 2,
        epochs: 1,
        seed: 0,
        weight_init: Default::default(),
    };
    Network::from_layers(layers, cfg).unwrap()
}

/// One gradient step on `net_232` computed scalar by scalar:
/// returns (W1, b1, W2, b2) after the update.
pub fn oracle_232_step(
    w1: [[f64; 2]; 3],
    b1: [f64; 3],
    w2: [[f64; 3]; 2],
    b2: [f64; 2],
    xs: &[[f64; 2]],
    es: &[[f64; 2]],
    eta: f64,
) -> ([[f64; 2]; 3], [f64; 3], [[f64; 3]; 2], [f64; 2]) {
    let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
    let m = xs.len() as f64;
    let mut gw1 = [[0.0; 2]; 3];
    let mut gb1 = [0.0; 3];
    let mut gw2 = [[0.0; 3]; 2];
    let mut gb2 = [0.0; 2];
    for (x, e) in xs.iter().zip(es) {
        let mut h = [0.0; 3];
        let mut z1 = [0.0; 3];
        for i in 0..3 {
            z1[i] = w1[i][0] * x[0] + w1[i][1] * x[1] + b1[i];
            h[i] = sig(z1[i]);
        }
        let mut z2 = [0.0; 2];
        for k in 0..2 {
            z2[k] = w2[k][0] * h[0] + w2[k][1] * h[1] + w2[k][2] * h[2] + b2[k];
        }
        let top = z2[0].max(z2[1]);
        let s = (z2[0] - top).exp() + (z2[1] - top).exp();
        let p = [(z2[0] - top).exp() / s, (z2[1] - top).exp() / s];
        // C = -sum_k e_k ln p_k
        // dC/dz2_k = sum_j (-e_j / p_j) * p_j (delta_jk - p_k) = p_k - e_k (one-hot e)
        // dC/dW2[k][i] = dC/dz2_k * h_i
        // dC/dz1_i = sum_k dC/dz2_k * W2[k][i] * h_i (1 - h_i)
        // dC/dW1[i][j] = dC/dz1_i * x_j
        let mut dz2 = [0.0; 2];
        for k in 0..2 {
            dz2[k] = -(e[0] / p[0]) * p[0] * (if k == 0 { 1.0 } else { 0.0 } - p[k])
                - (e[1] / p[1]) * p[1] * (if k == 1 { 1.0 } else { 0.0 } - p[k]);
        }
        for k in 0..2 {
            for i in 0..3 {
                gw2[k][i] += dz2[k] * h[i] / m;
            }
            gb2[k] += dz2[k] / m;
        }
        for i in 0..3 {
            let dz1 = (dz2[0] * w2[0][i] + dz2[1] * w2[1][i]) * h[i] * (1.0 - h[i]);
            for j in 0..2 {
                gw1[i][j] += dz1 * x[j] / m;
            }
            gb1[i] += dz1 / m;
        }
    }
    let mut out = (w1, b1, w2, b2);
    for i in 0..3 {
        for j in 0..2 {
            out.0[i][j] -= eta * gw1[i][j];
        }
        out.1[i] -= eta * gb1[i];
    }
    for k in 0..2 {
        for i in 0..3 {
            out.2[k][i] -= eta * gw2[k][i];
        }
        out.3[k] -= eta * gb2[k];
    }
    out
}

/// Runs the oracle against `Network::train_batch` and returns the largest
/// absolute parameter difference.
pub fn oracle_232_max_diff() -> f64 {
    let mut net = net_232();
    let xs = [[0.9, 0.1], [0.2, 0.7]];
    let es = [[1.0, 0.0], [0.0, 1.0]];
    let l = net.layers();
    let w1: [[f64; 2]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| l[0].weights.get(i, j)));
    let b1: [f64; 3] = std::array::from_fn(|i| l[0].biases.get(i, 0));
    let w2: [[f64; 3]; 2] = std::array::from_fn(|k| std::array::from_fn(|i| l[1].weights.get(k, i)));
    let b2: [f64; 2] = std::array::from_fn(|k| l[1].biases.get(k, 0));
    let want = oracle_232_step(w1, b1, w2, b2, &xs, &es, 0.5);

    let x = Matrix::from_fn(2, 2, |r, c| xs[c][r]);
    let e = Matrix::from_fn(2, 2, |r, c| es[c][r]);
    net.train_batch(&x, &e).unwrap();
    let l = net.layers();
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        for j in 0..2 {
            worst = worst.max((l[0].weights.get(i, j) - want.0[i][j]).abs());
        }
        worst = worst.max((l[0].biases.get(i, 0) - want.1[i]).abs());
    }
    for k in 0..2 {
        for i in 0..3 {
            worst = worst.max((l[1].weights.get(k, i) - want.2[k][i]).abs());
        }
        worst = worst.max((l[1].biases.get(k, 0) - want.3[k]).abs());
    }
    // The step must actually move something, or the comparison is vacuous.
    assert!(net.parameter_bits() != net_232().parameter_bits());
    worst
}

/// Noisy, linearly separable classes: class c puts mass on input c.
pub fn blobs(n: usize, dim: usize, classes: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
    let inputs = Matrix::from_fn(dim, n, |r, c| {
        let centre = if r % classes == labels[c] { 0.8 } else { 0.2 };
        (centre + rng.random_range(-0.15..0.15f64)).clamp(0.0, 1.0)
    });
    Dataset::from_class_indices(inputs, classes, &labels).unwrap()
}
