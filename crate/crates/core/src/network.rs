//! Sequential feedforward network trained by backpropagation.
//!
//! Activations are stored one instance per column, so a mini-batch of `m`
//! instances flows through the network as `dim x m` matrices. For layer `l`:
//!
//! ```text
//! z[l] = W[l] x[l-1] + b[l]        x[0] = input
//! x[l] = act[l](z[l])
//! ```
//!
//! The cost is the batch mean of the cross-entropy `-Σ e_i ln(x_i)`. With a
//! softmax output the output error signal collapses to `x[L] - e`; hidden
//! signals follow `δ[l] = W[l+1]ᵀ δ[l+1] ⊙ act'(z[l])`. Weight and bias
//! gradients are averaged over the batch columns.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::activation::ActivationKind;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Lower clamp on probabilities inside the logarithm of the cost.
pub const LOG_EPSILON: f64 = 1e-12;

/// Stream used for per-epoch shuffling, separate from parameter sampling.
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Input size, hidden sizes..., output size.
    pub layer_sizes: Vec<usize>,
    /// One per non-input layer.
    pub activations: Vec<ActivationKind>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub weight_init: WeightInit,
}

/// Distribution of the initial parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightInit {
    /// Every weight and bias from N(0, 1).
    #[default]
    StandardNormal,
    /// Weights from N(0, 1) times `sqrt(2 / fan_in)` for ReLU-family layers
    /// and `sqrt(1 / fan_in)` otherwise; biases zero.
    Scaled,
}

impl WeightInit {
    pub fn name(&self) -> &'static str {
        match self {
            WeightInit::StandardNormal => "standard_normal",
            WeightInit::Scaled => "scaled",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "standard_normal" | "standard" | "normal" => Ok(WeightInit::StandardNormal),
            "scaled" | "fan_in" => Ok(WeightInit::Scaled),
            other => Err(Error::invalid(format!("unknown weight init '{other}'"))),
        }
    }
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            layer_sizes: vec![784, 256, 10],
            activations: vec![ActivationKind::Relu, ActivationKind::Softmax],
            learning_rate: 0.05,
            batch_size: 50,
            epochs: 20,
            seed: 0,
            weight_init: WeightInit::StandardNormal,
        }
    }
}

impl NetworkConfig {
    /// Collects every violation rather than stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.layer_sizes.len() < 2 {
            problems.push("need at least an input and an output layer size".to_string());
        }
        if let Some(i) = self.layer_sizes.iter().position(|&s| s == 0) {
            problems.push(format!("layer size {i} is zero"));
        }
        if self.activations.len() + 1 != self.layer_sizes.len() {
            problems.push(format!(
                "{} layer sizes need {} activations, got {}",
                self.layer_sizes.len(),
                self.layer_sizes.len().saturating_sub(1),
                self.activations.len()
            ));
        }
        let last = self.activations.len().saturating_sub(1);
        for (i, act) in self.activations.iter().enumerate() {
            if *act == ActivationKind::Softmax && i != last {
                problems.push(format!("softmax on hidden layer {} (output layer only)", i + 1));
            }
            if let Err(Error::Validation(mut v)) = act.validate() {
                problems.append(&mut v);
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            problems.push("batch size must be positive".into());
        }
        if self.epochs == 0 {
            problems.push("epochs must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn output_activation(&self) -> ActivationKind {
        *self.activations.last().expect("validated config")
    }

    /// Same config with every hidden layer switched to `hidden`.
    pub fn with_hidden_activation(&self, hidden: ActivationKind) -> Self {
        let mut out = self.clone();
        let last = out.activations.len() - 1;
        for act in &mut out.activations[..last] {
            *act = hidden;
        }
        out
    }
}

/// `weights` is `out x in`, `biases` is `out x 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub biases: Matrix,
    pub activation: ActivationKind,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Matrix,
    pub pre_activations: Vec<Matrix>,
    pub activations: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("at least one layer")
    }

    /// `x[l-1]` for layer index `l` (0-based over non-input layers).
    fn layer_input(&self, l: usize) -> &Matrix {
        if l == 0 {
            &self.input
        } else {
            &self.activations[l - 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub d_weights: Vec<Matrix>,
    pub d_biases: Vec<Matrix>,
    /// Per-instance error signals `δ[l]`, one column per batch instance.
    pub error_signals: Vec<Matrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    /// One update per instance.
    Stochastic,
    /// One update per pass over the data.
    Batch,
    MiniBatch(usize),
}

impl GradientMode {
    fn batch_size(self, n: usize) -> usize {
        match self {
            GradientMode::Stochastic => 1,
            GradientMode::Batch => n,
            GradientMode::MiniBatch(m) => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// Epochs completed by the network after this one.
    pub epoch: usize,
    /// Mean over update groups of the pre-update batch cost.
    pub mean_cost: f64,
    pub updates: usize,
    pub instances: usize,
}

#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<Layer>,
    config: NetworkConfig,
    shuffle_rng: ChaCha8Rng,
    epochs_trained: usize,
}

impl Network {
    /// Draws every weight and bias i.i.d. from N(0, 1) with a generator
    /// seeded by `config.seed`: layer by layer, weights row-major, then biases.
    /// [`WeightInit::Scaled`] rescales the same weight draws and zeroes biases.
    pub fn init(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let layers = config
            .layer_sizes
            .windows(2)
            .zip(&config.activations)
            .map(|(dims, &activation)| {
                let (fan_in, fan_out) = (dims[0], dims[1]);
                let weights = Matrix::from_fn(fan_out, fan_in, |_, _| rng.sample(StandardNormal));
                let biases = Matrix::from_fn(fan_out, 1, |_, _| rng.sample(StandardNormal));
                let (weights, biases) = match config.weight_init {
                    WeightInit::StandardNormal => (weights, biases),
                    WeightInit::Scaled => {
                        let gain = match activation {
                            ActivationKind::Relu | ActivationKind::LeakyRelu { .. } => 2.0,
                            _ => 1.0,
                        };
                        let s = (gain / fan_in as f64).sqrt();
                        (weights.map(|w| w * s), Matrix::zeros(fan_out, 1))
                    }
                };
                Layer {
                    weights,
                    biases,
                    activation,
                }
            })
            .collect();
        Ok(Self::assemble(layers, config))
    }

    /// Network from explicit layers; the config's sizes and activations must match them.
    pub fn from_layers(layers: Vec<Layer>, config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        check_layers(&layers, &config)?;
        Ok(Self::assemble(layers, config))
    }

    fn assemble(layers: Vec<Layer>, config: NetworkConfig) -> Self {
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
        shuffle_rng.set_stream(SHUFFLE_STREAM);
        Network {
            layers,
            config,
            shuffle_rng,
            epochs_trained: 0,
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Replaces all parameters, keeping the config and training state.
    pub fn set_layers(&mut self, layers: Vec<Layer>) -> Result<()> {
        check_layers(&layers, &self.config)?;
        self.layers = layers;
        Ok(())
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.config.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.config.layer_sizes.last().unwrap()
    }

    pub fn epochs_trained(&self) -> usize {
        self.epochs_trained
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.data().len() + l.biases.data().len())
            .sum()
    }

    /// Bit patterns of every parameter, for byte-exact comparisons.
    pub fn parameter_bits(&self) -> Vec<u64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.data().iter().chain(l.biases.data()))
            .map(|x| x.to_bits())
            .collect()
    }

    pub fn same_structure(&self, other: &Network) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weights.shape() == b.weights.shape()
                    && a.biases.shape() == b.biases.shape()
                    && a.activation == b.activation
            })
    }

    pub fn forward(&self, input: &Matrix) -> Result<ForwardTrace> {
        if input.rows() != self.input_dim() {
            return Err(Error::Shape {
                op: "forward",
                left: (self.input_dim(), input.cols()),
                right: input.shape(),
            });
        }
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut activations: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = activations.last().unwrap_or(input);
            let mut z = linalg::matmul(&layer.weights, x)?;
            z.add_column_assign(&layer.biases)?;
            activations.push(layer.activation.apply(&z));
            pre_activations.push(z);
        }
        Ok(ForwardTrace {
            input: input.clone(),
            pre_activations,
            activations,
        })
    }

    /// Output layer activations only.
    pub fn output(&self, input: &Matrix) -> Result<Matrix> {
        Ok(self.forward(input)?.activations.pop().unwrap())
    }

    /// Argmax class per column; ties go to the lowest index.
    pub fn predict(&self, input: &Matrix) -> Result<Vec<usize>> {
        Ok(argmax_columns(&self.output(input)?))
    }

    pub fn backward(&self, trace: &ForwardTrace, expected: &Matrix) -> Result<Gradients> {
        let depth = self.layers.len();
        if trace.pre_activations.len() != depth
            || trace.activations.len() != depth
            || trace
                .pre_activations
                .iter()
                .zip(&self.layers)
                .any(|(z, l)| z.rows() != l.out_dim())
        {
            return Err(Error::Contract(
                "forward trace does not belong to this network".into(),
            ));
        }
        let output = trace.output();
        if output.shape() != expected.shape() {
            return Err(Error::Shape {
                op: "backward",
                left: output.shape(),
                right: expected.shape(),
            });
        }
        let batch = output.cols() as f64;

        let last = &self.layers[depth - 1];
        let mut delta = if last.activation == ActivationKind::Softmax {
            linalg::sub(output, expected)?
        } else {
            // dC/dx of the clamped cost, chained through the activation.
            let d_cost = linalg::Matrix::from_fn(output.rows(), output.cols(), |r, c| {
                let x = output.get(r, c);
                if x > LOG_EPSILON {
                    -expected.get(r, c) / x
                } else {
                    0.0
                }
            });
            linalg::hadamard(
                &d_cost,
                &last.activation.derivative(&trace.pre_activations[depth - 1])?,
            )?
        };

        let mut d_weights = Vec::with_capacity(depth);
        let mut d_biases = Vec::with_capacity(depth);
        let mut error_signals = Vec::with_capacity(depth);
        for l in (0..depth).rev() {
            let dw = linalg::matmul_transpose(&delta, trace.layer_input(l))?.map(|x| x / batch);
            d_weights.push(dw);
            d_biases.push(delta.row_means());
            let next = if l > 0 {
                let back = linalg::transpose_matmul(&self.layers[l].weights, &delta)?;
                let slope = self.layers[l - 1]
                    .activation
                    .derivative(&trace.pre_activations[l - 1])?;
                Some(linalg::hadamard(&back, &slope)?)
            } else {
                None
            };
            error_signals.push(delta);
            match next {
                Some(d) => delta = d,
                None => break,
            }
        }
        d_weights.reverse();
        d_biases.reverse();
        error_signals.reverse();
        Ok(Gradients {
            d_weights,
            d_biases,
            error_signals,
        })
    }

    /// `W -= eta * dW`, `b -= eta * db`.
    pub fn apply_gradients(&mut self, grads: &Gradients, eta: f64) -> Result<()> {
        if grads.d_weights.len() != self.layers.len() || grads.d_biases.len() != self.layers.len() {
            return Err(Error::invalid(format!(
                "gradients cover {} layers, network has {}",
                grads.d_weights.len(),
                self.layers.len()
            )));
        }
        for ((layer, dw), db) in self.layers.iter().zip(&grads.d_weights).zip(&grads.d_biases) {
            if layer.weights.shape() != dw.shape() || layer.biases.shape() != db.shape() {
                return Err(Error::Shape {
                    op: "apply_gradients",
                    left: layer.weights.shape(),
                    right: dw.shape(),
                });
            }
        }
        for ((layer, dw), db) in self
            .layers
            .iter_mut()
            .zip(&grads.d_weights)
            .zip(&grads.d_biases)
        {
            layer.weights.add_scaled_assign(dw, -eta)?;
            layer.biases.add_scaled_assign(db, -eta)?;
        }
        Ok(())
    }

    /// One forward/backward/update on a batch. Returns the pre-update cost.
    pub fn train_batch(&mut self, inputs: &Matrix, expected: &Matrix) -> Result<f64> {
        let trace = self.forward(inputs)?;
        let cost = cost_cross_entropy(trace.output(), expected)?;
        let grads = self.backward(&trace, expected)?;
        self.apply_gradients(&grads, self.config.learning_rate)?;
        Ok(cost)
    }

    pub fn train_epoch(&mut self, data: &Dataset, mode: GradientMode) -> Result<EpochStats> {
        let all: Vec<usize> = (0..data.len()).collect();
        self.train_epoch_on(data, &all, mode)
    }

    /// One pass over the instances listed in `indices`, reshuffled with the
    /// network's own seeded generator and grouped by `mode`.
    pub fn train_epoch_on(
        &mut self,
        data: &Dataset,
        indices: &[usize],
        mode: GradientMode,
    ) -> Result<EpochStats> {
        if indices.is_empty() {
            return Err(Error::invalid("cannot train on an empty dataset"));
        }
        let size = mode.batch_size(indices.len());
        if size == 0 || size > indices.len() {
            return Err(Error::invalid(format!(
                "batch size {size} must be between 1 and the {} available instances",
                indices.len()
            )));
        }
        let mut order = indices.to_vec();
        order.shuffle(&mut self.shuffle_rng);

        let mut total = 0.0;
        let mut updates = 0;
        for group in order.chunks(size) {
            let (x, e) = data.batch(group);
            total += self.train_batch(&x, &e)?;
            updates += 1;
        }
        self.epochs_trained += 1;
        Ok(EpochStats {
            epoch: self.epochs_trained,
            mean_cost: total / updates as f64,
            updates,
            instances: order.len(),
        })
    }

    /// `epochs` passes in mini-batch mode with the configured batch size.
    pub fn fit(&mut self, data: &Dataset, epochs: usize) -> Result<Vec<EpochStats>> {
        let mode = GradientMode::MiniBatch(self.config.batch_size);
        (0..epochs).map(|_| self.train_epoch(data, mode)).collect()
    }
}

fn check_layers(layers: &[Layer], config: &NetworkConfig) -> Result<()> {
    let mut problems = Vec::new();
    if layers.len() != config.activations.len() {
        problems.push(format!(
            "{} layers given, config describes {}",
            layers.len(),
            config.activations.len()
        ));
    }
    for (l, layer) in layers.iter().enumerate() {
        let expect = (config.layer_sizes.get(l + 1), config.layer_sizes.get(l));
        if expect != (Some(&layer.out_dim()), Some(&layer.in_dim())) {
            problems.push(format!(
                "layer {} weights are {}x{}, config expects {:?}x{:?}",
                l + 1,
                layer.out_dim(),
                layer.in_dim(),
                expect.0,
                expect.1
            ));
        }
        if layer.biases.shape() != (layer.out_dim(), 1) {
            problems.push(format!("layer {} biases are not {}x1", l + 1, layer.out_dim()));
        }
        if config.activations.get(l) != Some(&layer.activation) {
            problems.push(format!("layer {} activation differs from config", l + 1));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(problems))
    }
}

/// Batch mean of `-Σ_i e_i ln(max(x_i, 1e-12))`.
pub fn cost_cross_entropy(output: &Matrix, expected: &Matrix) -> Result<f64> {
    if output.shape() != expected.shape() {
        return Err(Error::Shape {
            op: "cost_cross_entropy",
            left: output.shape(),
            right: expected.shape(),
        });
    }
    let (rows, cols) = output.shape();
    let mut total = 0.0;
    for c in 0..cols {
        let mut column = 0.0;
        for r in 0..rows {
            let e = expected.get(r, c);
            if e != 0.0 {
                column -= e * output.get(r, c).max(LOG_EPSILON).ln();
            }
        }
        total += column;
    }
    Ok(total / cols as f64)
}

pub fn argmax_columns(m: &Matrix) -> Vec<usize> {
    (0..m.cols())
        .map(|c| {
            let mut best = 0;
            for r in 1..m.rows() {
                if m.get(r, c) > m.get(best, c) {
                    best = r;
                }
            }
            best
        })
        .collect()
}
