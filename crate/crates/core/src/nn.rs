//! Feed-forward network with a softmax head, trained by mini-batch RMSprop
//! on mean cross-entropy.
//!
//! Activations are indexed from the input (`0`) to the class probabilities
//! (`layer_sizes.len() - 1`). The learned representation is the activation
//! of the last hidden layer, index `layer_sizes.len() - 2`.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataset::ColoredDataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            // Written so that NaN propagates, unlike `f64::max`.
            Activation::Relu => {
                if z < 0.0 {
                    0.0
                } else {
                    z
                }
            }
            Activation::Identity => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Widths from input to output; the last entry is the number of classes.
    pub layer_sizes: Vec<usize>,
    /// One per hidden layer.
    pub activations: Vec<Activation>,
    /// One per hidden layer, applied after its activation.
    pub dropout_rates: Vec<f64>,
    /// Activation index of the extracted representation.
    pub feature_layer: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub seed: u64,
}

impl NetworkConfig {
    /// Rectifier MLP without dropout and with the default optimizer settings.
    pub fn mlp(input: usize, hidden: &[usize], classes: usize) -> Self {
        let mut layer_sizes = vec![input];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(classes);
        Self {
            feature_layer: layer_sizes.len() - 2,
            layer_sizes,
            activations: vec![Activation::Relu; hidden.len()],
            dropout_rates: vec![0.0; hidden.len()],
            epochs: 10,
            batch_size: 128,
            learning_rate: 1e-3,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            seed: 0,
        }
    }

    /// `input → 64 relu (dropout 0.25) → 16 relu → 2 softmax`.
    pub fn default_for_input(input: usize) -> Self {
        let mut config = Self::mlp(input, &[64, 16], 2);
        config.dropout_rates = vec![0.25, 0.0];
        config
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn n_classes(&self) -> usize {
        *self.layer_sizes.last().expect("validated config")
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = &self.layer_sizes;
        if sizes.len() < 2 {
            return Err(Error::Config("a network needs at least an input and an output layer".into()));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config(format!("zero-width layer in {sizes:?}")));
        }
        if sizes[sizes.len() - 1] < 2 {
            return Err(Error::Config("the softmax layer needs at least two classes".into()));
        }
        let hidden = sizes.len() - 2;
        if self.activations.len() != hidden || self.dropout_rates.len() != hidden {
            return Err(Error::Config(format!(
                "{hidden} hidden layers but {} activations and {} dropout rates",
                self.activations.len(),
                self.dropout_rates.len()
            )));
        }
        if let Some(r) = self.dropout_rates.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(Error::Config(format!("dropout rate {r} outside [0, 1)")));
        }
        if self.feature_layer != sizes.len() - 2 {
            return Err(Error::Config(format!(
                "feature layer {} is not the last hidden layer ({})",
                self.feature_layer,
                sizes.len() - 2
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) {
            return Err(Error::Config(format!("RMSprop decay {} outside [0, 1)", self.rmsprop_decay)));
        }
        if !(self.rmsprop_epsilon > 0.0) {
            return Err(Error::Config("RMSprop epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Row source for network inputs, so large image sets can be streamed into
/// mini-batches without materializing a float matrix.
pub trait InputRows {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    fn fill_row(&self, i: usize, out: &mut [f64]);
}

impl InputRows for Array2<f64> {
    fn n_rows(&self) -> usize {
        self.nrows()
    }
    fn n_cols(&self) -> usize {
        self.ncols()
    }
    fn fill_row(&self, i: usize, out: &mut [f64]) {
        out.iter_mut().zip(self.row(i)).for_each(|(o, v)| *o = *v);
    }
}

impl InputRows for ArrayView2<'_, f64> {
    fn n_rows(&self) -> usize {
        self.nrows()
    }
    fn n_cols(&self) -> usize {
        self.ncols()
    }
    fn fill_row(&self, i: usize, out: &mut [f64]) {
        out.iter_mut().zip(self.row(i)).for_each(|(o, v)| *o = *v);
    }
}

/// Pixels scaled to `[0, 1]`, channel-major.
impl InputRows for ColoredDataset {
    fn n_rows(&self) -> usize {
        self.len()
    }
    fn n_cols(&self) -> usize {
        self.image_size()
    }
    fn fill_row(&self, i: usize, out: &mut [f64]) {
        out.iter_mut()
            .zip(self.image(i))
            .for_each(|(o, &p)| *o = p as f64 / 255.0);
    }
}

fn gather<S: InputRows + ?Sized>(source: &S, rows: &[usize]) -> Array2<f64> {
    let mut batch = Array2::zeros((rows.len(), source.n_cols()));
    for (mut out, &i) in batch.axis_iter_mut(Axis(0)).zip(rows) {
        source.fill_row(i, out.as_slice_mut().expect("standard layout"));
    }
    batch
}

/// Penultimate-layer activations, one row per example.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("feature matrix contains non-finite values".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn k(&self) -> usize {
        self.values.ncols()
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `activations[0]` is the input batch; the last entry holds the class
    /// probabilities. Hidden entries are post-dropout.
    pub activations: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
}

impl ForwardPass {
    pub fn probabilities(&self) -> &Array2<f64> {
        self.activations.last().expect("non-empty pass")
    }

    /// Mean cross-entropy, computed from the logits.
    pub fn loss(&self, labels: &[u8]) -> f64 {
        let logits = self.pre_activations.last().expect("non-empty pass");
        let total: f64 = logits
            .axis_iter(Axis(0))
            .zip(labels)
            .map(|(row, &y)| {
                let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                lse - row[y as usize]
            })
            .sum();
        total / labels.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Mean training cross-entropy per epoch (training mode, before each
    /// batch's update).
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Network {
    config: NetworkConfig,
    /// `weights[l]` is `fan_in × fan_out`.
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    sq_weights: Vec<Array2<f64>>,
    sq_biases: Vec<Array1<f64>>,
}

impl Network {
    /// Scaled-uniform weights `U(±sqrt(6 / (fan_in + fan_out)))`, zero biases
    /// and zero RMSprop state.
    pub fn new(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stream(config.seed, 0);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in config.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(Array2::from_shape_simple_fn((fan_in, fan_out), || {
                rng.random_range(-limit..limit)
            }));
            biases.push(Array1::zeros(fan_out));
        }
        let sq_weights = weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect();
        let sq_biases = biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect();
        Ok(Self {
            config,
            weights,
            biases,
            sq_weights,
            sq_biases,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    pub fn input_width(&self) -> usize {
        self.config.layer_sizes[0]
    }

    pub fn n_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Runs a batch through the network. Dropout is applied only when an RNG
    /// is supplied, with inverted scaling so inference needs no rescaling.
    pub fn forward<R: Rng>(&self, batch: ArrayView2<f64>, mut dropout_rng: Option<&mut R>) -> Result<ForwardPass> {
        if batch.ncols() != self.input_width() {
            return Err(Error::Shape {
                context: "network input",
                expected: self.input_width(),
                found: batch.ncols(),
            });
        }
        let n_layers = self.weights.len();
        let mut activations = Vec::with_capacity(n_layers + 1);
        let mut pre_activations = Vec::with_capacity(n_layers);
        let mut masks = Vec::with_capacity(n_layers.saturating_sub(1));
        activations.push(batch.to_owned());
        for l in 0..n_layers {
            let z = activations[l].dot(&self.weights[l]) + &self.biases[l];
            if l + 1 < n_layers {
                let act = self.config.activations[l];
                let mut h = z.mapv(|v| act.apply(v));
                let rate = self.config.dropout_rates[l];
                let mask = match dropout_rng.as_deref_mut() {
                    Some(rng) if rate > 0.0 => {
                        let keep = 1.0 - rate;
                        let mask = Array2::from_shape_simple_fn(h.raw_dim(), || {
                            if rng.random::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        });
                        h *= &mask;
                        Some(mask)
                    }
                    _ => None,
                };
                masks.push(mask);
                activations.push(h);
            } else {
                activations.push(softmax_rows(&z));
            }
            pre_activations.push(z);
        }
        Ok(ForwardPass {
            activations,
            pre_activations,
            masks,
        })
    }

    /// Inference-mode forward pass.
    pub fn forward_inference(&self, batch: ArrayView2<f64>) -> Result<ForwardPass> {
        self.forward::<rng::Rng>(batch, None)
    }

    /// Gradients of the mean cross-entropy for the pass.
    pub fn backward(&self, pass: &ForwardPass, labels: &[u8]) -> Result<Gradients> {
        let probs = pass.probabilities();
        let (batch, classes) = probs.dim();
        if labels.len() != batch {
            return Err(Error::Shape {
                context: "backprop labels",
                expected: batch,
                found: labels.len(),
            });
        }
        let mut delta = probs.clone();
        for (mut row, &y) in delta.axis_iter_mut(Axis(0)).zip(labels) {
            if (y as usize) >= classes {
                return Err(Error::Domain(format!("label {y} with {classes} classes")));
            }
            row[y as usize] -= 1.0;
        }
        delta /= batch as f64;

        let n_layers = self.weights.len();
        let mut grad_w = vec![Array2::zeros((0, 0)); n_layers];
        let mut grad_b = vec![Array1::zeros(0); n_layers];
        for l in (0..n_layers).rev() {
            grad_w[l] = pass.activations[l].t().dot(&delta);
            grad_b[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut upstream = delta.dot(&self.weights[l].t());
                if let Some(mask) = &pass.masks[l - 1] {
                    upstream *= mask;
                }
                let act = self.config.activations[l - 1];
                Zip::from(&mut upstream)
                    .and(&pass.pre_activations[l - 1])
                    .for_each(|u, &z| *u *= act.derivative(z));
                delta = upstream;
            }
        }
        Ok(Gradients {
            weights: grad_w,
            biases: grad_b,
        })
    }

    fn rmsprop_step(&mut self, grads: &Gradients) {
        let lr = self.config.learning_rate;
        let rho = self.config.rmsprop_decay;
        let eps = self.config.rmsprop_epsilon;
        for l in 0..self.weights.len() {
            Zip::from(&mut self.weights[l])
                .and(&mut self.sq_weights[l])
                .and(&grads.weights[l])
                .for_each(|theta, v, &g| {
                    *v = rho * *v + (1.0 - rho) * g * g;
                    *theta -= lr * g / (v.sqrt() + eps);
                });
            Zip::from(&mut self.biases[l])
                .and(&mut self.sq_biases[l])
                .and(&grads.biases[l])
                .for_each(|theta, v, &g| {
                    *v = rho * *v + (1.0 - rho) * g * g;
                    *theta -= lr * g / (v.sqrt() + eps);
                });
        }
    }

    /// Trains in place for `config.epochs` epochs of seeded, shuffled
    /// mini-batches (the final short batch is kept).
    pub fn train<S: InputRows + ?Sized>(&mut self, inputs: &S, labels: &[u8]) -> Result<TrainReport> {
        let n = inputs.n_rows();
        if n == 0 {
            return Err(Error::Domain("training on an empty dataset".into()));
        }
        if labels.len() != n {
            return Err(Error::Shape {
                context: "training labels",
                expected: n,
                found: labels.len(),
            });
        }
        if inputs.n_cols() != self.input_width() {
            return Err(Error::Shape {
                context: "training inputs",
                expected: self.input_width(),
                found: inputs.n_cols(),
            });
        }
        let classes = self.config.n_classes();
        if let Some(bad) = labels.iter().find(|&&y| y as usize >= classes) {
            return Err(Error::Domain(format!("label {bad} with {classes} classes")));
        }

        let mut order_rng = rng::stream(self.config.seed, 1);
        let mut dropout_rng = rng::stream(self.config.seed, 2);
        let mut order: Vec<usize> = (0..n).collect();
        let mut epoch_losses = Vec::with_capacity(self.config.epochs);
        let mut batch_labels = Vec::with_capacity(self.config.batch_size);
        for epoch in 0..self.config.epochs {
            order.shuffle(&mut order_rng);
            let mut total = 0.0;
            for (b, rows) in order.chunks(self.config.batch_size).enumerate() {
                let batch = gather(inputs, rows);
                batch_labels.clear();
                batch_labels.extend(rows.iter().map(|&i| labels[i]));
                let pass = self.forward(batch.view(), Some(&mut dropout_rng))?;
                let loss = pass.loss(&batch_labels);
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch, batch: b });
                }
                total += loss * rows.len() as f64;
                let grads = self.backward(&pass, &batch_labels)?;
                self.rmsprop_step(&grads);
            }
            let mean = total / n as f64;
            log::debug!("epoch {epoch}: mean loss {mean:.5}");
            epoch_losses.push(mean);
        }
        Ok(TrainReport { epoch_losses })
    }

    fn map_chunks<S: InputRows + ?Sized>(
        &self,
        inputs: &S,
        width: usize,
        pick: impl Fn(&ForwardPass) -> &Array2<f64>,
    ) -> Result<Array2<f64>> {
        if inputs.n_cols() != self.input_width() {
            return Err(Error::Shape {
                context: "network input",
                expected: self.input_width(),
                found: inputs.n_cols(),
            });
        }
        const CHUNK: usize = 1024;
        let n = inputs.n_rows();
        let mut out = Array2::zeros((n, width));
        let rows: Vec<usize> = (0..n).collect();
        for (c, chunk) in rows.chunks(CHUNK).enumerate() {
            let batch = gather(inputs, chunk);
            let pass = self.forward_inference(batch.view())?;
            out.slice_mut(ndarray::s![c * CHUNK..c * CHUNK + chunk.len(), ..])
                .assign(pick(&pass));
        }
        Ok(out)
    }

    /// Class probabilities in inference mode.
    pub fn predict<S: InputRows + ?Sized>(&self, inputs: &S) -> Result<Array2<f64>> {
        self.map_chunks(inputs, self.config.n_classes(), |p| p.probabilities())
    }

    /// Activations of the feature layer in inference mode.
    pub fn extract_features<S: InputRows + ?Sized>(&self, inputs: &S) -> Result<FeatureMatrix> {
        let layer = self.config.feature_layer;
        let width = self.config.layer_sizes[layer];
        FeatureMatrix::new(self.map_chunks(inputs, width, |p| &p.activations[layer])?)
    }

    /// Fraction of examples whose most probable class is the label.
    pub fn accuracy<S: InputRows + ?Sized>(&self, inputs: &S, labels: &[u8]) -> Result<f64> {
        let probs = self.predict(inputs)?;
        let hits = probs
            .axis_iter(Axis(0))
            .zip(labels)
            .filter(|(row, &y)| argmax(row.iter().copied()) == y as usize)
            .count();
        Ok(hits as f64 / labels.len().max(1) as f64)
    }

    fn parameter_mut(&mut self, id: ParamId) -> &mut f64 {
        match id {
            ParamId::Weight(l, i, j) => &mut self.weights[l][[i, j]],
            ParamId::Bias(l, j) => &mut self.biases[l][j],
        }
    }

    /// Little-endian checkpoint: `u32` layer count, `(fan_in, fan_out)` per
    /// layer as `u32`, then for each layer its row-major weights followed by
    /// its biases as `f64`.
    pub fn write_checkpoint<W: Write>(&self, writer: &mut W) -> Result<()> {
        writer.write_all(&(self.weights.len() as u32).to_le_bytes())?;
        for w in &self.weights {
            writer.write_all(&(w.nrows() as u32).to_le_bytes())?;
            writer.write_all(&(w.ncols() as u32).to_le_bytes())?;
        }
        for (w, b) in self.weights.iter().zip(&self.biases) {
            for v in w.iter().chain(b.iter()) {
                writer.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a checkpoint. Hidden layers are assumed to be rectifiers; the
    /// optimizer state and dropout settings are not stored.
    pub fn read_checkpoint<R: Read>(reader: &mut R) -> Result<Self> {
        let read_u32 = |r: &mut R| -> Result<usize> {
            let mut buf = [0u8; 4];
            r.read_exact(&mut buf)?;
            Ok(u32::from_le_bytes(buf) as usize)
        };
        let n_layers = read_u32(reader)?;
        if n_layers == 0 || n_layers > 64 {
            return Err(Error::Format(format!("checkpoint declares {n_layers} layers")));
        }
        let mut shapes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            shapes.push((read_u32(reader)?, read_u32(reader)?));
        }
        let mut layer_sizes = vec![shapes[0].0];
        for (l, &(fan_in, fan_out)) in shapes.iter().enumerate() {
            if fan_in != layer_sizes[l] {
                return Err(Error::Format(format!(
                    "checkpoint layer {l} takes {fan_in} inputs but the previous layer has {}",
                    layer_sizes[l]
                )));
            }
            layer_sizes.push(fan_out);
        }
        let hidden = &layer_sizes[1..layer_sizes.len() - 1];
        let config = NetworkConfig::mlp(layer_sizes[0], hidden, *layer_sizes.last().unwrap());
        config.validate()?;
        let read_f64 = |r: &mut R| -> Result<f64> {
            let mut buf = [0u8; 8];
            r.read_exact(&mut buf)?;
            Ok(f64::from_le_bytes(buf))
        };
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        for &(fan_in, fan_out) in &shapes {
            let mut w = Array2::zeros((fan_in, fan_out));
            for v in w.iter_mut() {
                *v = read_f64(reader)?;
            }
            let mut b = Array1::zeros(fan_out);
            for v in b.iter_mut() {
                *v = read_f64(reader)?;
            }
            weights.push(w);
            biases.push(b);
        }
        if weights.iter().flatten().chain(biases.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Format("checkpoint contains non-finite parameters".into()));
        }
        let sq_weights = weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect();
        let sq_biases = biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect();
        Ok(Self {
            config,
            weights,
            biases,
            sq_weights,
            sq_biases,
        })
    }
}

fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    values
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
        .0
}

#[derive(Debug, Clone, Copy)]
enum ParamId {
    Weight(usize, usize, usize),
    Bias(usize, usize),
}

#[derive(Debug, Clone, Copy)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub parameters_checked: usize,
    pub passed: bool,
}

/// Relative errors are measured against `max(|analytic|, |numeric|, FLOOR)`
/// so that parameters with vanishing gradients compare on an absolute scale.
const GRADIENT_CHECK_FLOOR: f64 = 1e-6;
const GRADIENT_CHECK_STEP: f64 = 1e-5;

/// Compares backpropagated gradients of the mean cross-entropy with central
/// finite differences on up to `max_params` randomly chosen parameters.
/// Runs in inference mode, so dropout is ignored.
pub fn gradient_check(
    net: &Network,
    batch: ArrayView2<f64>,
    labels: &[u8],
    tolerance: f64,
    max_params: usize,
    seed: u64,
) -> Result<GradientCheck> {
    let pass = net.forward_inference(batch)?;
    let grads = net.backward(&pass, labels)?;

    let mut ids = Vec::with_capacity(net.n_parameters());
    for (l, w) in net.weights.iter().enumerate() {
        for ((i, j), _) in w.indexed_iter() {
            ids.push(ParamId::Weight(l, i, j));
        }
        for j in 0..net.biases[l].len() {
            ids.push(ParamId::Bias(l, j));
        }
    }
    ids.shuffle(&mut rng::rng_from_seed(seed));
    ids.truncate(max_params);

    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for &id in &ids {
        let analytic = match id {
            ParamId::Weight(l, i, j) => grads.weights[l][[i, j]],
            ParamId::Bias(l, j) => grads.biases[l][j],
        };
        let original = *probe.parameter_mut(id);
        *probe.parameter_mut(id) = original + GRADIENT_CHECK_STEP;
        let plus = probe.forward_inference(batch)?.loss(labels);
        *probe.parameter_mut(id) = original - GRADIENT_CHECK_STEP;
        let minus = probe.forward_inference(batch)?.loss(labels);
        *probe.parameter_mut(id) = original;
        let numeric = (plus - minus) / (2.0 * GRADIENT_CHECK_STEP);
        let scale = analytic.abs().max(numeric.abs()).max(GRADIENT_CHECK_FLOOR);
        worst = worst.max((analytic - numeric).abs() / scale);
    }
    Ok(GradientCheck {
        max_relative_error: worst,
        parameters_checked: ids.len(),
        passed: worst < tolerance,
    })
}
