//! The embedding sub-network: a stack of dense tanh layers whose penultimate
//! (coding) activations are the concept embedding and whose output layer
//! predicts the document bag-of-words target.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecmath::all_finite;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn glorot(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let mut layer = DenseLayer::zeros(in_dim, out_dim);
        for w in &mut layer.weights {
            *w = rng.gen_range(-bound..=bound);
        }
        layer
    }

    /// Affine map followed by tanh.
    pub fn activate(&self, input: &[f64], output: &mut Vec<f64>) {
        output.clear();
        for row in 0..self.out_dim {
            let mut z = self.bias[row];
            let w = &self.weights[row * self.in_dim..(row + 1) * self.in_dim];
            for (wi, xi) in w.iter().zip(input) {
                z += wi * xi;
            }
            output.push(z.tanh());
        }
    }
}

/// Parameters of one sub-network tower. Both towers of the Siamese pair
/// share a single instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubNetworkParams {
    pub layer_sizes: Vec<usize>,
    pub layers: Vec<DenseLayer>,
}

impl SubNetworkParams {
    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn code_dim(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() - 2]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
        if layer_sizes.len() < 3 {
            return Err(Error::Config(
                "network needs at least input, coding and output sizes".into(),
            ));
        }
        if layer_sizes.iter().any(|s| *s == 0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Scaled uniform (Glorot) initialization; deterministic for a fixed seed.
pub fn init_network(layer_sizes: &[usize], seed: u64) -> Result<SubNetworkParams> {
    SubNetworkParams::validate_sizes(layer_sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = layer_sizes
        .windows(2)
        .map(|w| DenseLayer::glorot(w[0], w[1], &mut rng))
        .collect();
    Ok(SubNetworkParams {
        layer_sizes: layer_sizes.to_vec(),
        layers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for PretrainOptions {
    fn default() -> Self {
        PretrainOptions {
            epochs: 15,
            learning_rate: 0.01,
        }
    }
}

/// Greedy layer-wise initialization: every non-output layer is trained as the
/// encoder of a single-hidden-layer autoencoder (tanh encoder, linear
/// decoder, squared reconstruction error, full-batch gradient descent) on the
/// previous layer's activations, then stacked. The output layer keeps its
/// random initialization.
///
/// Returns the parameters and one reconstruction-error trace per pretrained
/// layer.
pub fn init_network_pretrained(
    layer_sizes: &[usize],
    seed: u64,
    data: &[Vec<f64>],
    opts: &PretrainOptions,
) -> Result<(SubNetworkParams, Vec<Vec<f64>>)> {
    let mut params = init_network(layer_sizes, seed)?;
    if data.is_empty() {
        return Err(Error::Config("pretraining needs at least one sample".into()));
    }
    for sample in data {
        if sample.len() != layer_sizes[0] {
            return Err(Error::dimension(
                layer_sizes[0],
                sample.len(),
                "pretraining sample",
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut activations: Vec<Vec<f64>> = data.to_vec();
    let mut traces = Vec::new();
    let n_layers = params.layers.len();
    for l in 0..n_layers - 1 {
        let (encoder, trace) = autoencoder_pretrain(
            &activations,
            params.layers[l].in_dim,
            params.layers[l].out_dim,
            opts,
            &mut rng,
        );
        params.layers[l] = encoder;
        let mut buf = Vec::new();
        activations = activations
            .iter()
            .map(|x| {
                params.layers[l].activate(x, &mut buf);
                buf.clone()
            })
            .collect();
        traces.push(trace);
    }
    Ok((params, traces))
}

/// Trains one tanh-encoder/linear-decoder autoencoder by full-batch gradient
/// descent; returns the encoder and the per-epoch mean squared
/// reconstruction error.
fn autoencoder_pretrain(
    data: &[Vec<f64>],
    in_dim: usize,
    hidden: usize,
    opts: &PretrainOptions,
    rng: &mut ChaCha8Rng,
) -> (DenseLayer, Vec<f64>) {
    let mut encoder = DenseLayer::glorot(in_dim, hidden, rng);
    let mut dec_w = {
        let bound = (6.0 / (in_dim + hidden) as f64).sqrt();
        (0..in_dim * hidden)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect::<Vec<f64>>()
    };
    let mut dec_b = vec![0.0; in_dim];
    let n = data.len() as f64;
    let lr = opts.learning_rate;
    let mut trace = Vec::with_capacity(opts.epochs);
    let mut hidden_buf = Vec::new();
    for _ in 0..opts.epochs {
        let mut grad_enc_w = vec![0.0; encoder.weights.len()];
        let mut grad_enc_b = vec![0.0; hidden];
        let mut grad_dec_w = vec![0.0; dec_w.len()];
        let mut grad_dec_b = vec![0.0; in_dim];
        let mut error_sum = 0.0;
        for x in data {
            encoder.activate(x, &mut hidden_buf);
            // Linear reconstruction.
            let mut recon = dec_b.clone();
            for (row, r) in recon.iter_mut().enumerate() {
                for (j, h) in hidden_buf.iter().enumerate() {
                    *r += dec_w[row * hidden + j] * h;
                }
            }
            let residual: Vec<f64> = recon.iter().zip(x).map(|(r, t)| r - t).collect();
            error_sum += residual.iter().map(|e| e * e).sum::<f64>() / in_dim as f64;

            // d(mse)/d recon = 2 residual / in_dim
            let out_grad: Vec<f64> = residual.iter().map(|e| 2.0 * e / in_dim as f64).collect();
            for (row, g) in out_grad.iter().enumerate() {
                grad_dec_b[row] += g;
                for (j, h) in hidden_buf.iter().enumerate() {
                    grad_dec_w[row * hidden + j] += g * h;
                }
            }
            let mut hidden_grad = vec![0.0; hidden];
            for (row, g) in out_grad.iter().enumerate() {
                for (j, hg) in hidden_grad.iter_mut().enumerate() {
                    *hg += g * dec_w[row * hidden + j];
                }
            }
            for (j, hg) in hidden_grad.iter_mut().enumerate() {
                *hg *= 1.0 - hidden_buf[j] * hidden_buf[j];
            }
            for (j, hg) in hidden_grad.iter().enumerate() {
                grad_enc_b[j] += hg;
                for (i, xi) in x.iter().enumerate() {
                    grad_enc_w[j * in_dim + i] += hg * xi;
                }
            }
        }
        trace.push(error_sum / n);
        for (w, g) in encoder.weights.iter_mut().zip(&grad_enc_w) {
            *w -= lr * g / n;
        }
        for (b, g) in encoder.bias.iter_mut().zip(&grad_enc_b) {
            *b -= lr * g / n;
        }
        for (w, g) in dec_w.iter_mut().zip(&grad_dec_w) {
            *w -= lr * g / n;
        }
        for (b, g) in dec_b.iter_mut().zip(&grad_dec_b) {
            *b -= lr * g / n;
        }
    }
    (encoder, trace)
}

/// Activations of every layer for one input, input excluded.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn code(&self) -> &[f64] {
        &self.activations[self.activations.len() - 2]
    }

    pub fn prediction(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

/// Runs the tower on an input vector, keeping all layer activations.
pub fn forward_trace(params: &SubNetworkParams, input: &[f64]) -> Result<ForwardTrace> {
    if input.len() != params.input_dim() {
        return Err(Error::dimension(
            params.input_dim(),
            input.len(),
            "network input",
        ));
    }
    let mut activations: Vec<Vec<f64>> = Vec::with_capacity(params.layers.len());
    let mut current = input;
    for layer in &params.layers {
        let mut out = Vec::new();
        layer.activate(current, &mut out);
        if !all_finite(&out) {
            return Err(Error::Numeric("non-finite activation".into()));
        }
        activations.push(out);
        current = activations.last().unwrap();
    }
    Ok(ForwardTrace { activations })
}

/// Code and prediction for one input.
pub fn forward(params: &SubNetworkParams, input: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let trace = forward_trace(params, input)?;
    Ok((trace.code().to_vec(), trace.prediction().to_vec()))
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone)]
pub struct NetworkGradient {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl NetworkGradient {
    pub fn zeros_like(params: &SubNetworkParams) -> Self {
        NetworkGradient {
            layers: params
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &NetworkGradient) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in w.iter_mut().zip(ow) {
                *x += y;
            }
            for (x, y) in b.iter_mut().zip(ob) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (w, b) in &mut self.layers {
            for x in w.iter_mut() {
                *x *= factor;
            }
            for x in b.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|(w, b)| all_finite(w) && all_finite(b))
    }
}

impl SubNetworkParams {
    pub fn apply_gradient(&mut self, grad: &NetworkGradient, learning_rate: f64) {
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(&grad.layers) {
            for (w, g) in layer.weights.iter_mut().zip(gw) {
                *w -= learning_rate * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(gb) {
                *b -= learning_rate * g;
            }
        }
    }
}

/// Backpropagates a loss gradient through one tower, accumulating into
/// `grad`. `output_grad` is dL/d(prediction); `code_grad`, when present, is
/// an extra dL/d(code) term injected at the coding layer (the distance-loss
/// path).
pub fn backward_into(
    params: &SubNetworkParams,
    input: &[f64],
    trace: &ForwardTrace,
    output_grad: &[f64],
    code_grad: Option<&[f64]>,
    grad: &mut NetworkGradient,
) {
    let n_layers = params.layers.len();
    // delta of the output layer
    let mut delta: Vec<f64> = trace
        .prediction()
        .iter()
        .zip(output_grad)
        .map(|(a, g)| g * (1.0 - a * a))
        .collect();
    for l in (0..n_layers).rev() {
        let layer = &params.layers[l];
        let below: &[f64] = if l == 0 {
            input
        } else {
            &trace.activations[l - 1]
        };
        let (gw, gb) = &mut grad.layers[l];
        for (row, d) in delta.iter().enumerate() {
            gb[row] += d;
            let w_row = &mut gw[row * layer.in_dim..(row + 1) * layer.in_dim];
            for (g, x) in w_row.iter_mut().zip(below) {
                *g += d * x;
            }
        }
        if l == 0 {
            break;
        }
        let mut upstream = vec![0.0; layer.in_dim];
        for (row, d) in delta.iter().enumerate() {
            let w_row = &layer.weights[row * layer.in_dim..(row + 1) * layer.in_dim];
            for (u, w) in upstream.iter_mut().zip(w_row) {
                *u += d * w;
            }
        }
        // Inject the distance-loss gradient where the coding activations live.
        if l == n_layers - 1 {
            if let Some(cg) = code_grad {
                for (u, c) in upstream.iter_mut().zip(cg) {
                    *u += c;
                }
            }
        }
        let acts = &trace.activations[l - 1];
        delta = upstream
            .iter()
            .zip(acts)
            .map(|(u, a)| u * (1.0 - a * a))
            .collect();
    }
}
