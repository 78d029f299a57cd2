//! Feed-forward networks with hand-written reverse-mode gradients.
//!
//! Only what the agent needs: dense layers, tanh or identity activations,
//! batched forward/backward passes, Adam with global-norm clipping and a
//! versioned binary checkpoint format that round-trips bit-exactly.

use std::io::{Read, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Identity => {}
        }
    }

    /// Multiplies `grad` by the derivative, given the activation's output.
    fn backprop(self, output: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Tanh => grad.zip_mut_with(output, |g, &a| *g *= 1.0 - a * a),
            Activation::Identity => {}
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Tanh => 1,
            Activation::Identity => 0,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Tanh),
            other => Err(Error::Checkpoint(format!("unknown activation code {other}"))),
        }
    }
}

/// A dense layer computing `x W + b`; `weights` is `inputs x outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

/// Multi-layer perceptron.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Dense>,
    /// Process-unique tag replaced on every parameter change, so a cache is
    /// only accepted by the exact parameters that produced it.
    generation: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

fn next_generation() -> u64 {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    COUNTER.fetch_add(1, Ordering::Relaxed)
}

/// Activations recorded by a forward pass, enough for an exact backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    generation: u64,
    /// `activations[0]` is the input, `activations[i + 1]` the output of layer `i`.
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache holds at least the input")
    }
}

/// Gradient buffers shaped like an [`Mlp`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTape {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl GradientTape {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            biases: net.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect(),
        }
    }

    pub fn zero(&mut self) {
        self.weights.iter_mut().for_each(|w| w.fill(0.0));
        self.biases.iter_mut().for_each(|b| b.fill(0.0));
    }

    pub fn norm(&self) -> f64 {
        self.values().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.weights.iter_mut().for_each(|w| *w *= factor);
        self.biases.iter_mut().for_each(|b| *b *= factor);
    }

    /// Adds `other` elementwise.
    pub fn accumulate(&mut self, other: &GradientTape) -> Result<()> {
        self.check_shape(other)?;
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
        Ok(())
    }

    /// All values in parameter order (layer by layer, weights row-major then bias).
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }

    fn check_shape(&self, other: &GradientTape) -> Result<()> {
        let same = self.weights.len() == other.weights.len()
            && self.weights.iter().zip(&other.weights).all(|(a, b)| a.dim() == b.dim())
            && self.biases.iter().zip(&other.biases).all(|(a, b)| a.dim() == b.dim());
        if same {
            Ok(())
        } else {
            Err(Error::Contract("gradient tape shapes differ".into()))
        }
    }
}

impl Mlp {
    /// Orthogonally initialized network. Hidden layers use `hidden` activation
    /// and gain sqrt(2); the output layer is linear with gain `output_gain`.
    /// Biases start at zero.
    pub fn new<R: Rng + ?Sized>(
        widths: &[usize],
        hidden: Activation,
        output_gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "network needs >= 2 non-zero widths (got {widths:?})"
            )));
        }
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let last = i + 1 == n;
                let gain = if last { output_gain } else { std::f64::consts::SQRT_2 };
                Dense {
                    weights: orthogonal(widths[i], widths[i + 1], gain, rng),
                    bias: Array1::zeros(widths[i + 1]),
                    activation: if last { Activation::Identity } else { hidden },
                }
            })
            .collect();
        Ok(Self { layers, generation: next_generation() })
    }

    /// Builds a network from explicit layers.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network has no layers".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.weights.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: layer.weights.ncols(),
                    actual: layer.bias.len(),
                });
            }
            if let Some(next) = layers.get(i + 1) {
                if next.weights.nrows() != layer.weights.ncols() {
                    return Err(Error::DimensionMismatch {
                        expected: layer.weights.ncols(),
                        actual: next.weights.nrows(),
                    });
                }
            }
        }
        let net = Self { layers, generation: next_generation() };
        if !net.parameters().all(f64::is_finite) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.generation = next_generation();
        &mut self.layers
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers[0].weights.nrows()];
        w.extend(self.layers.iter().map(|l| l.weights.ncols()));
        w
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.weights.ncols()).unwrap_or(0)
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters in tape order.
    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    /// Mutable access to the `index`-th parameter in tape order.
    pub fn parameter_mut(&mut self, mut index: usize) -> Option<&mut f64> {
        self.generation = next_generation();
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            if index < nw {
                return layer.weights.as_slice_mut().map(|s| &mut s[index]);
            }
            index -= nw;
            let nb = layer.bias.len();
            if index < nb {
                return Some(&mut layer.bias[index]);
            }
            index -= nb;
        }
        None
    }

    /// Batched forward pass; rows of `input` are samples.
    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        if input.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: input.ncols(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_owned());
        for layer in &self.layers {
            let mut z = activations.last().unwrap().dot(&layer.weights);
            z += &layer.bias;
            layer.activation.apply(&mut z);
            activations.push(z);
        }
        let output = activations.last().unwrap().clone();
        Ok((
            output,
            ForwardCache {
                generation: self.generation,
                activations,
            },
        ))
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let view = ArrayView2::from_shape((1, input.len()), input)
            .expect("a slice is a contiguous row");
        let (out, cache) = self.forward_batch(view)?;
        Ok((out.into_raw_vec_and_offset().0, cache))
    }

    /// Output only, for inference.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward(input).map(|(out, _)| out)
    }

    /// Reverse pass. `output_grad` holds dLoss/dOutput per sample; the
    /// returned tape holds dLoss/dParameter summed over samples.
    pub fn backward(&self, cache: &ForwardCache, output_grad: ArrayView2<f64>) -> Result<GradientTape> {
        if cache.generation != self.generation || cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::Contract(
                "forward cache does not belong to the current network parameters".into(),
            ));
        }
        let out = cache.output();
        if output_grad.dim() != out.dim() {
            return Err(Error::DimensionMismatch {
                expected: out.len(),
                actual: output_grad.len(),
            });
        }
        let mut tape = GradientTape::zeros_like(self);
        let mut grad = output_grad.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            layer.activation.backprop(&cache.activations[i + 1], &mut grad);
            let input = &cache.activations[i];
            tape.weights[i] = input.t().dot(&grad);
            tape.biases[i] = grad.sum_axis(Axis(0));
            if i > 0 {
                grad = grad.dot(&layer.weights.t());
            }
        }
        Ok(tape)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::io("<checkpoint>", e);
        w.write_all(NETWORK_MAGIC).map_err(io)?;
        w.write_all(&(self.layers.len() as u32).to_le_bytes()).map_err(io)?;
        for layer in &self.layers {
            let (rows, cols) = layer.weights.dim();
            w.write_all(&(rows as u32).to_le_bytes()).map_err(io)?;
            w.write_all(&(cols as u32).to_le_bytes()).map_err(io)?;
            w.write_all(&[layer.activation.code()]).map_err(io)?;
            for v in layer.weights.iter().chain(layer.bias.iter()) {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != NETWORK_MAGIC {
            return Err(Error::Checkpoint("not a network record".into()));
        }
        let num_layers = read_u32(&mut r)? as usize;
        if num_layers == 0 || num_layers > 64 {
            return Err(Error::Checkpoint(format!("implausible layer count {num_layers}")));
        }
        let mut layers = Vec::with_capacity(num_layers);
        for _ in 0..num_layers {
            let rows = read_u32(&mut r)? as usize;
            let cols = read_u32(&mut r)? as usize;
            if rows == 0 || cols == 0 || rows.saturating_mul(cols) > 1 << 26 {
                return Err(Error::Checkpoint(format!("implausible layer shape {rows}x{cols}")));
            }
            let mut code = [0u8; 1];
            read_exact(&mut r, &mut code)?;
            let activation = Activation::from_code(code[0])?;
            let weights = (0..rows * cols).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
            let bias = (0..cols).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
            layers.push(Dense {
                weights: Array2::from_shape_vec((rows, cols), weights)
                    .map_err(|e| Error::Checkpoint(e.to_string()))?,
                bias: Array1::from(bias),
                activation,
            });
        }
        Self::from_layers(layers)
    }
}

const NETWORK_MAGIC: &[u8; 8] = b"SEMNET01";

pub(crate) fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// `rows x cols` matrix with orthonormal rows or columns, times `gain`.
fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Array2<f64> {
    // Orthonormalize the columns of a tall Gaussian matrix, transposing if wide.
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let mut q = Array2::<f64>::from_shape_fn((tall, short), |_| rng.sample(StandardNormal));
    for j in 0..short {
        for k in 0..j {
            let dot = q.column(j).dot(&q.column(k));
            let prev = q.column(k).to_owned();
            q.column_mut(j).scaled_add(-dot, &prev);
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        if norm > 1e-12 {
            q.column_mut(j).mapv_inplace(|v| v / norm);
        }
    }
    let q = if rows >= cols { q } else { q.reversed_axes().as_standard_layout().into_owned() };
    q * gain
}

/// Adam moments and hyperparameters for one network.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first: GradientTape,
    second: GradientTape,
}

impl AdamState {
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: GradientTape::zeros_like(net),
            second: GradientTape::zeros_like(net),
        }
    }
}

/// Clips `tape` to global norm `max_grad_norm` and applies one Adam update.
/// Returns the gradient norm before clipping.
pub fn adam_step(
    net: &mut Mlp,
    tape: &GradientTape,
    opt: &mut AdamState,
    max_grad_norm: f64,
) -> Result<f64> {
    if max_grad_norm.is_nan() || max_grad_norm <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "max_grad_norm must be > 0 (got {max_grad_norm})"
        )));
    }
    opt.first.check_shape(tape)?;
    if tape.weights.len() != net.layers.len() {
        return Err(Error::Contract("gradient tape does not match network".into()));
    }
    let norm = tape.norm();
    if !norm.is_finite() {
        return Err(Error::NonFinite(format!("gradient norm {norm}")));
    }
    let clip = if norm > max_grad_norm { max_grad_norm / norm } else { 1.0 };

    opt.step += 1;
    let t = opt.step as i32;
    let (b1, b2, eps) = (opt.beta1, opt.beta2, opt.epsilon);
    let lr_t = opt.learning_rate * (1.0 - b2.powi(t)).sqrt() / (1.0 - b1.powi(t));

    let update = |param: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        let g = g * clip;
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *param -= lr_t * *m / (v.sqrt() + eps);
    };

    for (i, layer) in net.layers.iter_mut().enumerate() {
        ndarray::Zip::from(&mut layer.weights)
            .and(&tape.weights[i])
            .and(&mut opt.first.weights[i])
            .and(&mut opt.second.weights[i])
            .for_each(|p, &g, m, v| update(p, g, m, v));
        ndarray::Zip::from(&mut layer.bias)
            .and(&tape.biases[i])
            .and(&mut opt.first.biases[i])
            .and(&mut opt.second.biases[i])
            .for_each(|p, &g, m, v| update(p, g, m, v));
    }
    net.generation = next_generation();
    Ok(norm)
}
