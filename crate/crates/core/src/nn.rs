//! Dense feed-forward networks with hand-written backpropagation.
//!
//! A [`Network`] is a chain of affine layers, each followed by an element-wise
//! activation (`tanh`, identity) or, for the last layer only, a softmax.
//! Weights are stored row-major with shape `(output_dim, input_dim)`.
//!
//! Two losses are supported, matching the two kinds of model in this crate:
//! the mean absolute reconstruction error of the autoencoders and the
//! scaled log-likelihood used by the policy-gradient update. Both add an L2
//! penalty `(l2 / 2) * ||W||^2` over weights (biases are not penalized).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"HECNET\x00\x01";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
    Softmax,
}

impl Activation {
    fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Identity => 1,
            Activation::Softmax => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Identity),
            2 => Some(Activation::Softmax),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        Self {
            input_dim,
            output_dim,
            activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.input_dim * self.output_dim + self.output_dim
    }
}

/// Builds a layer chain through `dims` with `hidden` on every layer but the
/// last, which uses `output`.
pub fn chain(dims: &[usize], hidden: Activation, output: Activation) -> Vec<LayerSpec> {
    let n = dims.len().saturating_sub(1);
    dims.windows(2)
        .enumerate()
        .map(|(i, w)| LayerSpec::new(w[0], w[1], if i + 1 == n { output } else { hidden }))
        .collect()
}

pub fn validate_spec(spec: &[LayerSpec]) -> Result<()> {
    if spec.is_empty() {
        return Err(Error::Spec("network needs at least one layer".into()));
    }
    for (i, layer) in spec.iter().enumerate() {
        if layer.input_dim == 0 || layer.output_dim == 0 {
            return Err(Error::Spec(format!("layer {i} has a zero dimension")));
        }
        if layer.activation == Activation::Softmax && i + 1 != spec.len() {
            return Err(Error::Spec(format!(
                "softmax is only allowed on the final layer (found on layer {i})"
            )));
        }
    }
    for (i, pair) in spec.windows(2).enumerate() {
        if pair[0].output_dim != pair[1].input_dim {
            return Err(Error::Spec(format!(
                "layer {} outputs {} values but layer {} expects {}",
                i,
                pair[0].output_dim,
                i + 1,
                pair[1].input_dim
            )));
        }
    }
    Ok(())
}

/// Number of weights and biases in a layer chain.
pub fn param_count(spec: &[LayerSpec]) -> usize {
    spec.iter().map(LayerSpec::param_count).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    spec: LayerSpec,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    pub fn spec(&self) -> LayerSpec {
        self.spec
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    /// Weight connecting input `i` to output `o`.
    pub fn weight(&self, o: usize, i: usize) -> f64 {
        self.weights[o * self.spec.input_dim + i]
    }
}

/// Per-layer gradients, laid out exactly like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Gradients {
    /// All entries in parameter order: layer by layer, weights then biases.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|&g| g == 0.0))
    }
}

/// Values recorded by a forward pass, needed for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    act: Vec<Vec<f64>>,
    fed: Vec<Vec<f64>>,
    masks: Option<Vec<Vec<f64>>>,
}

impl ForwardTrace {
    pub fn input(&self) -> &[f64] {
        &self.input
    }

    /// Final activations of the network.
    pub fn output(&self) -> &[f64] {
        self.act.last().expect("trace of a non-empty network")
    }

    pub fn into_output(mut self) -> Vec<f64> {
        self.act.pop().expect("trace of a non-empty network")
    }

    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre
    }

    pub fn activations(&self) -> &[Vec<f64>] {
        &self.act
    }

    /// Dropout masks for each hidden layer; `None` for inference traces.
    pub fn masks(&self) -> Option<&[Vec<f64>]> {
        self.masks.as_deref()
    }

    pub fn layer_count(&self) -> usize {
        self.pre.len()
    }

    fn layer_input(&self, l: usize) -> &[f64] {
        if l == 0 {
            &self.input
        } else {
            &self.fed[l - 1]
        }
    }
}

/// Training hyperparameters shared by the autoencoders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub dropout_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(
                "learning_rate must be positive".into(),
            ));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::InvalidArgument(
                "l2_lambda must be nonnegative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidArgument(
                "dropout_rate must lie in [0, 1)".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

impl Network {
    /// Glorot-uniform weights in `(-b, b)` with `b = sqrt(6 / (fan_in + fan_out))`,
    /// zero biases.
    pub fn init(spec: &[LayerSpec], seed: u64) -> Result<Self> {
        validate_spec(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .iter()
            .map(|&s| {
                let bound = init_bound(&s);
                let weights = (0..s.input_dim * s.output_dim)
                    .map(|_| (2.0 * rng.random::<f64>() - 1.0) * bound)
                    .collect();
                Layer {
                    spec: s,
                    weights,
                    biases: vec![0.0; s.output_dim],
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros(spec: &[LayerSpec]) -> Result<Self> {
        validate_spec(spec)?;
        let layers = spec
            .iter()
            .map(|&s| Layer {
                spec: s,
                weights: vec![0.0; s.input_dim * s.output_dim],
                biases: vec![0.0; s.output_dim],
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn spec(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.output_dim
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.spec())
    }

    /// All parameters in layer order, weights then biases.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
            .collect()
    }

    /// Mutable access to the `index`-th parameter in [`Network::flatten`] order.
    pub fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            let n = nw + layer.biases.len();
            if index < n {
                return if index < nw {
                    &mut layer.weights[index]
                } else {
                    &mut layer.biases[index - nw]
                };
            }
            index -= n;
        }
        panic!("parameter index out of range");
    }

    /// Squared Euclidean norm of all weights (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter())
            .map(|w| w * w)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    /// Deterministic forward pass with no dropout.
    pub fn infer(&self, input: &[f64]) -> Result<ForwardTrace> {
        self.forward_impl::<ChaCha8Rng>(input, None)
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.infer(input)?.into_output())
    }

    /// Forward pass with inverted dropout after every hidden layer.
    pub fn forward_train<R: Rng + ?Sized>(
        &self,
        input: &[f64],
        dropout_rate: f64,
        rng: &mut R,
    ) -> Result<ForwardTrace> {
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::InvalidArgument(
                "dropout_rate must lie in [0, 1)".into(),
            ));
        }
        self.forward_impl(input, Some((dropout_rate, rng)))
    }

    fn forward_impl<R: Rng + ?Sized>(
        &self,
        input: &[f64],
        mut dropout: Option<(f64, &mut R)>,
    ) -> Result<ForwardTrace> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let n = self.layers.len();
        let mut pre = Vec::with_capacity(n);
        let mut act = Vec::with_capacity(n);
        let mut fed: Vec<Vec<f64>> = Vec::with_capacity(n.saturating_sub(1));
        let mut masks = dropout
            .as_ref()
            .map(|_| Vec::with_capacity(n.saturating_sub(1)));

        for (l, layer) in self.layers.iter().enumerate() {
            let x = if l == 0 { input } else { &fed[l - 1] };
            let ind = layer.spec.input_dim;
            let z: Vec<f64> = layer
                .weights
                .chunks_exact(ind)
                .zip(&layer.biases)
                .map(|(row, b)| b + dot(row, x))
                .collect();
            let a = activate(layer.spec.activation, &z);
            if l + 1 < n {
                let next = match (&mut dropout, &mut masks) {
                    (Some((p, rng)), Some(masks)) => {
                        let keep = 1.0 - *p;
                        let scale = 1.0 / keep;
                        let mask: Vec<f64> = (0..a.len())
                            .map(|_| {
                                if rng.random::<f64>() < keep {
                                    scale
                                } else {
                                    0.0
                                }
                            })
                            .collect();
                        let out = a.iter().zip(&mask).map(|(v, m)| v * m).collect();
                        masks.push(mask);
                        out
                    }
                    _ => a.clone(),
                };
                fed.push(next);
            }
            pre.push(z);
            act.push(a);
        }
        Ok(ForwardTrace {
            input: input.to_vec(),
            pre,
            act,
            fed,
            masks,
        })
    }

    /// Gradient of `mean(|out - target|) + (l2 / 2) ||W||^2`.
    ///
    /// The subgradient of `|x|` at zero is taken as zero.
    pub fn backward_mae(&self, trace: &ForwardTrace, target: &[f64], l2: f64) -> Result<Gradients> {
        let delta = self.mae_output_delta(trace, target)?;
        self.backward_from_delta(trace, delta, l2)
    }

    /// Gradient of `scale * ln(s[action]) + (l2 / 2) ||W||^2` for a softmax head.
    pub fn backward_logprob(
        &self,
        trace: &ForwardTrace,
        action: usize,
        scale: f64,
        l2: f64,
    ) -> Result<Gradients> {
        let delta = self.logprob_output_delta(trace, action, scale)?;
        self.backward_from_delta(trace, delta, l2)
    }

    /// `params -= learning_rate * gradients`.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(Error::Dimension {
                expected: self.layers.len(),
                got: grads.layers.len(),
            });
        }
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            if g.weights.len() != layer.weights.len() || g.biases.len() != layer.biases.len() {
                return Err(Error::Dimension {
                    expected: layer.weights.len() + layer.biases.len(),
                    got: g.weights.len() + g.biases.len(),
                });
            }
            for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= learning_rate * gw;
            }
            for (b, gb) in layer.biases.iter_mut().zip(&g.biases) {
                *b -= learning_rate * gb;
            }
        }
        Ok(())
    }

    /// One SGD step on the MAE loss without materializing the gradient.
    /// Produces exactly the same parameters as `backward_mae` + `sgd_step`.
    pub fn train_step_mae(
        &mut self,
        trace: &ForwardTrace,
        target: &[f64],
        l2: f64,
        learning_rate: f64,
    ) -> Result<()> {
        let delta = self.mae_output_delta(trace, target)?;
        self.check_trace(trace)?;
        let n = self.layers.len();
        let mut delta = delta;
        for l in (0..n).rev() {
            let prev_delta = if l > 0 {
                Some(self.propagate(trace, l, &delta))
            } else {
                None
            };
            let x = trace.layer_input(l);
            let layer = &mut self.layers[l];
            let ind = layer.spec.input_dim;
            for ((row, b), &d) in layer
                .weights
                .chunks_exact_mut(ind)
                .zip(layer.biases.iter_mut())
                .zip(&delta)
            {
                for (w, &xi) in row.iter_mut().zip(x) {
                    let g = d * xi + l2 * *w;
                    *w -= learning_rate * g;
                }
                *b -= learning_rate * d;
            }
            if let Some(p) = prev_delta {
                delta = p;
            }
        }
        Ok(())
    }

    fn check_trace(&self, trace: &ForwardTrace) -> Result<()> {
        if trace.layer_count() != self.layers.len() {
            return Err(Error::Dimension {
                expected: self.layers.len(),
                got: trace.layer_count(),
            });
        }
        Ok(())
    }

    fn mae_output_delta(&self, trace: &ForwardTrace, target: &[f64]) -> Result<Vec<f64>> {
        self.check_trace(trace)?;
        let out = trace.output();
        if target.len() != out.len() {
            return Err(Error::Dimension {
                expected: out.len(),
                got: target.len(),
            });
        }
        let inv_n = 1.0 / out.len() as f64;
        let grad_out: Vec<f64> = out
            .iter()
            .zip(target)
            .map(|(o, t)| {
                let d = o - t;
                if d > 0.0 {
                    inv_n
                } else if d < 0.0 {
                    -inv_n
                } else {
                    0.0
                }
            })
            .collect();
        let last = self.layers.len() - 1;
        Ok(activation_backward(
            self.layers[last].spec.activation,
            &trace.act[last],
            grad_out,
        ))
    }

    fn logprob_output_delta(
        &self,
        trace: &ForwardTrace,
        action: usize,
        scale: f64,
    ) -> Result<Vec<f64>> {
        self.check_trace(trace)?;
        let last = self.layers.len() - 1;
        if self.layers[last].spec.activation != Activation::Softmax {
            return Err(Error::Spec(
                "log-probability loss needs a softmax output".into(),
            ));
        }
        let s = trace.output();
        if action >= s.len() {
            return Err(Error::InvalidArgument(format!(
                "action index {action} out of range for {} actions",
                s.len()
            )));
        }
        Ok(s.iter()
            .enumerate()
            .map(|(j, &sj)| scale * (if j == action { 1.0 } else { 0.0 } - sj))
            .collect())
    }

    /// Backpropagates `delta` (the loss gradient w.r.t. the last layer's
    /// pre-activations) through every layer.
    fn backward_from_delta(
        &self,
        trace: &ForwardTrace,
        mut delta: Vec<f64>,
        l2: f64,
    ) -> Result<Gradients> {
        self.check_trace(trace)?;
        let n = self.layers.len();
        let mut grads = Vec::with_capacity(n);
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let x = trace.layer_input(l);
            let mut gw = Vec::with_capacity(layer.weights.len());
            for (row, &d) in layer.weights.chunks_exact(layer.spec.input_dim).zip(&delta) {
                gw.extend(row.iter().zip(x).map(|(w, xi)| d * xi + l2 * w));
            }
            let gb = delta.clone();
            grads.push(LayerGradient {
                weights: gw,
                biases: gb,
            });
            if l > 0 {
                delta = self.propagate(trace, l, &delta);
            }
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// Maps the pre-activation gradient of layer `l` to that of layer `l - 1`.
    fn propagate(&self, trace: &ForwardTrace, l: usize, delta: &[f64]) -> Vec<f64> {
        let layer = &self.layers[l];
        let ind = layer.spec.input_dim;
        let mut d_in = vec![0.0; ind];
        for (row, &d) in layer.weights.chunks_exact(ind).zip(delta) {
            if d == 0.0 {
                continue;
            }
            for (acc, w) in d_in.iter_mut().zip(row) {
                *acc += w * d;
            }
        }
        if let Some(masks) = &trace.masks {
            for (v, m) in d_in.iter_mut().zip(&masks[l - 1]) {
                *v *= m;
            }
        }
        activation_backward(self.layers[l - 1].spec.activation, &trace.act[l - 1], d_in)
    }

    /// Binary layout: magic, `u32` layer count, per layer (`u32` input dim,
    /// `u32` output dim, `u8` activation), then per layer the row-major
    /// weights followed by the biases as little-endian `f64`.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        for layer in &self.layers {
            w.write_all(&(layer.spec.input_dim as u32).to_le_bytes())?;
            w.write_all(&(layer.spec.output_dim as u32).to_le_bytes())?;
            w.write_all(&[layer.spec.activation.code()])?;
        }
        for layer in &self.layers {
            for v in layer.weights.iter().chain(&layer.biases) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R, path: &Path) -> Result<Self> {
        let bad = |m: &str| Error::format(path, m);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)
            .map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("not a network parameter file"));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)
            .map_err(|_| bad("truncated header"))?;
        let count = u32::from_le_bytes(u32buf) as usize;
        if count == 0 || count > 1024 {
            return Err(bad("implausible layer count"));
        }
        let mut spec = Vec::with_capacity(count);
        for _ in 0..count {
            r.read_exact(&mut u32buf)
                .map_err(|_| bad("truncated header"))?;
            let input_dim = u32::from_le_bytes(u32buf) as usize;
            r.read_exact(&mut u32buf)
                .map_err(|_| bad("truncated header"))?;
            let output_dim = u32::from_le_bytes(u32buf) as usize;
            let mut code = [0u8; 1];
            r.read_exact(&mut code)
                .map_err(|_| bad("truncated header"))?;
            let activation =
                Activation::from_code(code[0]).ok_or_else(|| bad("unknown activation"))?;
            spec.push(LayerSpec::new(input_dim, output_dim, activation));
        }
        validate_spec(&spec).map_err(|e| bad(&e.to_string()))?;
        let mut net = Network::zeros(&spec)?;
        let mut f64buf = [0u8; 8];
        for layer in &mut net.layers {
            for v in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                r.read_exact(&mut f64buf)
                    .map_err(|_| bad("truncated parameter data"))?;
                *v = f64::from_le_bytes(f64buf);
            }
        }
        let mut probe = [0u8; 1];
        if r.read(&mut probe).map_err(|e| Error::io(path, e))? != 0 {
            return Err(bad("trailing bytes after parameter data"));
        }
        if !net.is_finite() {
            return Err(bad("non-finite parameter"));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(file), path)
    }

    /// Size in bytes of the serialized form.
    pub fn encoded_len(&self) -> usize {
        8 + 4 + 9 * self.layers.len() + 8 * self.param_count()
    }
}

/// Bound of the uniform initializer for one layer.
pub fn init_bound(spec: &LayerSpec) -> f64 {
    (6.0 / (spec.input_dim + spec.output_dim) as f64).sqrt()
}

fn activate(activation: Activation, z: &[f64]) -> Vec<f64> {
    match activation {
        Activation::Tanh => z.iter().map(|v| v.tanh()).collect(),
        Activation::Identity => z.to_vec(),
        Activation::Softmax => softmax(z),
    }
}

/// Converts a gradient w.r.t. activations into one w.r.t. pre-activations.
fn activation_backward(activation: Activation, a: &[f64], mut grad: Vec<f64>) -> Vec<f64> {
    match activation {
        Activation::Tanh => {
            for (g, v) in grad.iter_mut().zip(a) {
                *g *= 1.0 - v * v;
            }
            grad
        }
        Activation::Identity => grad,
        Activation::Softmax => {
            let inner: f64 = a.iter().zip(&grad).map(|(s, g)| s * g).sum();
            a.iter().zip(&grad).map(|(s, g)| s * (g - inner)).collect()
        }
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Dot product with eight independent accumulators so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}
