use serde::{Deserialize, Serialize};

use super::{Parameters, Rng, Tensor};
use crate::{Error, Result};

/// Fully connected layer, `weight` has shape `[out, in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Tensor::zeros(vec![output, input]),
            bias: Tensor::zeros(vec![output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        let n_in = self.input_dim();
        out.clear();
        out.extend(
            self.weight
                .data()
                .chunks_exact(n_in)
                .zip(self.bias.data())
                .map(|(row, b)| b + dot(row, x)),
        );
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Multilayer perceptron: tanh on every hidden layer, identity on the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Activations recorded by [`Mlp::forward_traced`]; `activations[0]` is the input.
#[derive(Debug, Clone)]
pub struct Trace {
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace always holds the input")
    }

    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }
}

impl Mlp {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::contract("an MLP needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::contract(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].output_dim(),
                    i + 1,
                    pair[1].input_dim()
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.output_dim() || l.weight.shape().len() != 2 {
                return Err(Error::contract(format!("layer {i} has inconsistent bias")));
            }
        }
        Ok(Self { layers })
    }

    /// All-zero network with the given layer widths (`sizes[0]` is the input width).
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need input and output widths");
        Self {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    /// Weights and biases drawn from `N(0, (gain / sqrt(fan_in))^2)`.
    pub fn random(sizes: &[usize], gain: f64, rng: &mut Rng) -> Self {
        let mut net = Self::zeros(sizes);
        for layer in &mut net.layers {
            let std = gain / (layer.input_dim() as f64).sqrt();
            for w in layer.weight.data_mut() {
                *w = std * rng.normal();
            }
            for b in layer.bias.data_mut() {
                *b = std * rng.normal();
            }
        }
        net
    }

    /// Glorot-style weights with zero biases.
    pub fn glorot(sizes: &[usize], rng: &mut Rng) -> Self {
        let mut net = Self::zeros(sizes);
        for layer in &mut net.layers {
            let std = (2.0 / (layer.input_dim() + layer.output_dim()) as f64).sqrt();
            for w in layer.weight.data_mut() {
                *w = std * rng.normal();
            }
        }
        net
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.layer_sizes())
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Dense::output_dim))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Dense::output_dim).unwrap_or(0)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::contract(format!(
                "network expects input width {}, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn forward_traced(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.output_dim());
            layer.apply(activations.last().unwrap(), &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(out);
        }
        Ok(Trace { activations })
    }

    /// Reverse pass: adds `d(upstream · output)/d(params)` into `grads` and
    /// returns the gradient with respect to the input.
    pub fn backward(&self, trace: &Trace, upstream: &[f64], grads: &mut Mlp) -> Result<Vec<f64>> {
        if upstream.len() != self.output_dim() {
            return Err(Error::contract(format!(
                "upstream gradient has width {}, network output is {}",
                upstream.len(),
                self.output_dim()
            )));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::contract("gradient accumulator has a different depth"));
        }
        let mut delta = upstream.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &trace.activations[l];
            let n_in = layer.input_dim();
            let g = &mut grads.layers[l];
            for ((grow, &d), gb) in g
                .weight
                .data_mut()
                .chunks_exact_mut(n_in)
                .zip(&delta)
                .zip(g.bias.data_mut())
            {
                *gb += d;
                if d != 0.0 {
                    for (gw, &a) in grow.iter_mut().zip(input) {
                        *gw += d * a;
                    }
                }
            }
            let mut prev = vec![0.0; n_in];
            for (row, &d) in layer.weight.data().chunks_exact(n_in).zip(&delta) {
                if d != 0.0 {
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
            }
            if l > 0 {
                // input of layer l is the tanh output of layer l-1
                for (p, &a) in prev.iter_mut().zip(input) {
                    *p *= 1.0 - a * a;
                }
            }
            delta = prev;
        }
        Ok(delta)
    }

    /// Gradient of `upstream · f(x)` with respect to parameters and input.
    pub fn gradients(&self, x: &[f64], upstream: &[f64]) -> Result<(Mlp, Vec<f64>)> {
        let trace = self.forward_traced(x)?;
        let mut grads = self.zeros_like();
        let dx = self.backward(&trace, upstream, &mut grads)?;
        Ok((grads, dx))
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Mlp) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += alpha * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.data())
            .map(|v| v * v)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// Appends one output unit with the given incoming weights and bias,
    /// leaving all existing rows untouched.
    pub fn push_output_unit(&mut self, weights: &[f64], bias: f64) -> Result<()> {
        let last = self.layers.last_mut().expect("non-empty");
        let (out, n_in) = (last.output_dim(), last.input_dim());
        if weights.len() != n_in {
            return Err(Error::contract(format!(
                "new output row needs {n_in} weights, got {}",
                weights.len()
            )));
        }
        let mut w = last.weight.data().to_vec();
        w.extend_from_slice(weights);
        last.weight.reshape_for_growth(vec![out + 1, n_in], w);
        let mut b = last.bias.data().to_vec();
        b.push(bias);
        last.bias.reshape_for_growth(vec![out + 1], b);
        Ok(())
    }
}

impl Parameters for Mlp {
    fn tensors(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    fn tensor_name(&self, index: usize) -> String {
        let kind = if index.is_multiple_of(2) { "weight" } else { "bias" };
        format!("layer{}.{kind}", index / 2)
    }
}
