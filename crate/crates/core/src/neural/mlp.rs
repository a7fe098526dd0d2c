use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn slope_at_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Affine layer `y = W x + b` with `W` stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    #[inline]
    fn affine(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out.iter_mut().zip(self.weights.chunks_exact(self.inputs).zip(&self.bias)) {
            *o = row.iter().zip(x).fold(*b, |acc, (w, v)| w.mul_add(*v, acc));
        }
    }
}

/// Multilayer perceptron. The activation follows every layer but the last.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpWeights {
    pub layers: Vec<Layer>,
    pub activation: Activation,
}

/// Post-activation values of every layer for one input, input included.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    values: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.values.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl MlpWeights {
    pub fn new(layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("an MLP needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.inputs == 0 || l.outputs == 0 {
                return Err(Error::Shape(format!("layer {i} has a zero dimension")));
            }
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::Shape(format!(
                    "layer {i}: {} weights and {} biases for shape {}x{}",
                    l.weights.len(),
                    l.bias.len(),
                    l.outputs,
                    l.inputs
                )));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("layer {i} has non-finite entries")));
            }
            if i > 0 && layers[i - 1].outputs != l.inputs {
                return Err(Error::Shape(format!(
                    "layer {i} expects {} inputs but layer {} emits {}",
                    l.inputs,
                    i - 1,
                    layers[i - 1].outputs
                )));
            }
        }
        Ok(Self { layers, activation })
    }

    /// Layer widths `sizes[0] -> sizes[1] -> ...`, all zero.
    pub fn zeros(sizes: &[usize], activation: Activation) -> Self {
        let layers = sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Self { layers, activation }
    }

    /// Glorot-uniform weights `U(-a, a)`, `a = sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(sizes: &[usize], activation: Activation, seed: u64) -> Self {
        let mut w = Self::zeros(sizes, activation);
        let mut r = rng::stream(seed);
        for l in &mut w.layers {
            let a = (6.0 / (l.inputs + l.outputs) as f64).sqrt();
            for v in &mut l.weights {
                *v = r.random_range(-a..a);
            }
        }
        w
    }

    pub fn zeros_like(&self) -> Self {
        Self { layers: self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect(), activation: self.activation }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters in layer order, weights before biases.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Shape(format!("{} values for {} parameters", values.len(), self.param_count())));
        }
        for (p, v) in self.params_mut().zip(values) {
            *p = *v;
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!("MLP input has {} values, expected {}", x.len(), self.input_dim())));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut trace = Trace::default();
        self.forward_traced(x, &mut trace);
        Ok(trace.values.pop().unwrap_or_default())
    }

    /// Forward pass recording every layer's output into `trace`.
    /// The input length must already be validated.
    pub fn forward_traced(&self, x: &[f64], trace: &mut Trace) {
        let depth = self.layers.len();
        trace.values.resize_with(depth + 1, Vec::new);
        trace.values[0].clear();
        trace.values[0].extend_from_slice(x);
        for (i, layer) in self.layers.iter().enumerate() {
            let (done, rest) = trace.values.split_at_mut(i + 1);
            let out = &mut rest[0];
            out.resize(layer.outputs, 0.0);
            layer.affine(&done[i], out);
            if i + 1 < depth {
                for v in out.iter_mut() {
                    *v = self.activation.apply(*v);
                }
            }
        }
    }

    /// Accumulates `d loss / d weights` into `grads` given `d loss / d output`,
    /// and returns `d loss / d input`.
    pub fn backward(&self, trace: &Trace, grad_output: &[f64], grads: &mut MlpWeights) -> Vec<f64> {
        let mut delta = grad_output.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &trace.values[i];
            let g = &mut grads.layers[i];
            for (o, d) in delta.iter().enumerate() {
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, x) in row.iter_mut().zip(input) {
                    *gw = d.mul_add(*x, *gw);
                }
            }
            let mut grad_in = vec![0.0; layer.inputs];
            for (row, d) in layer.weights.chunks_exact(layer.inputs).zip(&delta) {
                for (gi, w) in grad_in.iter_mut().zip(row) {
                    *gi = d.mul_add(*w, *gi);
                }
            }
            if i > 0 {
                for (gi, y) in grad_in.iter_mut().zip(input) {
                    *gi *= self.activation.slope_at_output(*y);
                }
            }
            delta = grad_in;
        }
        delta
    }
}

/// Forward pass: affine layers with the activation between them, linear output.
pub fn mlp_forward(w: &MlpWeights, x: &[f64]) -> Result<Vec<f64>> {
    w.forward(x)
}
