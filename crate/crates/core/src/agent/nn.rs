//! Dense feed-forward networks over a flat parameter slice.
//!
//! A network is described by its layer sizes; parameters for layer `l` are
//! stored as the `out x in` weight matrix (row-major) followed by the bias.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn derivative(self, pre: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseLayout {
    pub inputs: usize,
    pub outputs: usize,
    /// Offset of the weight matrix in the flat slice.
    pub offset: usize,
}

impl DenseLayout {
    pub fn weight_len(&self) -> usize {
        self.inputs * self.outputs
    }

    pub fn len(&self) -> usize {
        self.weight_len() + self.outputs
    }

    pub fn bias_offset(&self) -> usize {
        self.offset + self.weight_len()
    }
}

/// Layer addressing for one MLP inside a larger flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpLayout {
    pub layers: Vec<DenseLayout>,
    pub activation: Activation,
}

/// Activations recorded by a forward pass; `values[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub pre: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.values.last().expect("trace holds at least the input")
    }
}

impl MlpLayout {
    pub fn new(sizes: &[usize], activation: Activation, offset: usize) -> Self {
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        let mut at = offset;
        for w in sizes.windows(2) {
            let layer = DenseLayout { inputs: w[0], outputs: w[1], offset: at };
            at += layer.len();
            layers.push(layer);
        }
        Self { layers, activation }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn offset(&self) -> usize {
        self.layers[0].offset
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(DenseLayout::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Uniform(+-1/sqrt(fan_in)) weights, zero biases. The last layer is
    /// additionally scaled by `output_scale`.
    pub fn init(&self, params: &mut [f64], output_scale: f64, rng: &mut impl Rng) {
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            let scale = if k == last { output_scale } else { 1.0 };
            for w in &mut params[layer.offset..layer.bias_offset()] {
                *w = rng.random_range(-bound..bound) * scale;
            }
            params[layer.bias_offset()..layer.offset + layer.len()].fill(0.0);
        }
    }

    /// Forward pass; hidden layers use the activation, the output is linear.
    pub fn forward(&self, params: &[f64], input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut y = affine(layer, params, &x);
            if k != last {
                y.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            x = y;
        }
        x
    }

    pub fn forward_trace(&self, params: &[f64], input: &[f64]) -> ForwardTrace {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(input.to_vec());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let z = affine(layer, params, values.last().unwrap());
            let y = if k == last { z.clone() } else { z.iter().map(|v| self.activation.apply(*v)).collect() };
            pre.push(z);
            values.push(y);
        }
        ForwardTrace { pre, values }
    }

    /// Accumulate `d loss / d params` into `grad` given `d loss / d output`.
    pub fn backward(&self, params: &[f64], trace: &ForwardTrace, grad_output: &[f64], grad: &mut [f64]) {
        let mut delta = grad_output.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &trace.values[k];
            let (n_in, n_out) = (layer.inputs, layer.outputs);
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = layer.offset + o * n_in;
                for (g, x) in grad[row..row + n_in].iter_mut().zip(input) {
                    *g += d * x;
                }
                grad[layer.bias_offset() + o] += d;
            }
            if k == 0 {
                break;
            }
            let mut next = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = layer.offset + o * n_in;
                for (acc, w) in next.iter_mut().zip(&params[row..row + n_in]) {
                    *acc += d * w;
                }
            }
            let (pre, out) = (&trace.pre[k - 1], &trace.values[k]);
            for i in 0..n_in {
                next[i] *= self.activation.derivative(pre[i], out[i]);
            }
            delta = next;
        }
    }
}

fn affine(layer: &DenseLayout, params: &[f64], x: &[f64]) -> Vec<f64> {
    let (n_in, n_out) = (layer.inputs, layer.outputs);
    let bias = &params[layer.bias_offset()..layer.bias_offset() + n_out];
    (0..n_out)
        .map(|o| {
            let row = &params[layer.offset + o * n_in..layer.offset + (o + 1) * n_in];
            row.iter().zip(x).fold(bias[o], |acc, (w, v)| acc + w * v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_sizes() {
        let l = MlpLayout::new(&[6, 16, 16, 2], Activation::Tanh, 10);
        assert_eq!(l.len(), 6 * 16 + 16 + 16 * 16 + 16 + 16 * 2 + 2);
        assert_eq!(l.offset(), 10);
        assert_eq!(l.layers[1].offset, 10 + 6 * 16 + 16);
    }

    #[test]
    fn backward_matches_finite_differences() {
        for act in [Activation::Tanh, Activation::Relu] {
            let l = MlpLayout::new(&[3, 5, 4, 2], act, 0);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut p = vec![0.0; l.len()];
            l.init(&mut p, 1.0, &mut rng);
            p.iter_mut().for_each(|v| *v += rng.random_range(-0.1..0.1));
            let x = [0.3, -0.7, 0.2];
            let upstream = [0.6, -1.1];
            let f = |q: &[f64]| {
                let y = l.forward(q, &x);
                y[0] * upstream[0] + y[1] * upstream[1]
            };
            let trace = l.forward_trace(&p, &x);
            let mut g = vec![0.0; l.len()];
            l.backward(&p, &trace, &upstream, &mut g);
            let h = 1e-6;
            for i in 0..p.len() {
                let mut a = p.clone();
                let mut b = p.clone();
                a[i] += h;
                b[i] -= h;
                let fd = (f(&a) - f(&b)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-7 * (1.0 + fd.abs()), "{act:?} param {i}: {fd} vs {}", g[i]);
            }
        }
    }
}
