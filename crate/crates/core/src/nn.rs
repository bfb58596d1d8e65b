//! Small dense networks with hand-written backpropagation and Adam.
//!
//! Parameters live in one flat buffer, layer after layer, each layer stored
//! as its row-major `outputs x inputs` weight matrix followed by its bias.
//! Gradients and optimizer moments use the same layout, which keeps the
//! optimizer, checkpoints and finite-difference checks trivial.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape and row-major weights of one dense layer, as stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerData {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs` rows of `inputs` weights each.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Multilayer perceptron with tanh hidden units and a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by a forward pass; `acts[0]` is the input and the
/// last entry is the (linear) output.
#[derive(Debug, Clone)]
pub struct Trace {
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace has an output")
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// An all-zero network with layer widths `sizes` (input first).
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!("bad layer sizes {sizes:?}")));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// Gaussian fan-in initialization; the output layer is additionally
    /// scaled by `output_gain` (small values give a near-uniform initial
    /// policy). Biases start at zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output_gain: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let layers = sizes.len() - 1;
        let mut offset = 0;
        for (l, w) in sizes.windows(2).enumerate() {
            let (inputs, outputs) = (w[0], w[1]);
            let gain = if l + 1 == layers { output_gain } else { 1.0 };
            let normal = Normal::new(0.0, gain / (inputs as f64).sqrt()).expect("positive std");
            for p in &mut net.params[offset..offset + inputs * outputs] {
                *p = normal.sample(rng);
            }
            offset += inputs * outputs + outputs;
        }
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(x)?.acts.pop().expect("output"))
    }

    pub fn trace(&self, x: &[f64]) -> Result<Trace> {
        if x.len() != self.input_len() {
            return Err(Error::ShapeMismatch {
                expected: self.input_len(),
                found: x.len(),
            });
        }
        let layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        let mut offset = 0;
        for l in 0..layers {
            let (inputs, outputs) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + inputs * outputs];
            let b = &self.params[offset + inputs * outputs..offset + inputs * outputs + outputs];
            let a = &acts[l];
            let mut z: Vec<f64> = w
                .chunks_exact(inputs)
                .zip(b)
                .map(|(row, bias)| bias + row.iter().zip(a).map(|(wi, ai)| wi * ai).sum::<f64>())
                .collect();
            if l + 1 < layers {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
            offset += inputs * outputs + outputs;
        }
        Ok(Trace { acts })
    }

    /// Backpropagates `grad_out` (dLoss/dOutput) through the pass recorded
    /// in `trace`, accumulating parameter gradients into `grad` and
    /// returning dLoss/dInput.
    pub fn backward(&self, trace: &Trace, grad_out: &[f64], grad: &mut [f64]) -> Vec<f64> {
        assert_eq!(grad.len(), self.params.len(), "gradient buffer shape");
        assert_eq!(grad_out.len(), self.output_len(), "output gradient shape");
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }

        let mut delta = grad_out.to_vec();
        for l in (0..layers).rev() {
            let (inputs, outputs) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let a = &trace.acts[l];
            let w = &self.params[off..off + inputs * outputs];
            let mut grad_in = vec![0.0; inputs];
            {
                let (gw, gb) = grad[off..off + inputs * outputs + outputs].split_at_mut(inputs * outputs);
                for o in 0..outputs {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let row = &w[o * inputs..(o + 1) * inputs];
                    let grow = &mut gw[o * inputs..(o + 1) * inputs];
                    for i in 0..inputs {
                        grow[i] += d * a[i];
                        grad_in[i] += d * row[i];
                    }
                }
            }
            if l > 0 {
                // a = tanh(z) so da/dz = 1 - a^2
                for (g, ai) in grad_in.iter_mut().zip(a) {
                    *g *= 1.0 - ai * ai;
                }
            }
            delta = grad_in;
        }
        delta
    }

    pub fn to_layers(&self) -> Vec<LayerData> {
        let mut out = Vec::new();
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            let (inputs, outputs) = (w[0], w[1]);
            out.push(LayerData {
                inputs,
                outputs,
                weights: self.params[offset..offset + inputs * outputs].to_vec(),
                bias: self.params[offset + inputs * outputs..offset + inputs * outputs + outputs].to_vec(),
            });
            offset += inputs * outputs + outputs;
        }
        out
    }

    pub fn from_layers(layers: &[LayerData]) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::InvalidConfig("network has no layers".into()));
        };
        let mut sizes = vec![first.inputs];
        let mut params = Vec::new();
        for layer in layers {
            if layer.inputs != *sizes.last().expect("nonempty") {
                return Err(Error::ShapeMismatch {
                    expected: *sizes.last().expect("nonempty"),
                    found: layer.inputs,
                });
            }
            if layer.weights.len() != layer.inputs * layer.outputs {
                return Err(Error::ShapeMismatch {
                    expected: layer.inputs * layer.outputs,
                    found: layer.weights.len(),
                });
            }
            if layer.bias.len() != layer.outputs {
                return Err(Error::ShapeMismatch {
                    expected: layer.outputs,
                    found: layer.bias.len(),
                });
            }
            sizes.push(layer.outputs);
            params.extend_from_slice(&layer.weights);
            params.extend_from_slice(&layer.bias);
        }
        let mut net = Self::zeros(&sizes)?;
        net.params = params;
        Ok(net)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One descent step on `params` along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powf(self.t as f64);
        let c2 = 1.0 - self.beta2.powf(self.t as f64);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}
