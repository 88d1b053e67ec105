//! Dense feed-forward networks with a flat parameter buffer.
//!
//! Layer `l` occupies `out × in` row-major weights followed by `out` biases.
//! Gradient buffers share that layout, which keeps optimizers, gradient
//! checks, and serialization oblivious to layer structure.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Linear => 0,
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Activation::Linear),
            1 => Ok(Activation::Relu),
            2 => Ok(Activation::Sigmoid),
            other => Err(Error::Unsupported {
                what: "activation code",
                value: other as u32,
            }),
        }
    }

    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    #[inline]
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Linear => "linear",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        })
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(Activation::Linear),
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::Parse(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    activations: Vec<Activation>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer values recorded by [`Mlp::forward_traced`] for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `layer_inputs[l]` is the input to layer `l`; the final entry is the
    /// network output.
    layer_inputs: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.layer_inputs.last().expect("trace has an output")
    }

    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre_activations
    }
}

impl Mlp {
    /// All-zero network with per-layer activations.
    pub fn zeros(dims: &[usize], activations: &[Activation]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidParameter(
                "a network needs at least an input and an output dimension".into(),
            ));
        }
        if let Some(pos) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidParameter(format!("layer width {pos} is zero")));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::DimensionMismatch {
                expected: dims.len() - 1,
                actual: activations.len(),
            });
        }
        let mut offsets = Vec::with_capacity(dims.len());
        let mut total = 0usize;
        for w in dims.windows(2) {
            offsets.push(total);
            total = w[1]
                .checked_mul(w[0] + 1)
                .and_then(|n| n.checked_add(total))
                .ok_or(Error::DimensionOverflow)?;
        }
        offsets.push(total);
        Ok(Self {
            dims: dims.to_vec(),
            activations: activations.to_vec(),
            offsets,
            params: vec![0.0; total],
        })
    }

    /// ReLU on hidden layers, `output` on the last.
    pub fn relu_zeros(dims: &[usize], output: Activation) -> Result<Self> {
        let n = dims.len().saturating_sub(1);
        let mut acts = vec![Activation::Relu; n];
        if let Some(last) = acts.last_mut() {
            *last = output;
        }
        Self::zeros(dims, &acts)
    }

    /// Network with He-uniform weights and zero biases.
    pub fn he_uniform<R: Rng + ?Sized>(
        dims: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(dims, activations)?;
        for l in 0..net.layer_count() {
            let bound = (6.0 / net.dims[l] as f64).sqrt();
            for w in net.weights_mut(l) {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn from_params(dims: &[usize], activations: &[Activation], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(dims, activations)?;
        if params.len() != net.params.len() {
            return Err(Error::DimensionMismatch {
                expected: net.params.len(),
                actual: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn layer_count(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
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

    /// Range of layer `l`'s weights inside the flat buffer.
    pub fn weight_range(&self, l: usize) -> std::ops::Range<usize> {
        let start = self.offsets[l];
        start..start + self.dims[l] * self.dims[l + 1]
    }

    pub fn bias_range(&self, l: usize) -> std::ops::Range<usize> {
        let start = self.offsets[l] + self.dims[l] * self.dims[l + 1];
        start..start + self.dims[l + 1]
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        &self.params[self.weight_range(l)]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        let r = self.weight_range(l);
        &mut self.params[r]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        &self.params[self.bias_range(l)]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [f64] {
        let r = self.bias_range(l);
        &mut self.params[r]
    }

    /// Zeroed buffer laid out like the parameters.
    pub fn zero_grad(&self) -> Vec<f64> {
        vec![0.0; self.params.len()]
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn affine(&self, l: usize, x: &[f64]) -> Vec<f64> {
        let w = self.weights(l);
        let n_in = self.dims[l];
        self.bias(l)
            .iter()
            .zip(w.chunks_exact(n_in))
            .map(|(b, row)| b + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut h = x.to_vec();
        for l in 0..self.layer_count() {
            let act = self.activations[l];
            h = self.affine(l, &h).into_iter().map(|z| act.apply(z)).collect();
        }
        Ok(h)
    }

    pub fn forward_traced(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut layer_inputs = Vec::with_capacity(self.dims.len());
        let mut pre_activations = Vec::with_capacity(self.layer_count());
        layer_inputs.push(x.to_vec());
        for l in 0..self.layer_count() {
            let z = self.affine(l, &layer_inputs[l]);
            let act = self.activations[l];
            layer_inputs.push(z.iter().map(|&v| act.apply(v)).collect());
            pre_activations.push(z);
        }
        Ok(Trace {
            layer_inputs,
            pre_activations,
        })
    }

    /// Backpropagates `d_output` (∂loss/∂output) through a recorded trace.
    ///
    /// Parameter gradients are added into `grads`; the gradient with respect
    /// to the network input is returned.
    pub fn backward(&self, trace: &Trace, d_output: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        if d_output.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                actual: d_output.len(),
            });
        }
        if grads.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                actual: grads.len(),
            });
        }
        let mut delta = d_output.to_vec();
        for l in (0..self.layer_count()).rev() {
            let act = self.activations[l];
            let z = &trace.pre_activations[l];
            let y = &trace.layer_inputs[l + 1];
            for ((d, &zv), &yv) in delta.iter_mut().zip(z).zip(y) {
                *d *= act.derivative(zv, yv);
            }
            let x = &trace.layer_inputs[l];
            let n_in = self.dims[l];
            let wr = self.weight_range(l);
            let br = self.bias_range(l);
            for (row, &d) in grads[wr].chunks_exact_mut(n_in).zip(&delta) {
                if d != 0.0 {
                    row.iter_mut().zip(x).for_each(|(g, &xv)| *g += d * xv);
                }
            }
            grads[br].iter_mut().zip(&delta).for_each(|(g, &d)| *g += d);

            let w = self.weights(l);
            let mut prev = vec![0.0; n_in];
            for (row, &d) in w.chunks_exact(n_in).zip(&delta) {
                if d != 0.0 {
                    prev.iter_mut().zip(row).for_each(|(p, &wv)| *p += d * wv);
                }
            }
            delta = prev;
        }
        Ok(delta)
    }

    /// Smallest |pre-activation| over ReLU layers for input `x`, or infinity
    /// when the network has no ReLU layer.
    pub fn min_relu_margin(&self, x: &[f64]) -> Result<f64> {
        let trace = self.forward_traced(x)?;
        Ok(trace
            .pre_activations
            .iter()
            .zip(&self.activations)
            .filter(|(_, a)| **a == Activation::Relu)
            .flat_map(|(z, _)| z.iter().map(|v| v.abs()))
            .fold(f64::INFINITY, f64::min))
    }

    /// Splits into the layers before and after dimension index `at`
    /// (`0 < at < dims.len() - 1`), so `dims[at]` becomes the shared width.
    pub fn split_at(&self, at: usize) -> Result<(Mlp, Mlp)> {
        if at == 0 || at >= self.dims.len() - 1 {
            return Err(Error::InvalidParameter(format!(
                "cannot split a {}-layer network at dimension index {at}",
                self.layer_count()
            )));
        }
        let cut = self.offsets[at];
        let head = Mlp::from_params(
            &self.dims[..=at],
            &self.activations[..at],
            self.params[..cut].to_vec(),
        )?;
        let tail = Mlp::from_params(
            &self.dims[at..],
            &self.activations[at..],
            self.params[cut..].to_vec(),
        )?;
        Ok((head, tail))
    }

    pub fn describe(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        format!("mlp:{}", dims.join("-"))
    }
}
