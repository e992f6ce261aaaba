//! Fully connected layer stacks shared by the autoencoder and the DFN.
//!
//! Parameters flatten layer by layer: the weight matrix (row-major,
//! `out × in`) followed by the bias vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathcore::{Matrix, RandomSource};

/// Logistic sigmoid `1 / (1 + e^(-z))`, evaluated without overflow for any finite `z`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `a`.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    weights: Matrix,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::ShapeMismatch(format!(
                "bias length {} does not match {} output units",
                bias.len(),
                weights.rows()
            )));
        }
        Ok(DenseLayer {
            weights,
            bias,
            activation,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn param_count(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.len()
    }

    /// `out[k] = f(Σ_j W[k][j]·input[j] + b[k])`.
    #[inline]
    pub fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .row_iter()
                .zip(&self.bias)
                .map(|(w, b)| self.activation.apply(crate::mathcore::dot(w, input) + b)),
        );
    }
}

/// An ordered stack of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::ShapeMismatch(
                "network needs at least one layer".into(),
            ));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::ShapeMismatch(format!(
                    "layer widths do not chain: {} -> {}",
                    pair[0].outputs(),
                    pair[1].inputs()
                )));
            }
        }
        Ok(Mlp { layers })
    }

    /// Glorot-uniform weights in `±√(6/(fan_in+fan_out))`, zero biases.
    pub fn glorot(
        dims: &[usize],
        activations: &[Activation],
        rng: &mut RandomSource,
    ) -> Result<Self> {
        check_dims(dims, activations)?;
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(d, &act)| {
                let (fan_in, fan_out) = (d[0], d[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let w: Vec<f64> = (0..fan_in * fan_out)
                    .map(|_| rng.uniform_range(-limit, limit))
                    .collect();
                DenseLayer::new(
                    Matrix::from_vec(fan_out, fan_in, w)?,
                    vec![0.0; fan_out],
                    act,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Mlp::new(layers)
    }

    /// Rebuilds a network from a flat parameter vector.
    pub fn from_params(dims: &[usize], activations: &[Activation], params: &[f64]) -> Result<Self> {
        check_dims(dims, activations)?;
        let expected = param_count(dims);
        if params.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: params.len(),
            });
        }
        let mut offset = 0;
        let mut layers = Vec::with_capacity(activations.len());
        for (d, &act) in dims.windows(2).zip(activations) {
            let (fan_in, fan_out) = (d[0], d[1]);
            let w = params[offset..offset + fan_in * fan_out].to_vec();
            offset += fan_in * fan_out;
            let b = params[offset..offset + fan_out].to_vec();
            offset += fan_out;
            layers.push(DenseLayer::new(
                Matrix::from_vec(fan_out, fan_in, w)?,
                b,
                act,
            )?);
        }
        Mlp::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].inputs()];
        d.extend(self.layers.iter().map(|l| l.outputs()));
        d
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                expected: self.param_count(),
                actual: params.len(),
            });
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.rows() * l.weights.cols();
            l.weights
                .as_mut_slice()
                .copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    /// Runs layers `range` on `input`.
    pub fn forward_range(&self, range: std::ops::Range<usize>, input: &[f64]) -> Result<Vec<f64>> {
        let first = &self.layers[range.start];
        if input.len() != first.inputs() {
            return Err(Error::ShapeMismatch(format!(
                "expected input of length {}, got {}",
                first.inputs(),
                input.len()
            )));
        }
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        for l in &self.layers[range] {
            l.forward_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward_range(0..self.layers.len(), input)
    }

    /// Mean over rows of `‖target − f(input)‖²`.
    pub fn mean_squared_error(&self, inputs: &Matrix, targets: &Matrix) -> Result<f64> {
        check_batch(self, inputs, targets)?;
        if inputs.rows() == 0 {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for (x, t) in inputs.row_iter().zip(targets.row_iter()) {
            let y = self.forward(x)?;
            total += crate::mathcore::squared_distance(&y, t);
        }
        Ok(total / inputs.rows() as f64)
    }

    /// Loss of [`Mlp::mean_squared_error`] and its gradient with respect to
    /// the flat parameter vector, by backpropagation.
    pub fn mse_gradient(&self, inputs: &Matrix, targets: &Matrix) -> Result<(f64, Vec<f64>)> {
        check_batch(self, inputs, targets)?;
        let n = inputs.rows();
        let mut grad = vec![0.0; self.param_count()];
        if n == 0 {
            return Ok((0.0, grad));
        }
        let offsets = self.param_offsets();
        let scale = 1.0 / n as f64;
        let mut total = 0.0;
        let mut acts: Vec<Vec<f64>> = vec![Vec::new(); self.layers.len() + 1];
        for (x, t) in inputs.row_iter().zip(targets.row_iter()) {
            acts[0].clear();
            acts[0].extend_from_slice(x);
            for (k, l) in self.layers.iter().enumerate() {
                let (head, tail) = acts.split_at_mut(k + 1);
                l.forward_into(&head[k], &mut tail[0]);
            }
            let out = &acts[self.layers.len()];
            total += crate::mathcore::squared_distance(out, t);
            // dL/da at the output, then back through each layer
            let mut delta: Vec<f64> = out
                .iter()
                .zip(t)
                .map(|(a, y)| 2.0 * (a - y) * scale)
                .collect();
            for k in (0..self.layers.len()).rev() {
                let l = &self.layers[k];
                let a_out = &acts[k + 1];
                let a_in = &acts[k];
                for (d, &a) in delta.iter_mut().zip(a_out) {
                    *d *= l.activation.derivative_from_output(a);
                }
                let (w_off, b_off) = offsets[k];
                let fan_in = l.inputs();
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let g = &mut grad[w_off + o * fan_in..w_off + (o + 1) * fan_in];
                    for (gi, &ai) in g.iter_mut().zip(a_in) {
                        *gi += d * ai;
                    }
                    grad[b_off + o] += d;
                }
                if k > 0 {
                    let mut prev = vec![0.0; fan_in];
                    for (o, &d) in delta.iter().enumerate() {
                        for (p, &w) in prev.iter_mut().zip(l.weights.row(o)) {
                            *p += w * d;
                        }
                    }
                    delta = prev;
                }
            }
        }
        Ok((total * scale, grad))
    }

    /// `(weight offset, bias offset)` of each layer in the flat vector.
    fn param_offsets(&self) -> Vec<(usize, usize)> {
        let mut offset = 0;
        self.layers
            .iter()
            .map(|l| {
                let w = offset;
                offset += l.inputs() * l.outputs();
                let b = offset;
                offset += l.outputs();
                (w, b)
            })
            .collect()
    }
}

pub fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|d| d[0] * d[1] + d[1]).sum()
}

fn check_dims(dims: &[usize], activations: &[Activation]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::ShapeMismatch(format!("invalid layer dims {dims:?}")));
    }
    if activations.len() != dims.len() - 1 {
        return Err(Error::ShapeMismatch(format!(
            "{} activations for {} layers",
            activations.len(),
            dims.len() - 1
        )));
    }
    Ok(())
}

fn check_batch(net: &Mlp, inputs: &Matrix, targets: &Matrix) -> Result<()> {
    if inputs.cols() != net.input_dim()
        || targets.cols() != net.output_dim()
        || inputs.rows() != targets.rows()
    {
        return Err(Error::ShapeMismatch(format!(
            "batch {}x{} -> {}x{} does not fit network {:?}",
            inputs.rows(),
            inputs.cols(),
            targets.rows(),
            targets.cols(),
            net.dims()
        )));
    }
    Ok(())
}
