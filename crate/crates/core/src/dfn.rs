//! Deep feedforward network from raw inputs to estimated latent variables.
//!
//! The DFN never sees gradients; it is evolved as a flat [`Genome`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathcore::{ColumnScaler, Matrix};
use crate::network::{param_count, Activation, Mlp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfnArchitecture {
    /// `[nr, h₁, …, nz]`.
    pub layer_dims: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl DfnArchitecture {
    pub fn new(input_dim: usize, hidden: &[usize], latent_dim: usize) -> Self {
        let mut layer_dims = vec![input_dim];
        layer_dims.extend_from_slice(hidden);
        layer_dims.push(latent_dim);
        DfnArchitecture {
            layer_dims,
            hidden_activation: Activation::Sigmoid,
            output_activation: Activation::Sigmoid,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn latent_dim(&self) -> usize {
        self.layer_dims[self.layer_dims.len() - 1]
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.layer_dims)
    }

    fn activations(&self) -> Vec<Activation> {
        let layers = self.layer_dims.len() - 1;
        (0..layers)
            .map(|k| {
                if k + 1 == layers {
                    self.output_activation
                } else {
                    self.hidden_activation
                }
            })
            .collect()
    }
}

/// Flat parameter vector: per layer, the row-major weights then the biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Genome(pub Vec<f64>);

impl Genome {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn genes(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfnNet {
    arch: DfnArchitecture,
    net: Mlp,
    scaler: ColumnScaler,
}

pub fn genome_decode(g: &Genome, arch: &DfnArchitecture, scaler: ColumnScaler) -> Result<DfnNet> {
    if g.len() != arch.param_count() {
        return Err(Error::LengthMismatch {
            expected: arch.param_count(),
            actual: g.len(),
        });
    }
    if scaler.dim() != arch.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "input scaler covers {} columns, architecture expects {}",
            scaler.dim(),
            arch.input_dim()
        )));
    }
    let net = Mlp::from_params(&arch.layer_dims, &arch.activations(), &g.0)?;
    Ok(DfnNet {
        arch: arch.clone(),
        net,
        scaler,
    })
}

pub fn genome_encode(net: &DfnNet) -> Genome {
    Genome(net.net.params())
}

impl DfnNet {
    pub fn architecture(&self) -> &DfnArchitecture {
        &self.arch
    }

    pub fn scaler(&self) -> &ColumnScaler {
        &self.scaler
    }

    /// The underlying network, which expects inputs already scaled.
    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim()
    }

    /// Latent estimate `θ^e` for one unscaled input row.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "DFN expects {} inputs, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let mut scaled = vec![0.0; x.len()];
        self.scaler.apply_row_into(x, &mut scaled);
        self.net.forward(&scaled)
    }

    pub fn forward_batch(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "DFN expects {} inputs, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let mut out = Matrix::zeros(x.rows(), self.latent_dim());
        let mut scaled = vec![0.0; x.cols()];
        for (r, row) in x.row_iter().enumerate() {
            self.scaler.apply_row_into(row, &mut scaled);
            out.row_mut(r).copy_from_slice(&self.net.forward(&scaled)?);
        }
        Ok(out)
    }
}

pub fn dfn_forward(net: &DfnNet, x: &[f64]) -> Result<Vec<f64>> {
    net.forward(x)
}
