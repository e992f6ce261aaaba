//! Fused-data autoencoder.
//!
//! Each labeled sample is fused with its response into one row
//! `[x_1 … x_nr, y]`, every column is min-max scaled into
//! [`NETWORK_RANGE`], and a sigmoid encoder/decoder pair is trained by
//! full-batch backpropagation with Adam to reproduce the rows. After
//! training the encoder is the latent map `(x, y) ↦ θ` used by the rest of
//! the pipeline; the decoder only matters for the training loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathcore::{ColumnScaler, Matrix, RandomSource, NETWORK_RANGE};
pub use crate::network::sigmoid;
use crate::network::{Activation, Mlp};
use crate::problem::LabeledDataset;

/// The scaled `n × (nr + 1)` training matrix plus the scaler that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedMatrix {
    data: Matrix,
    scaler: ColumnScaler,
}

impl FusedMatrix {
    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn scaler(&self) -> &ColumnScaler {
        &self.scaler
    }

    pub fn rows(&self) -> usize {
        self.data.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.data.cols() - 1
    }
}

pub fn fuse_dataset(ds: &LabeledDataset) -> Result<FusedMatrix> {
    if ds.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "autoencoder needs at least 2 labeled samples, got {}",
            ds.len()
        )));
    }
    let raw = ds.inputs().with_column(ds.responses())?;
    let scaler = ColumnScaler::fit(&raw, NETWORK_RANGE)?;
    let data = scaler.apply(&raw)?;
    Ok(FusedMatrix { data, scaler })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moment accumulators for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        AdamState {
            config,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), self.m.len());
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step += 1;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderConfig {
    /// Encoder hidden widths; the decoder mirrors them.
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
    pub adam: AdamConfig,
    pub max_epochs: usize,
    /// Early stop once the loss improved by less than `min_improvement`
    /// over the last `patience` epochs.
    pub patience: usize,
    pub min_improvement: f64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            hidden: vec![12],
            latent_dim: 2,
            adam: AdamConfig::default(),
            max_epochs: 5000,
            patience: 200,
            min_improvement: 1e-7,
        }
    }
}

impl AutoencoderConfig {
    /// `[nr+1, hidden…, nz, hidden reversed…, nr+1]`.
    pub fn layer_dims(&self, fused_width: usize) -> Vec<usize> {
        let mut dims = vec![fused_width];
        dims.extend(&self.hidden);
        dims.push(self.latent_dim);
        dims.extend(self.hidden.iter().rev());
        dims.push(fused_width);
        dims
    }
}

/// Trained encoder/decoder stack. Layers `0..latent_layer` form the encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderNet {
    net: Mlp,
    latent_layer: usize,
    scaler: ColumnScaler,
}

impl AutoencoderNet {
    pub fn new(net: Mlp, latent_layer: usize, scaler: ColumnScaler) -> Result<Self> {
        let dims = net.dims();
        let width = dims[0];
        if latent_layer == 0 || latent_layer >= dims.len() - 1 {
            return Err(Error::ShapeMismatch(format!(
                "latent layer {latent_layer} out of range for dims {dims:?}"
            )));
        }
        if dims[dims.len() - 1] != width || scaler.dim() != width {
            return Err(Error::ShapeMismatch(format!(
                "autoencoder dims {dims:?} do not reconstruct a {}-column input",
                scaler.dim()
            )));
        }
        if dims[latent_layer] >= width {
            return Err(Error::ShapeMismatch(format!(
                "latent width {} must be below input width {width}",
                dims[latent_layer]
            )));
        }
        Ok(AutoencoderNet {
            net,
            latent_layer,
            scaler,
        })
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        self.net.dims()
    }

    pub fn latent_layer(&self) -> usize {
        self.latent_layer
    }

    pub fn total_layers(&self) -> usize {
        self.net.layers().len()
    }

    pub fn latent_dim(&self) -> usize {
        self.net.dims()[self.latent_layer]
    }

    /// Width of the fused row, `nr + 1`.
    pub fn fused_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.fused_dim() - 1
    }

    pub fn scaler(&self) -> &ColumnScaler {
        &self.scaler
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    /// Latent vector for an already scaled fused row.
    pub fn encoder_forward(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.net.forward_range(0..self.latent_layer, row)
    }

    /// Scaled reconstruction from a latent vector.
    pub fn decoder_forward(&self, latent: &[f64]) -> Result<Vec<f64>> {
        self.net
            .forward_range(self.latent_layer..self.total_layers(), latent)
    }

    /// Encodes unscaled fused rows `[x | y]`.
    pub fn encode_latent(&self, rows: &Matrix) -> Result<Matrix> {
        if rows.cols() != self.fused_dim() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} fused columns, got {}",
                self.fused_dim(),
                rows.cols()
            )));
        }
        let nz = self.latent_dim();
        let mut out = Matrix::zeros(rows.rows(), nz);
        let mut scaled = vec![0.0; self.fused_dim()];
        for (r, row) in rows.row_iter().enumerate() {
            self.scaler.apply_row_into(row, &mut scaled);
            out.row_mut(r)
                .copy_from_slice(&self.encoder_forward(&scaled)?);
        }
        Ok(out)
    }

    /// Encodes inputs paired with (possibly predicted) responses.
    pub fn encode_with_responses(&self, inputs: &Matrix, responses: &[f64]) -> Result<Matrix> {
        if inputs.rows() != responses.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} input rows but {} responses",
                inputs.rows(),
                responses.len()
            )));
        }
        if inputs.cols() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} input columns, got {}",
                self.input_dim(),
                inputs.cols()
            )));
        }
        let nz = self.latent_dim();
        let mut out = Matrix::zeros(inputs.rows(), nz);
        let mut scaled = vec![0.0; self.fused_dim()];
        let y_col = self.input_dim();
        for (r, (row, &y)) in inputs.row_iter().zip(responses).enumerate() {
            self.scaler.apply_row_into(row, &mut scaled[..y_col]);
            scaled[y_col] = self.scaler.apply_value(y_col, y);
            out.row_mut(r)
                .copy_from_slice(&self.encoder_forward(&scaled)?);
        }
        Ok(out)
    }
}

/// Mean over rows of the squared reconstruction error `‖d − D′‖²`.
pub fn reconstruction_loss(net: &AutoencoderNet, d: &FusedMatrix) -> Result<f64> {
    net.net.mean_squared_error(&d.data, &d.data)
}

/// Loss and backpropagated gradient with respect to the flat parameters.
pub fn reconstruction_gradient(net: &AutoencoderNet, d: &FusedMatrix) -> Result<(f64, Vec<f64>)> {
    net.net.mse_gradient(&d.data, &d.data)
}

/// Output of [`train_autoencoder`]: the frozen network and its per-epoch loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedAutoencoder {
    pub net: AutoencoderNet,
    pub loss_trace: Vec<f64>,
}

pub fn train_autoencoder(
    d: &FusedMatrix,
    config: &AutoencoderConfig,
    rng: &mut RandomSource,
) -> Result<TrainedAutoencoder> {
    if config.max_epochs == 0 {
        return Err(Error::config(
            "autoencoder.max_epochs",
            "must be at least 1",
        ));
    }
    let width = d.data.cols();
    if config.latent_dim == 0 || config.latent_dim >= width {
        return Err(Error::config(
            "autoencoder.latent_dim",
            format!("must be in 1..{width}, got {}", config.latent_dim),
        ));
    }
    let dims = config.layer_dims(width);
    let acts = vec![Activation::Sigmoid; dims.len() - 1];
    let mlp = Mlp::glorot(&dims, &acts, rng)?;
    let mut net = AutoencoderNet::new(mlp, config.hidden.len() + 1, d.scaler.clone())?;

    let mut params = net.net.params();
    let mut adam = AdamState::new(config.adam, params.len());
    let mut trace = Vec::with_capacity(config.max_epochs);
    for epoch in 0..config.max_epochs {
        let (loss, grad) = reconstruction_gradient(&net, d)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::DivergenceDetected(format!(
                "autoencoder loss became non-finite at epoch {epoch}"
            )));
        }
        trace.push(loss);
        if config.patience > 0 && epoch >= config.patience {
            let improvement = trace[epoch - config.patience] - loss;
            if improvement < config.min_improvement {
                break;
            }
        }
        adam.update(&mut params, &grad);
        net.net.set_params(&params)?;
    }
    Ok(TrainedAutoencoder {
        net,
        loss_trace: trace,
    })
}
