//! Monte Carlo reliability estimation through the surrogate or the true
//! limit state.
//!
//! Samples are drawn in fixed-size batches, batch `b` from its own
//! substream `(seed, b)`, so results do not depend on thread scheduling.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mathcore::{Matrix, RandomSource};
use crate::problem::{InputSpec, LimitStateExpr};
use crate::semisup::Pipeline;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsConfig {
    pub sample_count: u64,
    #[serde(default = "default_batch_size")]
    pub batch_size: u64,
    pub seed: u64,
}

fn default_batch_size() -> u64 {
    4096
}

impl McsConfig {
    pub fn new(sample_count: u64, seed: u64) -> Self {
        McsConfig {
            sample_count,
            batch_size: default_batch_size(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(Error::config("mcs.sample_count", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("mcs.batch_size", "must be positive"));
        }
        Ok(())
    }

    pub fn batch_count(&self) -> u64 {
        self.sample_count.div_ceil(self.batch_size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub sample_count: u64,
    pub failure_count: u64,
    pub reliability: f64,
    pub failure_probability: f64,
    pub mc_standard_error: f64,
    pub seed: u64,
    pub config_hash: String,
}

impl ReliabilityReport {
    fn from_counts(sample_count: u64, failure_count: u64, seed: u64, config_hash: String) -> Self {
        let pf = failure_count as f64 / sample_count as f64;
        let r = 1.0 - pf;
        ReliabilityReport {
            sample_count,
            failure_count,
            reliability: r,
            failure_probability: pf,
            mc_standard_error: (r * (1.0 - r) / sample_count as f64).sqrt(),
            seed,
            config_hash,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// `true` when the response indicates failure (strictly negative).
pub fn classify_sample(y: f64) -> bool {
    y < 0.0
}

/// Hex SHA-256 of the JSON form of the MCS settings and input model.
pub fn config_hash(cfg: &McsConfig, spec: &InputSpec, model: &str) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    h.update(serde_json::to_vec(spec).expect("spec serializes"));
    h.update(model.as_bytes());
    hex::encode(h.finalize())
}

fn count_failures<F>(predict: F, spec: &InputSpec, cfg: &McsConfig) -> Result<u64>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let counts: Vec<Result<u64>> = (0..cfg.batch_count())
        .into_par_iter()
        .map(|b| {
            let mut rng = RandomSource::substream(cfg.seed, b);
            let size = cfg.batch_size.min(cfg.sample_count - b * cfg.batch_size);
            let mut x = vec![0.0; spec.dimension()];
            let mut failures = 0;
            for _ in 0..size {
                spec.sample_into(&mut rng, &mut x);
                let y = predict(&x)?;
                if !y.is_finite() {
                    return Err(Error::NonFinitePrediction);
                }
                failures += classify_sample(y) as u64;
            }
            Ok(failures)
        })
        .collect();
    counts.into_iter().sum()
}

/// The first `count` Monte Carlo samples in the order the estimators draw them.
pub fn draw_mcs_samples(spec: &InputSpec, cfg: &McsConfig, count: u64) -> Result<Matrix> {
    cfg.validate()?;
    let count = count.min(cfg.sample_count);
    let mut out = Matrix::zeros(count as usize, spec.dimension());
    let mut row = 0;
    for b in 0..cfg.batch_count() {
        let mut rng = RandomSource::substream(cfg.seed, b);
        for _ in 0..cfg.batch_size {
            if row == count as usize {
                return Ok(out);
            }
            spec.sample_into(&mut rng, out.row_mut(row));
            row += 1;
        }
    }
    Ok(out)
}

/// Reliability estimated through the trained surrogate `GP(DFN(x))`.
pub fn estimate_reliability(
    pipeline: &Pipeline,
    spec: &InputSpec,
    cfg: &McsConfig,
) -> Result<ReliabilityReport> {
    if spec.dimension() != pipeline.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: pipeline.input_dim(),
            actual: spec.dimension(),
        });
    }
    let failures = count_failures(|x| pipeline.predict(x), spec, cfg)?;
    let hash = config_hash(cfg, spec, "surrogate");
    Ok(ReliabilityReport::from_counts(
        cfg.sample_count,
        failures,
        cfg.seed,
        hash,
    ))
}

/// Reference reliability from the limit-state expression itself.
pub fn oracle_reliability(
    expr: &LimitStateExpr,
    spec: &InputSpec,
    cfg: &McsConfig,
) -> Result<ReliabilityReport> {
    if spec.dimension() != expr.dimension() {
        return Err(Error::DimensionMismatch {
            expected: expr.dimension(),
            actual: spec.dimension(),
        });
    }
    let failures = count_failures(|x| expr.eval(x), spec, cfg)?;
    let hash = config_hash(cfg, spec, expr.source());
    Ok(ReliabilityReport::from_counts(
        cfg.sample_count,
        failures,
        cfg.seed,
        hash,
    ))
}

/// Writes estimated latents with predicted responses and classes, one row
/// per input. With `truth`, also the true response, its class and the
/// autoencoder latents of `[x | y_true]`. Classes are 1 for failure, 0 otherwise.
pub fn export_latent_scatter(
    pipeline: &Pipeline,
    inputs: &Matrix,
    truth: Option<&LimitStateExpr>,
    w: &mut impl Write,
) -> Result<()> {
    let nz = pipeline.latent_dim();
    let theta: Vec<String> = (1..=nz).map(|k| format!("theta{k}")).collect();
    let mut header = theta.join(",") + ",pred_y,pred_class";
    if truth.is_some() {
        header.push_str(",true_y,true_class,");
        let true_theta: Vec<String> = (1..=nz).map(|k| format!("true_theta{k}")).collect();
        header.push_str(&true_theta.join(","));
    }
    writeln!(w, "{header}")?;
    let join = |v: &[f64]| {
        v.iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    for x in inputs.row_iter() {
        let est = pipeline.dfn.forward(x)?;
        let pred = pipeline.gp.predict_mean(&est)?;
        write!(w, "{},{pred},{}", join(&est), classify_sample(pred) as u8)?;
        if let Some(expr) = truth {
            let y = expr.eval(x)?;
            let row = Matrix::from_vec(1, x.len(), x.to_vec())?;
            let lat = pipeline.autoencoder.encode_with_responses(&row, &[y])?;
            write!(w, ",{y},{},{}", classify_sample(y) as u8, join(lat.row(0)))?;
        }
        writeln!(w)?;
    }
    Ok(())
}
