//! Semi-supervised DFN training and the end-to-end pipeline.
//!
//! Training runs in three stages: the autoencoder is fit on the fused
//! labeled data, the GP is fit on the resulting latent codes, and both are
//! then frozen while an evolutionary algorithm searches DFN weights against
//!
//! ```text
//! α_w · MSE(θ_t, DFN(X_t)) + β_w · mean_i ‖θ_u^i − θ_u^e‖
//! ```
//!
//! where `θ_u^e = DFN(X_u)` and `θ_u^i = encoder([X_u | GP(θ_u^e)])`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{fuse_dataset, train_autoencoder, AutoencoderConfig, AutoencoderNet};
use crate::dfn::{genome_decode, DfnArchitecture, DfnNet, Genome};
use crate::error::{Error, Result};
use crate::gpmodel::{fit_gp_with_report, GpFitConfig, GpFitReport, GpModel};
use crate::mathcore::{derive_seed, squared_distance, Matrix, RandomSource};
use crate::problem::{
    build_labeled_dataset, build_unlabeled_dataset, InputSpec, LabeledDataset, LimitStateExpr,
    UnlabeledDataset,
};

/// Stream indices used to split the master seed between stages.
pub mod stage {
    pub const LABELED_DATA: u64 = 0;
    pub const UNLABELED_DATA: u64 = 1;
    pub const AUTOENCODER: u64 = 2;
    pub const EVOLUTION: u64 = 3;
    pub const MONTE_CARLO: u64 = 4;
    pub const ORACLE: u64 = 5;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EaConfig {
    pub population_size: usize,
    pub elite_count: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub mutation_std: f64,
    pub max_generations: usize,
    pub stall_window: usize,
    pub stall_tolerance: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for EaConfig {
    fn default() -> Self {
        EaConfig {
            population_size: 60,
            elite_count: 2,
            tournament_size: 3,
            crossover_rate: 0.5,
            mutation_rate: 0.1,
            mutation_std: 0.1,
            max_generations: 500,
            stall_window: 50,
            stall_tolerance: 1e-5,
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

impl EaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::config(format!("ea.{field}"), msg));
        if self.population_size < 2 {
            return bad("population_size", "must be at least 2");
        }
        if self.elite_count >= self.population_size {
            return bad("elite_count", "must be below population_size");
        }
        if self.tournament_size == 0 {
            return bad("tournament_size", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return bad("crossover_rate", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("mutation_rate", "must lie in [0, 1]");
        }
        if !(self.mutation_std > 0.0) {
            return bad("mutation_std", "must be positive");
        }
        if self.max_generations == 0 {
            return bad("max_generations", "must be at least 1");
        }
        if self.stall_window == 0 {
            return bad("stall_window", "must be at least 1");
        }
        if !(self.stall_tolerance > 0.0) {
            return bad("stall_tolerance", "must be positive");
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha + self.beta > 0.0) {
            return bad(
                "alpha",
                "loss weights must be non-negative with a positive sum",
            );
        }
        Ok(())
    }
}

/// Per-generation record of the population.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub best_loss: Vec<f64>,
    pub mean_loss: Vec<f64>,
    /// Labeled MSE of the generation's best genome.
    pub mse_term: Vec<f64>,
    /// Consistency loss of the generation's best genome.
    pub consistency_term: Vec<f64>,
}

impl TrainingTrace {
    pub fn generations(&self) -> usize {
        self.best_loss.len()
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(
            w,
            "generation,best_loss,mean_loss,mse_term,consistency_term"
        )?;
        for g in 0..self.generations() {
            writeln!(
                w,
                "{g},{},{},{},{}",
                self.best_loss[g], self.mean_loss[g], self.mse_term[g], self.consistency_term[g]
            )?;
        }
        Ok(())
    }
}

/// Mean over samples of `‖DFN(x) − θ‖²`.
pub fn labeled_mse(net: &DfnNet, inputs: &Matrix, latents: &Matrix) -> Result<f64> {
    if inputs.rows() != latents.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} inputs but {} latent targets",
            inputs.rows(),
            latents.rows()
        )));
    }
    let estimates = net.forward_batch(inputs)?;
    mean_squared_distance(&estimates, latents)
}

fn mean_squared_distance(a: &Matrix, b: &Matrix) -> Result<f64> {
    check_same_shape(a, b)?;
    if a.rows() == 0 {
        return Ok(0.0);
    }
    let total: f64 = a
        .row_iter()
        .zip(b.row_iter())
        .map(|(x, y)| squared_distance(x, y))
        .sum();
    Ok(total / a.rows() as f64)
}

fn check_same_shape(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

/// Mean Euclidean (not squared) distance between corresponding rows.
pub fn consistency_loss(implied: &Matrix, estimated: &Matrix) -> Result<f64> {
    check_same_shape(implied, estimated)?;
    if implied.rows() == 0 {
        return Ok(0.0);
    }
    let total: f64 = implied
        .row_iter()
        .zip(estimated.row_iter())
        .map(|(a, b)| squared_distance(a, b).sqrt())
        .sum();
    Ok(total / implied.rows() as f64)
}

/// The trained and frozen autoencoder and GP.
#[derive(Debug, Clone, Copy)]
pub struct Components<'a> {
    pub autoencoder: &'a AutoencoderNet,
    pub gp: &'a GpModel,
}

/// `(θ_u^e, θ_u^i)` for unlabeled inputs.
pub fn unlabeled_roundtrip(
    c: Components<'_>,
    net: &DfnNet,
    unlabeled: &Matrix,
) -> Result<(Matrix, Matrix)> {
    let estimated = net.forward_batch(unlabeled)?;
    let predicted = c.gp.predict_mean_batch(&estimated)?;
    let implied = c.autoencoder.encode_with_responses(unlabeled, &predicted)?;
    Ok((estimated, implied))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub mse: f64,
    pub consistency: f64,
}

/// Inputs fixed for a whole EA run, with the network-range scaling applied once.
struct FitnessContext<'a> {
    components: Components<'a>,
    arch: &'a DfnArchitecture,
    labeled_scaled: Matrix,
    labeled_latents: &'a Matrix,
    unlabeled_scaled: Matrix,
    alpha: f64,
    beta: f64,
}

impl<'a> FitnessContext<'a> {
    fn new(
        components: Components<'a>,
        arch: &'a DfnArchitecture,
        labeled_inputs: &Matrix,
        labeled_latents: &'a Matrix,
        unlabeled: &Matrix,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let ae = components.autoencoder;
        let nr = ae.input_dim();
        if arch.input_dim() != nr || arch.latent_dim() != ae.latent_dim() {
            return Err(Error::ShapeMismatch(format!(
                "DFN {:?} does not map {nr} inputs to {} latents",
                arch.layer_dims,
                ae.latent_dim()
            )));
        }
        if components.gp.latent_dim() != ae.latent_dim() {
            return Err(Error::ShapeMismatch(
                "GP and autoencoder latent widths differ".into(),
            ));
        }
        if labeled_inputs.rows() != labeled_latents.rows()
            || labeled_latents.cols() != ae.latent_dim()
        {
            return Err(Error::ShapeMismatch(
                "labeled inputs and latents disagree".into(),
            ));
        }
        if labeled_inputs.cols() != nr || unlabeled.cols() != nr {
            return Err(Error::ShapeMismatch(format!("expected {nr} input columns")));
        }
        let scaler = ae.scaler().prefix(nr);
        Ok(FitnessContext {
            components,
            arch,
            labeled_scaled: scaler.apply(labeled_inputs)?,
            labeled_latents,
            unlabeled_scaled: scaler.apply(unlabeled)?,
            alpha,
            beta,
        })
    }

    fn evaluate(&self, genome: &Genome) -> Result<LossBreakdown> {
        let ae = self.components.autoencoder;
        let gp = self.components.gp;
        let net = genome_decode(genome, self.arch, ae.scaler().prefix(self.arch.input_dim()))?;
        let mlp = net.network();

        let mut mse = 0.0;
        for (x, t) in self
            .labeled_scaled
            .row_iter()
            .zip(self.labeled_latents.row_iter())
        {
            mse += squared_distance(&mlp.forward(x)?, t);
        }
        if self.labeled_scaled.rows() > 0 {
            mse /= self.labeled_scaled.rows() as f64;
        }

        let mut consistency = 0.0;
        let nr = ae.input_dim();
        let mut fused = vec![0.0; nr + 1];
        for x in self.unlabeled_scaled.row_iter() {
            let estimated = mlp.forward(x)?;
            let y = gp.predict_mean(&estimated)?;
            fused[..nr].copy_from_slice(x);
            fused[nr] = ae.scaler().apply_value(nr, y);
            let implied = ae.encoder_forward(&fused)?;
            consistency += squared_distance(&implied, &estimated).sqrt();
        }
        if self.unlabeled_scaled.rows() > 0 {
            consistency /= self.unlabeled_scaled.rows() as f64;
        }
        Ok(LossBreakdown {
            total: self.alpha * mse + self.beta * consistency,
            mse,
            consistency,
        })
    }
}

/// Weighted labeled-MSE plus consistency loss of one genome.
pub fn aggregated_loss(
    genome: &Genome,
    components: Components<'_>,
    arch: &DfnArchitecture,
    labeled_inputs: &Matrix,
    labeled_latents: &Matrix,
    unlabeled: &Matrix,
    alpha: f64,
    beta: f64,
) -> Result<LossBreakdown> {
    FitnessContext::new(
        components,
        arch,
        labeled_inputs,
        labeled_latents,
        unlabeled,
        alpha,
        beta,
    )?
    .evaluate(genome)
}

/// Indices sorted by ascending fitness, ties broken by index.
fn ranking(fitness: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fitness.len()).collect();
    idx.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
    idx
}

fn tournament(fitness: &[f64], size: usize, rng: &mut RandomSource) -> usize {
    let mut best = rng.index(fitness.len());
    for _ in 1..size {
        let c = rng.index(fitness.len());
        if fitness[c] < fitness[best] || (fitness[c] == fitness[best] && c < best) {
            best = c;
        }
    }
    best
}

/// Next population: elites copied unchanged, the rest bred by tournament
/// selection, uniform crossover and Gaussian mutation. Lower fitness is better.
pub fn evolve_generation(
    population: &[Genome],
    fitness: &[f64],
    cfg: &EaConfig,
    rng: &mut RandomSource,
) -> Vec<Genome> {
    assert_eq!(population.len(), fitness.len());
    let order = ranking(fitness);
    let mut next: Vec<Genome> = order
        .iter()
        .take(cfg.elite_count.min(population.len()))
        .map(|&i| population[i].clone())
        .collect();
    while next.len() < population.len() {
        let a = tournament(fitness, cfg.tournament_size, rng);
        let b = tournament(fitness, cfg.tournament_size, rng);
        let mut child = population[a].clone();
        for (gene, &other) in child.0.iter_mut().zip(&population[b].0) {
            if rng.bernoulli(cfg.crossover_rate) {
                *gene = other;
            }
        }
        for gene in child.0.iter_mut() {
            if rng.bernoulli(cfg.mutation_rate) {
                *gene += cfg.mutation_std * rng.standard_normal();
            }
        }
        next.push(child);
    }
    next
}

pub fn random_genome(len: usize, rng: &mut RandomSource) -> Genome {
    Genome((0..len).map(|_| rng.uniform_range(-1.0, 1.0)).collect())
}

/// Evolves DFN weights against the aggregated loss until the best loss
/// stalls (relative improvement below `stall_tolerance` over
/// `stall_window` generations) or `max_generations` is reached.
pub fn train_dfn_ea(
    components: Components<'_>,
    arch: &DfnArchitecture,
    labeled_inputs: &Matrix,
    labeled_latents: &Matrix,
    unlabeled: &Matrix,
    cfg: &EaConfig,
    rng: &mut RandomSource,
) -> Result<(DfnNet, TrainingTrace)> {
    cfg.validate()?;
    let ctx = FitnessContext::new(
        components,
        arch,
        labeled_inputs,
        labeled_latents,
        unlabeled,
        cfg.alpha,
        cfg.beta,
    )?;
    let mut population: Vec<Genome> = (0..cfg.population_size)
        .map(|_| random_genome(arch.param_count(), rng))
        .collect();
    let mut trace = TrainingTrace::default();
    let mut best: Option<(Genome, f64)> = None;

    for generation in 0..cfg.max_generations {
        let losses: Vec<Result<LossBreakdown>> =
            population.par_iter().map(|g| ctx.evaluate(g)).collect();
        let mut breakdowns = Vec::with_capacity(losses.len());
        for l in losses {
            breakdowns.push(l?);
        }
        let fitness: Vec<f64> = breakdowns
            .iter()
            .map(|b| {
                if b.total.is_finite() {
                    b.total
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let finite: Vec<f64> = fitness.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            return Err(Error::DivergenceDetected(format!(
                "every genome has a non-finite loss at generation {generation}"
            )));
        }
        let leader = ranking(&fitness)[0];
        trace.best_loss.push(fitness[leader]);
        trace
            .mean_loss
            .push(finite.iter().sum::<f64>() / finite.len() as f64);
        trace.mse_term.push(breakdowns[leader].mse);
        trace.consistency_term.push(breakdowns[leader].consistency);
        if best.as_ref().is_none_or(|(_, f)| fitness[leader] < *f) {
            best = Some((population[leader].clone(), fitness[leader]));
        }

        if generation >= cfg.stall_window {
            let then = trace.best_loss[generation - cfg.stall_window];
            let now = trace.best_loss[generation];
            if then - now <= cfg.stall_tolerance * then.abs() {
                break;
            }
        }
        if generation + 1 < cfg.max_generations {
            population = evolve_generation(&population, &fitness, cfg, rng);
        }
    }
    let (genome, _) = best.expect("at least one generation is evaluated");
    let net = genome_decode(
        &genome,
        arch,
        components.autoencoder.scaler().prefix(arch.input_dim()),
    )?;
    Ok((net, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub autoencoder: AutoencoderConfig,
    pub gp: GpFitConfig,
    /// DFN hidden widths between the `nr` inputs and the `nz` outputs.
    pub dfn_hidden: Vec<usize>,
    pub ea: EaConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            autoencoder: AutoencoderConfig::default(),
            gp: GpFitConfig::default(),
            dfn_hidden: vec![16, 8],
            ea: EaConfig::default(),
        }
    }
}

/// The frozen surrogate `x ↦ GP(DFN(x))` together with the autoencoder
/// that defines its latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub autoencoder: AutoencoderNet,
    pub gp: GpModel,
    pub dfn: DfnNet,
    pub seed: u64,
}

impl Pipeline {
    pub fn input_dim(&self) -> usize {
        self.autoencoder.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.autoencoder.latent_dim()
    }

    pub fn components(&self) -> Components<'_> {
        Components {
            autoencoder: &self.autoencoder,
            gp: &self.gp,
        }
    }

    /// Predicted response `GP(DFN(x))`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.gp.predict_mean(&self.dfn.forward(x)?)
    }
}

/// Everything produced by a training run.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub pipeline: Pipeline,
    pub autoencoder_trace: Vec<f64>,
    pub gp_report: GpFitReport,
    pub trace: TrainingTrace,
    /// Autoencoder latents of the labeled set.
    pub labeled_latents: Matrix,
}

/// Trains all three stages on given datasets.
pub fn train_pipeline(
    labeled: &LabeledDataset,
    unlabeled: &UnlabeledDataset,
    config: &PipelineConfig,
    seed: u64,
) -> Result<PipelineRun> {
    if unlabeled.dimension() != labeled.dimension() && !unlabeled.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "labeled data has {} inputs, unlabeled data {}",
            labeled.dimension(),
            unlabeled.dimension()
        )));
    }
    let fused = fuse_dataset(labeled)?;
    let mut ae_rng = RandomSource::substream(seed, stage::AUTOENCODER);
    let trained = train_autoencoder(&fused, &config.autoencoder, &mut ae_rng)?;
    let autoencoder = trained.net;

    let latents = autoencoder.encode_with_responses(labeled.inputs(), labeled.responses())?;
    let (gp, gp_report) = fit_gp_with_report(&latents, labeled.responses(), &config.gp)?;

    let arch = DfnArchitecture::new(
        labeled.dimension(),
        &config.dfn_hidden,
        autoencoder.latent_dim(),
    );
    let unlabeled_inputs = if unlabeled.is_empty() {
        Matrix::zeros(0, labeled.dimension())
    } else {
        unlabeled.inputs().clone()
    };
    let mut ea_rng = RandomSource::substream(seed, stage::EVOLUTION);
    let components = Components {
        autoencoder: &autoencoder,
        gp: &gp,
    };
    let (dfn, trace) = train_dfn_ea(
        components,
        &arch,
        labeled.inputs(),
        &latents,
        &unlabeled_inputs,
        &config.ea,
        &mut ea_rng,
    )?;
    Ok(PipelineRun {
        pipeline: Pipeline {
            autoencoder,
            gp,
            dfn,
            seed,
        },
        autoencoder_trace: trained.loss_trace,
        gp_report,
        trace,
        labeled_latents: latents,
    })
}

/// Draws `n` labeled and `q` unlabeled samples from the problem and trains
/// the pipeline on them.
pub fn run_pipeline(
    expr: &LimitStateExpr,
    spec: &InputSpec,
    n: usize,
    q: usize,
    config: &PipelineConfig,
    seed: u64,
) -> Result<PipelineRun> {
    let (labeled, unlabeled) = generate_datasets(expr, spec, n, q, seed)?;
    train_pipeline(&labeled, &unlabeled, config, seed)
}

pub fn generate_datasets(
    expr: &LimitStateExpr,
    spec: &InputSpec,
    n: usize,
    q: usize,
    seed: u64,
) -> Result<(LabeledDataset, UnlabeledDataset)> {
    let mut rng = RandomSource::substream(seed, stage::LABELED_DATA);
    let labeled = build_labeled_dataset(expr, spec, n, &mut rng)?;
    let mut rng = RandomSource::substream(seed, stage::UNLABELED_DATA);
    let unlabeled = build_unlabeled_dataset(spec, q, &mut rng);
    Ok((labeled, unlabeled))
}

/// Seed for a pipeline stage derived from the master seed.
pub fn stage_seed(master: u64, stage: u64) -> u64 {
    derive_seed(master, stage)
}
