//! Zero-mean Gaussian-process surrogate over latent coordinates.
//!
//! Responses are standardized before fitting so the zero prior mean is
//! meaningful; predictions are mapped back to response units. The kernel is
//! the isotropic squared exponential
//! `k(a, b) = α² · exp(−‖a − b‖² / (2ω²))` plus observation noise `σ_ε²`
//! on the training diagonal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathcore::{cholesky_decompose, squared_distance, Cholesky, Matrix};
use crate::optimize::{nelder_mead, NelderMeadOptions};

pub const NOISE_FLOOR: f64 = 1e-6;

/// Log-space search box for `(α, ω, σ_ε)`.
const LOG_BOUNDS: [(f64, f64); 3] = [
    (-6.907_755_278_982_137, 4.605_170_185_988_092), // α ∈ [1e-3, 1e2]
    (-6.907_755_278_982_137, 4.605_170_185_988_092), // ω ∈ [1e-3, 1e2]
    (-13.815_510_557_964_274, std::f64::consts::LN_10), // σ_ε ∈ [1e-6, 10]
];

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpHyperparams {
    pub signal_std: f64,
    pub length_scale: f64,
    pub noise_std: f64,
}

impl Default for GpHyperparams {
    fn default() -> Self {
        GpHyperparams {
            signal_std: 1.0,
            length_scale: 0.2,
            noise_std: 0.05,
        }
    }
}

impl GpHyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.signal_std > 0.0 && self.length_scale > 0.0 && self.noise_std >= NOISE_FLOOR)
            || !(self.signal_std.is_finite()
                && self.length_scale.is_finite()
                && self.noise_std.is_finite())
        {
            return Err(Error::config(
                "gp",
                format!(
                    "invalid hyperparameters {self:?} (need α > 0, ω > 0, σ_ε ≥ {NOISE_FLOOR})"
                ),
            ));
        }
        Ok(())
    }

    fn to_log(self) -> [f64; 3] {
        [
            self.signal_std.ln(),
            self.length_scale.ln(),
            self.noise_std.ln(),
        ]
    }

    fn from_log(p: &[f64]) -> Self {
        let c = |i: usize| p[i].clamp(LOG_BOUNDS[i].0, LOG_BOUNDS[i].1).exp();
        GpHyperparams {
            signal_std: c(0),
            length_scale: c(1),
            noise_std: c(2).max(NOISE_FLOOR),
        }
    }
}

/// Squared-exponential covariance between two latent points.
pub fn kernel(a: &[f64], b: &[f64], h: &GpHyperparams) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "kernel arguments of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(kernel_unchecked(
        a,
        b,
        h.signal_std * h.signal_std,
        inv_two_l2(h),
    ))
}

#[inline]
fn inv_two_l2(h: &GpHyperparams) -> f64 {
    1.0 / (2.0 * h.length_scale * h.length_scale)
}

#[inline]
fn kernel_unchecked(a: &[f64], b: &[f64], alpha2: f64, inv_2l2: f64) -> f64 {
    alpha2 * (-squared_distance(a, b) * inv_2l2).exp()
}

/// `R(θ_t, θ_t) + σ_ε² I`.
pub fn kernel_matrix(points: &Matrix, h: &GpHyperparams) -> Matrix {
    let n = points.rows();
    let alpha2 = h.signal_std * h.signal_std;
    let inv = inv_two_l2(h);
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        k.set(i, i, alpha2 + h.noise_std * h.noise_std);
        for j in 0..i {
            let v = kernel_unchecked(points.row(i), points.row(j), alpha2, inv);
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    k
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpFitConfig {
    pub init: GpHyperparams,
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for GpFitConfig {
    fn default() -> Self {
        GpFitConfig {
            init: GpHyperparams::default(),
            restarts: 8,
            max_iterations: 500,
            tolerance: 1e-8,
        }
    }
}

/// One hyperparameter search restart: negative log marginal likelihood at the
/// start and at the end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartOutcome {
    pub start: GpHyperparams,
    pub initial_nlml: f64,
    pub final_nlml: f64,
    pub hyper: GpHyperparams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpFitReport {
    pub restarts: Vec<RestartOutcome>,
    pub best_restart: usize,
}

/// Serialized form: everything else is recomputed deterministically.
#[derive(Serialize, Deserialize)]
struct GpModelRecord {
    train_latents: Matrix,
    train_targets: Vec<f64>,
    hyper: GpHyperparams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GpModelRecord", into = "GpModelRecord")]
pub struct GpModel {
    train_latents: Matrix,
    train_targets: Vec<f64>,
    target_mean: f64,
    target_std: f64,
    standardized: Vec<f64>,
    hyper: GpHyperparams,
    chol: Cholesky,
    weights: Vec<f64>,
}

impl TryFrom<GpModelRecord> for GpModel {
    type Error = Error;

    fn try_from(r: GpModelRecord) -> Result<Self> {
        GpModel::with_hyperparams(r.train_latents, r.train_targets, r.hyper)
    }
}

impl From<GpModel> for GpModelRecord {
    fn from(m: GpModel) -> Self {
        GpModelRecord {
            train_latents: m.train_latents,
            train_targets: m.train_targets,
            hyper: m.hyper,
        }
    }
}

fn standardize(y: &[f64]) -> (f64, f64, Vec<f64>) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = if var > 0.0 { var.sqrt() } else { 1.0 };
    (mean, std, y.iter().map(|v| (v - mean) / std).collect())
}

fn check_training(latents: &Matrix, targets: &[f64]) -> Result<()> {
    if latents.rows() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} latent rows but {} targets",
            latents.rows(),
            targets.len()
        )));
    }
    if latents.rows() < 2 {
        return Err(Error::EmptyInput(format!(
            "GP needs at least 2 training points, got {}",
            latents.rows()
        )));
    }
    if !latents.is_finite() || targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteResult);
    }
    Ok(())
}

/// Negative log marginal likelihood of standardized targets, plus the
/// factorization it was computed from.
fn nlml(latents: &Matrix, z: &[f64], h: &GpHyperparams) -> Result<(f64, Cholesky, Vec<f64>)> {
    let chol = cholesky_decompose(&kernel_matrix(latents, h), 0.0)?;
    let w = chol.solve(z)?;
    let fit: f64 = z.iter().zip(&w).map(|(a, b)| a * b).sum();
    let value = 0.5 * fit + chol.half_log_det() + z.len() as f64 * HALF_LN_2PI;
    Ok((value, chol, w))
}

impl GpModel {
    /// Builds a model at fixed hyperparameters (no search).
    pub fn with_hyperparams(
        latents: Matrix,
        targets: Vec<f64>,
        hyper: GpHyperparams,
    ) -> Result<Self> {
        check_training(&latents, &targets)?;
        hyper.validate()?;
        let (mean, std, z) = standardize(&targets);
        let chol = cholesky_decompose(&kernel_matrix(&latents, &hyper), 0.0)?;
        let weights = chol.solve(&z)?;
        Ok(GpModel {
            train_latents: latents,
            train_targets: targets,
            target_mean: mean,
            target_std: std,
            standardized: z,
            hyper,
            chol,
            weights,
        })
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hyper
    }

    pub fn train_latents(&self) -> &Matrix {
        &self.train_latents
    }

    pub fn train_targets(&self) -> &[f64] {
        &self.train_targets
    }

    pub fn standardized_targets(&self) -> &[f64] {
        &self.standardized
    }

    pub fn target_mean(&self) -> f64 {
        self.target_mean
    }

    pub fn target_std(&self) -> f64 {
        self.target_std
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn latent_dim(&self) -> usize {
        self.train_latents.cols()
    }

    pub fn len(&self) -> usize {
        self.train_latents.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.train_latents.rows() == 0
    }

    /// Negative log marginal likelihood of the standardized targets at the
    /// fitted hyperparameters.
    pub fn neg_log_marginal_likelihood(&self) -> f64 {
        let fit: f64 = self
            .standardized
            .iter()
            .zip(&self.weights)
            .map(|(a, b)| a * b)
            .sum();
        0.5 * fit + self.chol.half_log_det() + self.len() as f64 * HALF_LN_2PI
    }

    fn check_query(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.latent_dim() {
            return Err(Error::ShapeMismatch(format!(
                "query of length {} for a {}-dimensional latent space",
                q.len(),
                self.latent_dim()
            )));
        }
        Ok(())
    }

    fn cross_covariance(&self, q: &[f64]) -> Vec<f64> {
        let alpha2 = self.hyper.signal_std * self.hyper.signal_std;
        let inv = inv_two_l2(&self.hyper);
        self.train_latents
            .row_iter()
            .map(|t| kernel_unchecked(t, q, alpha2, inv))
            .collect()
    }

    /// Standardized predictive mean `rᵀ [R + σ_ε² I]⁻¹ z`.
    #[inline]
    pub fn predict_mean_standardized(&self, q: &[f64]) -> Result<f64> {
        self.check_query(q)?;
        let alpha2 = self.hyper.signal_std * self.hyper.signal_std;
        let inv = inv_two_l2(&self.hyper);
        Ok(self
            .train_latents
            .row_iter()
            .zip(&self.weights)
            .map(|(t, w)| kernel_unchecked(t, q, alpha2, inv) * w)
            .sum())
    }

    /// Standardized predictive variance `R(q, q) − rᵀ [R + σ_ε² I]⁻¹ r`, clamped at 0.
    pub fn predict_var_standardized(&self, q: &[f64]) -> Result<f64> {
        self.check_query(q)?;
        let r = self.cross_covariance(q);
        let v = self.chol.solve_lower(&r)?;
        let prior = self.hyper.signal_std * self.hyper.signal_std;
        Ok((prior - v.iter().map(|x| x * x).sum::<f64>()).max(0.0))
    }

    /// Predictive mean in response units.
    pub fn predict_mean(&self, q: &[f64]) -> Result<f64> {
        Ok(self.target_mean + self.target_std * self.predict_mean_standardized(q)?)
    }

    /// Predictive variance in squared response units.
    pub fn predict_var(&self, q: &[f64]) -> Result<f64> {
        Ok(self.target_std * self.target_std * self.predict_var_standardized(q)?)
    }

    pub fn predict_mean_batch(&self, queries: &Matrix) -> Result<Vec<f64>> {
        queries.row_iter().map(|q| self.predict_mean(q)).collect()
    }
}

pub fn gp_predict_mean(m: &GpModel, q: &[f64]) -> Result<f64> {
    m.predict_mean(q)
}

pub fn gp_predict_var(m: &GpModel, q: &[f64]) -> Result<f64> {
    m.predict_var(q)
}

/// Deterministic restart points: the configured start, then a Halton
/// sequence (bases 2, 3, 5) over a moderate log-space box.
fn restart_points(init: &GpHyperparams, restarts: usize) -> Vec<[f64; 3]> {
    use std::f64::consts::LN_10;
    const BOX: [(f64, f64); 3] = [(-LN_10, LN_10), (-4.605_170, 1.0), (-9.210_340, 0.0)];
    let mut pts = vec![init.to_log()];
    for k in 1..restarts.max(1) {
        let mut p = [0.0; 3];
        for (d, base) in [2u64, 3, 5].into_iter().enumerate() {
            let u = halton(k as u64, base);
            p[d] = BOX[d].0 + u * (BOX[d].1 - BOX[d].0);
        }
        pts.push(p);
    }
    pts
}

fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Maximum-likelihood fit of `(α, ω, σ_ε)` by multi-start Nelder–Mead in log space.
pub fn fit_gp(latents: &Matrix, targets: &[f64], config: &GpFitConfig) -> Result<GpModel> {
    fit_gp_with_report(latents, targets, config).map(|(m, _)| m)
}

pub fn fit_gp_with_report(
    latents: &Matrix,
    targets: &[f64],
    config: &GpFitConfig,
) -> Result<(GpModel, GpFitReport)> {
    check_training(latents, targets)?;
    config.init.validate()?;
    let (_, _, z) = standardize(targets);
    let objective = |p: &[f64]| -> f64 {
        let h = GpHyperparams::from_log(p);
        match nlml(latents, &z, &h) {
            Ok((v, _, _)) => v,
            Err(_) => f64::INFINITY,
        }
    };
    let opts = NelderMeadOptions {
        initial_step: 0.5,
        tolerance: config.tolerance,
        max_iterations: config.max_iterations,
    };
    let mut outcomes = Vec::new();
    for start in restart_points(&config.init, config.restarts) {
        let m = nelder_mead(objective, &start, &opts);
        outcomes.push(RestartOutcome {
            start: GpHyperparams::from_log(&start),
            initial_nlml: m.initial_value,
            final_nlml: m.value,
            hyper: GpHyperparams::from_log(&m.point),
        });
    }
    let best = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.final_nlml.is_finite())
        .min_by(|a, b| {
            a.1.final_nlml
                .total_cmp(&b.1.final_nlml)
                .then(a.0.cmp(&b.0))
        })
        .map(|(i, _)| i)
        .ok_or_else(|| {
            Error::OptimizerFailed("every restart produced a non-finite likelihood".into())
        })?;
    let model = GpModel::with_hyperparams(latents.clone(), targets.to_vec(), outcomes[best].hyper)?;
    Ok((
        model,
        GpFitReport {
            restarts: outcomes,
            best_restart: best,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::RandomSource;

    fn h(a: f64, w: f64, s: f64) -> GpHyperparams {
        GpHyperparams {
            signal_std: a,
            length_scale: w,
            noise_std: s,
        }
    }

    #[test]
    fn kernel_values() {
        let hp = h(1.5, 1.0, 1e-3);
        assert_eq!(kernel(&[0.3, 0.4], &[0.3, 0.4], &hp).unwrap(), 2.25);
        let v = kernel(&[0.0, 0.0], &[1.0, 1.0], &h(1.0, 1.0, 1e-3)).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);
        assert!(kernel(&[0.0], &[100.0], &hp).unwrap() < 1e-12);
        assert!(kernel(&[0.0], &[1.0, 2.0], &hp).is_err());
    }

    #[test]
    fn interpolates_training_points() {
        let x = Matrix::from_vec(4, 1, vec![0.0, 0.3, 0.6, 1.0]).unwrap();
        let y = vec![1.0, -2.0, 0.5, 3.0];
        let m = GpModel::with_hyperparams(x.clone(), y.clone(), h(1.0, 0.3, NOISE_FLOOR)).unwrap();
        for (r, &t) in x.row_iter().zip(&y) {
            assert!((m.predict_mean(r).unwrap() - t).abs() < 1e-3);
            assert!(m.predict_var_standardized(r).unwrap() < 1e-4);
        }
    }

    #[test]
    fn reverts_to_prior_far_away() {
        let x = Matrix::from_vec(3, 2, vec![0.1, 0.1, 0.5, 0.2, 0.9, 0.8]).unwrap();
        let y = vec![4.0, 6.0, 11.0];
        let m = GpModel::with_hyperparams(x, y.clone(), h(1.3, 0.2, 0.01)).unwrap();
        let far = [50.0, -50.0];
        let mean = y.iter().sum::<f64>() / 3.0;
        assert!((m.predict_mean(&far).unwrap() - mean).abs() < 1e-12);
        assert!((m.predict_var_standardized(&far).unwrap() - 1.69).abs() < 1e-12);
        assert!(m.predict_mean(&[0.0]).is_err());
    }

    #[test]
    fn two_point_hand_oracle() {
        // standardized targets are (−1, 1); K = [[a²+s², c],[c, a²+s²]]
        let (a, w, s) = (1.2, 0.5, 0.1);
        let x = Matrix::from_vec(2, 1, vec![0.0, 0.4]).unwrap();
        let m = GpModel::with_hyperparams(x, vec![2.0, 6.0], h(a, w, s)).unwrap();
        let q = 0.25;
        let k = |d: f64| a * a * (-(d * d) / (2.0 * w * w)).exp();
        let (d, c) = (a * a + s * s, k(0.4));
        let det = d * d - c * c;
        let inv = [[d / det, -c / det], [-c / det, d / det]];
        let r = [k(q), k(q - 0.4)];
        let z = [-1.0, 1.0];
        let mean_z = r[0] * (inv[0][0] * z[0] + inv[0][1] * z[1])
            + r[1] * (inv[1][0] * z[0] + inv[1][1] * z[1]);
        let var_z = a * a
            - (r[0] * (inv[0][0] * r[0] + inv[0][1] * r[1])
                + r[1] * (inv[1][0] * r[0] + inv[1][1] * r[1]));
        assert!((m.predict_mean(&[q]).unwrap() - (4.0 + 2.0 * mean_z)).abs() < 1e-10);
        assert!((m.predict_var(&[q]).unwrap() - 4.0 * var_z).abs() < 1e-10);
    }

    #[test]
    fn fit_smooth_function_interpolates_held_out_point() {
        let xs = [0.0, 0.25, 0.5, 0.75, 1.0];
        let f = |x: f64| (3.0 * x).sin();
        let x = Matrix::from_vec(5, 1, xs.to_vec()).unwrap();
        let y: Vec<f64> = xs.iter().map(|&v| f(v)).collect();
        let m = fit_gp(&x, &y, &GpFitConfig::default()).unwrap();
        let range = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - y.iter().cloned().fold(f64::INFINITY, f64::min);
        let err = (m.predict_mean(&[0.6]).unwrap() - f(0.6)).abs();
        assert!(
            err < 0.1 * range,
            "error {err}, hyper {:?}",
            m.hyperparams()
        );
    }

    #[test]
    fn pure_noise_is_explained_by_noise() {
        let mut rng = RandomSource::new(17);
        let n = 60;
        let x = Matrix::from_vec(n, 2, (0..2 * n).map(|_| rng.uniform()).collect()).unwrap();
        let y: Vec<f64> = (0..n).map(|_| 0.3 * rng.standard_normal()).collect();
        let m = fit_gp(&x, &y, &GpFitConfig::default()).unwrap();
        let hp = m.hyperparams();
        // either noise or a vanishing length scale can absorb white noise;
        // both leave no structure to predict from
        let explained = hp.noise_std > hp.signal_std || hp.length_scale < 0.01;
        assert!(explained, "{hp:?}");
        let total = hp.signal_std.powi(2) + hp.noise_std.powi(2);
        assert!(total > 0.5 && total < 2.0, "{hp:?}");
        for q in [[0.31, 0.77], [0.5, 0.5], [0.9, 0.05]] {
            assert!(m.predict_mean(&q).unwrap().abs() < 0.15, "{hp:?}");
        }
    }

    #[test]
    fn duplicate_points_with_conflicting_targets() {
        let x = Matrix::from_vec(4, 1, vec![0.2, 0.2, 0.7, 0.7]).unwrap();
        let y = vec![1.0, -1.0, 2.0, 2.5];
        let m = fit_gp(&x, &y, &GpFitConfig::default()).unwrap();
        assert!(m.hyperparams().noise_std > NOISE_FLOOR);
    }

    #[test]
    fn restarts_never_end_above_their_start() {
        let mut rng = RandomSource::new(5);
        let x = Matrix::from_vec(20, 2, (0..40).map(|_| rng.uniform()).collect()).unwrap();
        let y: Vec<f64> = x.row_iter().map(|r| (4.0 * r[0]).cos() + r[1]).collect();
        let (m, report) = fit_gp_with_report(&x, &y, &GpFitConfig::default()).unwrap();
        assert_eq!(report.restarts.len(), 8);
        let best = report.restarts[report.best_restart].final_nlml;
        for o in &report.restarts {
            assert!(o.final_nlml <= o.initial_nlml);
            assert!(best <= o.initial_nlml);
        }
        assert!((m.neg_log_marginal_likelihood() - best).abs() < 1e-9);
    }

    #[test]
    fn serde_round_trip_is_exact() {
        let x = Matrix::from_vec(3, 1, vec![0.1, 0.5, 0.9]).unwrap();
        let m = GpModel::with_hyperparams(x, vec![1.0, 2.0, 0.5], h(0.9, 0.3, 0.01)).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: GpModel = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
    }
}
