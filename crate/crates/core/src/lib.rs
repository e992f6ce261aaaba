//! Semi-supervised latent-space surrogate for high-dimensional reliability
//! analysis.
//!
//! The pipeline fuses labeled inputs with their responses, compresses them
//! with an autoencoder, fits a Gaussian-process surrogate on the latent
//! codes, and trains a feedforward network by an evolutionary algorithm to
//! reach those latent codes from the inputs alone. Monte Carlo simulation
//! through `GP(DFN(x))` then estimates the failure probability.

pub mod artifact;
pub mod autoencoder;
pub mod dfn;
pub mod error;
pub mod gpmodel;
pub mod mathcore;
pub mod network;
pub mod optimize;
pub mod problem;
pub mod reliability;
pub mod semisup;

pub use error::{Error, Result};
