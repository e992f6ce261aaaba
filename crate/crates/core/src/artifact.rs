//! Versioned on-disk form of a trained pipeline.
//!
//! Stored as JSON with shortest round-trip float formatting, so loading
//! reproduces every weight bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::semisup::Pipeline;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineArtifact {
    pub format_version: u32,
    pub input_dim: usize,
    pub latent_dim: usize,
    /// Hash of the configuration the pipeline was trained under.
    pub config_hash: String,
    pub pipeline: Pipeline,
}

impl PipelineArtifact {
    pub fn new(pipeline: Pipeline, config_hash: String) -> Self {
        PipelineArtifact {
            format_version: FORMAT_VERSION,
            input_dim: pipeline.input_dim(),
            latent_dim: pipeline.latent_dim(),
            config_hash,
            pipeline,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("artifact serializes")
    }

    /// Parses an artifact, rejecting other format versions and, when
    /// `expected_input_dim` is given, a different number of inputs.
    pub fn from_json(text: &str, expected_input_dim: Option<usize>) -> Result<Self> {
        let header: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::ArtifactVersionMismatch(format!("unreadable artifact: {e}")))?;
        let version = header.get("format_version").and_then(|v| v.as_u64());
        if version != Some(FORMAT_VERSION as u64) {
            return Err(Error::ArtifactVersionMismatch(format!(
                "format version {version:?}, expected {FORMAT_VERSION}"
            )));
        }
        let artifact: PipelineArtifact = serde_json::from_value(header)
            .map_err(|e| Error::ArtifactVersionMismatch(format!("malformed artifact: {e}")))?;
        if artifact.input_dim != artifact.pipeline.input_dim()
            || artifact.latent_dim != artifact.pipeline.latent_dim()
        {
            return Err(Error::ArtifactVersionMismatch(
                "header dimensions disagree with the pipeline".into(),
            ));
        }
        if let Some(nr) = expected_input_dim {
            if artifact.input_dim != nr {
                return Err(Error::ArtifactVersionMismatch(format!(
                    "artifact has {} inputs, configuration has {nr}",
                    artifact.input_dim
                )));
            }
        }
        Ok(artifact)
    }

    /// Writes the artifact and returns the hex SHA-256 of the bytes written.
    pub fn save(&self, path: &Path) -> Result<String> {
        let text = self.to_json();
        fs::write(path, &text)?;
        Ok(sha256_hex(text.as_bytes()))
    }

    pub fn load(path: &Path, expected_input_dim: Option<usize>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text, expected_input_dim)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
