use std::fs;
use std::path::{Path, PathBuf};

use latrel::autoencoder::AutoencoderConfig;
use latrel::gpmodel::GpFitConfig;
use latrel::problem::{parse_limit_state, Distribution, InputSpec, LimitStateExpr};
use latrel::reliability::McsConfig;
use latrel::semisup::{EaConfig, PipelineConfig};
use latrel::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub autoencoder: AutoencoderConfig,
    #[serde(default)]
    pub gp: GpFitConfig,
    #[serde(default)]
    pub dfn: DfnConfig,
    #[serde(default)]
    pub ea: EaConfig,
    #[serde(default)]
    pub mcs: McsSection,
    #[serde(default)]
    pub oracle: OracleSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub expression: String,
    pub dimension: usize,
    /// One marginal shared by every input.
    #[serde(default)]
    pub distribution: Option<Distribution>,
    /// One marginal per input, in order.
    #[serde(default)]
    pub distributions: Option<Vec<Distribution>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub labeled: usize,
    pub unlabeled: usize,
    /// Existing datasets to train on instead of the generated ones.
    pub labeled_csv: Option<PathBuf>,
    pub unlabeled_csv: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            labeled: 150,
            unlabeled: 1000,
            labeled_csv: None,
            unlabeled_csv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DfnConfig {
    pub hidden: Vec<usize>,
}

impl Default for DfnConfig {
    fn default() -> Self {
        DfnConfig {
            hidden: vec![16, 8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McsSection {
    pub sample_count: u64,
    pub batch_size: u64,
    /// Rows written to the latent scatter table.
    pub scatter_count: u64,
}

impl Default for McsSection {
    fn default() -> Self {
        McsSection {
            sample_count: 100_000,
            batch_size: 4096,
            scatter_count: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub sample_count: u64,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            sample_count: 1_000_000,
        }
    }
}

impl RunConfig {
    /// Reads a TOML config. Relative paths inside it resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::config("config", e.message()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.output_dir = base.join(&cfg.output_dir);
        for p in [&mut cfg.data.labeled_csv, &mut cfg.data.unlabeled_csv]
            .into_iter()
            .flatten()
        {
            *p = base.join(&*p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.input_spec()?;
        self.expression()?;
        if self.data.labeled < 2 && self.data.labeled_csv.is_none() {
            return Err(Error::config(
                "data.labeled",
                "need at least 2 labeled samples",
            ));
        }
        self.ea.validate()?;
        self.mcs_config(0)?;
        self.oracle_config(0)?;
        Ok(())
    }

    pub fn expression(&self) -> Result<LimitStateExpr> {
        parse_limit_state(&self.problem.expression, self.problem.dimension)
    }

    pub fn input_spec(&self) -> Result<InputSpec> {
        let p = &self.problem;
        if p.dimension == 0 {
            return Err(Error::config("problem.dimension", "must be positive"));
        }
        match (&p.distribution, &p.distributions) {
            (Some(_), Some(_)) => Err(Error::config(
                "problem.distributions",
                "give either distribution or distributions, not both",
            )),
            (Some(d), None) => InputSpec::iid(*d, p.dimension),
            (None, Some(list)) if list.len() == p.dimension => InputSpec::new(list.clone()),
            (None, Some(list)) => Err(Error::config(
                "problem.distributions",
                format!("{} entries for {} inputs", list.len(), p.dimension),
            )),
            (None, None) => Err(Error::config(
                "problem.distribution",
                "missing distribution entry",
            )),
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            autoencoder: self.autoencoder.clone(),
            gp: self.gp.clone(),
            dfn_hidden: self.dfn.hidden.clone(),
            ea: self.ea.clone(),
        }
    }

    pub fn mcs_config(&self, seed: u64) -> Result<McsConfig> {
        let cfg = McsConfig {
            sample_count: self.mcs.sample_count,
            batch_size: self.mcs.batch_size,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn oracle_config(&self, seed: u64) -> Result<McsConfig> {
        let cfg = McsConfig {
            sample_count: self.oracle.sample_count,
            batch_size: self.mcs.batch_size,
            seed,
        };
        if cfg.sample_count == 0 {
            return Err(Error::config("oracle.sample_count", "must be positive"));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Hex SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        let mut portable = self.clone();
        portable.output_dir = PathBuf::new();
        latrel::artifact::sha256_hex(
            serde_json::to_string(&portable)
                .expect("config serializes")
                .as_bytes(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::config("config", e.message()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    const BASE: &str = r#"
seed = 3
[problem]
expression = "x1 - x2"
dimension = 2
"#;

    #[test]
    fn defaults_fill_unspecified_sections() {
        let cfg = parse(&format!(
            "{BASE}distribution = {{ kind = \"normal\", mean = 0.0, std = 1.0 }}\n"
        ))
        .unwrap();
        assert_eq!(cfg.data.labeled, 150);
        assert_eq!(cfg.data.unlabeled, 1000);
        assert_eq!(cfg.mcs.sample_count, 100_000);
        assert_eq!(cfg.mcs.batch_size, 4096);
        assert_eq!(cfg.oracle.sample_count, 1_000_000);
        assert_eq!(cfg.pipeline_config(), PipelineConfig::default());
        assert_eq!(cfg.input_spec().unwrap().dimension(), 2);
    }

    #[test]
    fn distribution_list_must_cover_every_input() {
        let one =
            format!("{BASE}distributions = [{{ kind = \"normal\", mean = 0.0, std = 1.0 }}]\n");
        assert!(matches!(parse(&one), Err(Error::Config { .. })));
        let two = format!(
            "{BASE}distributions = [{{ kind = \"normal\", mean = 0.0, std = 1.0 }}, {{ kind = \"normal\", mean = 1.0, std = 2.0 }}]\n"
        );
        assert_eq!(parse(&two).unwrap().input_spec().unwrap().dimension(), 2);
        assert!(matches!(parse(BASE), Err(Error::Config { .. })));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        let typo = format!("{BASE}distribution = {{ kind = \"normal\", mean = 0.0, std = 1.0 }}\n[ea]\npopulaton_size = 3\n");
        assert!(matches!(parse(&typo), Err(Error::Config { .. })));
        let bad_std =
            format!("{BASE}distribution = {{ kind = \"normal\", mean = 0.0, std = -1.0 }}\n");
        assert!(parse(&bad_std).is_err());
        let no_seed = BASE.replace("seed = 3", "");
        assert!(matches!(parse(&no_seed), Err(Error::Config { .. })));
    }

    #[test]
    fn hash_ignores_output_location() {
        let text = format!("{BASE}distribution = {{ kind = \"normal\", mean = 0.0, std = 1.0 }}\n");
        let a = parse(&text).unwrap();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("/elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 4;
        assert_ne!(a.hash(), b.hash());
    }
}
