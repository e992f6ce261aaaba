use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathcore::{Matrix, RandomSource};

/// Marginal distribution of one input variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Distribution {
    Normal { mean: f64, std: f64 },
}

impl Distribution {
    pub fn normal(mean: f64, std: f64) -> Result<Self> {
        if !(std > 0.0) || !std.is_finite() || !mean.is_finite() {
            return Err(Error::NonPositiveStd(std));
        }
        Ok(Distribution::Normal { mean, std })
    }

    #[inline]
    pub fn sample(&self, rng: &mut RandomSource) -> f64 {
        match *self {
            Distribution::Normal { mean, std } => mean + std * rng.standard_normal(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Normal { mean, std } => Distribution::normal(mean, std).map(|_| ()),
        }
    }
}

/// Independent marginals, one per input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    marginals: Vec<Distribution>,
}

impl InputSpec {
    pub fn new(marginals: Vec<Distribution>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::EmptyInput(
                "input spec needs at least one variable".into(),
            ));
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(InputSpec { marginals })
    }

    /// `dimension` i.i.d. copies of `marginal`.
    pub fn iid(marginal: Distribution, dimension: usize) -> Result<Self> {
        Self::new(vec![marginal; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Distribution] {
        &self.marginals
    }

    /// Fills `out` (length `dimension`) with one joint draw.
    #[inline]
    pub fn sample_into(&self, rng: &mut RandomSource, out: &mut [f64]) {
        for (o, m) in out.iter_mut().zip(&self.marginals) {
            *o = m.sample(rng);
        }
    }
}

/// `count × nr` matrix of independent draws; row-by-row, column `j` from marginal `j`.
pub fn sample_inputs(spec: &InputSpec, count: usize, rng: &mut RandomSource) -> Matrix {
    let nr = spec.dimension();
    let mut x = Matrix::zeros(count, nr);
    for r in 0..count {
        spec.sample_into(rng, x.row_mut(r));
    }
    x
}
