use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Target range used for every network-facing column.
pub const NETWORK_RANGE: (f64, f64) = (0.05, 0.95);

/// Per-column affine min-max map onto `[a, b]`.
///
/// Constant columns (`hi == lo`) map to the midpoint `(a + b) / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler {
    lo: Vec<f64>,
    hi: Vec<f64>,
    range: (f64, f64),
}

impl ColumnScaler {
    pub fn fit(x: &Matrix, range: (f64, f64)) -> Result<Self> {
        if x.rows() < 2 {
            return Err(Error::EmptyInput(format!(
                "scaler needs at least 2 rows, got {}",
                x.rows()
            )));
        }
        if !(range.1 > range.0) {
            return Err(Error::ShapeMismatch(format!(
                "invalid target range {range:?}"
            )));
        }
        let mut lo = vec![f64::INFINITY; x.cols()];
        let mut hi = vec![f64::NEG_INFINITY; x.cols()];
        for row in x.row_iter() {
            for (j, &v) in row.iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        Ok(ColumnScaler { lo, hi, range })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    /// Scaler restricted to the first `k` columns.
    pub fn prefix(&self, k: usize) -> ColumnScaler {
        ColumnScaler {
            lo: self.lo[..k].to_vec(),
            hi: self.hi[..k].to_vec(),
            range: self.range,
        }
    }

    #[inline]
    pub fn apply_value(&self, j: usize, v: f64) -> f64 {
        let (a, b) = self.range;
        let span = self.hi[j] - self.lo[j];
        if span > 0.0 {
            a + (v - self.lo[j]) / span * (b - a)
        } else {
            0.5 * (a + b)
        }
    }

    #[inline]
    pub fn invert_value(&self, j: usize, s: f64) -> f64 {
        let (a, b) = self.range;
        let span = self.hi[j] - self.lo[j];
        if span > 0.0 {
            self.lo[j] + (s - a) / (b - a) * span
        } else {
            self.lo[j]
        }
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_width(row.len())?;
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &v)| self.apply_value(j, v))
            .collect())
    }

    /// Scales `row` into `out` without allocating.
    pub fn apply_row_into(&self, row: &[f64], out: &mut [f64]) {
        for (j, (o, &v)) in out.iter_mut().zip(row).enumerate() {
            *o = self.apply_value(j, v);
        }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        self.check_width(x.cols())?;
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = self.apply_value(j, *v);
            }
        }
        Ok(out)
    }

    pub fn invert(&self, x: &Matrix) -> Result<Matrix> {
        self.check_width(x.cols())?;
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = self.invert_value(j, *v);
            }
        }
        Ok(out)
    }

    fn check_width(&self, w: usize) -> Result<()> {
        if w != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "scaler fitted on {} columns, got {w}",
                self.dim()
            )));
        }
        Ok(())
    }
}
