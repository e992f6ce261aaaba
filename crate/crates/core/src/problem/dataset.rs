use std::io::Write;
use std::path::Path;

use super::expr::LimitStateExpr;
use super::input::{sample_inputs, InputSpec};
use crate::error::{Error, Result};
use crate::mathcore::{Matrix, RandomSource};

/// Inputs `X_t` (n × nr) with their evaluated responses `Y_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    inputs: Matrix,
    responses: Vec<f64>,
}

impl LabeledDataset {
    pub fn new(inputs: Matrix, responses: Vec<f64>) -> Result<Self> {
        if inputs.rows() != responses.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.rows(),
                actual: responses.len(),
            });
        }
        if !inputs.is_finite() || responses.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteResult);
        }
        Ok(LabeledDataset { inputs, responses })
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.inputs.cols()
    }
}

/// Inputs `X_u` whose responses are unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledDataset {
    inputs: Matrix,
}

impl UnlabeledDataset {
    pub fn new(inputs: Matrix) -> Self {
        UnlabeledDataset { inputs }
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }

    pub fn dimension(&self) -> usize {
        self.inputs.cols()
    }
}

pub fn build_labeled_dataset(
    expr: &LimitStateExpr,
    spec: &InputSpec,
    n: usize,
    rng: &mut RandomSource,
) -> Result<LabeledDataset> {
    if n < 2 {
        return Err(Error::EmptyInput(format!(
            "labeled dataset needs n >= 2, got {n}"
        )));
    }
    if expr.dimension() != spec.dimension() {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension(),
            actual: expr.dimension(),
        });
    }
    let inputs = sample_inputs(spec, n, rng);
    let responses = inputs
        .row_iter()
        .map(|row| expr.eval(row))
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(inputs, responses)
}

pub fn build_unlabeled_dataset(
    spec: &InputSpec,
    q: usize,
    rng: &mut RandomSource,
) -> UnlabeledDataset {
    UnlabeledDataset::new(sample_inputs(spec, q, rng))
}

#[derive(Debug, Clone, PartialEq)]
pub enum CsvDataset {
    Labeled(LabeledDataset),
    Unlabeled(UnlabeledDataset),
}

/// Reads a numeric CSV with a mandatory header row. With `has_response`
/// the last column is the response.
pub fn load_csv_dataset(path: impl AsRef<Path>, has_response: bool) -> Result<CsvDataset> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_csv_dataset(file, has_response)
}

pub fn read_csv_dataset(reader: impl std::io::Read, has_response: bool) -> Result<CsvDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let width = rdr.headers().map_err(csv_error)?.len();
    let min_width = if has_response { 2 } else { 1 };
    if width < min_width {
        return Err(Error::MalformedRow(1));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::MalformedRow(line));
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                line,
                column: j + 1,
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumericCell {
                    line,
                    column: j + 1,
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    let all = Matrix::from_vec(rows, width, values)?;
    if has_response {
        let inputs = all.column_range(0, width - 1);
        let responses = all.column(width - 1);
        Ok(CsvDataset::Labeled(LabeledDataset::new(inputs, responses)?))
    } else {
        Ok(CsvDataset::Unlabeled(UnlabeledDataset::new(all)))
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        _ => Error::MalformedRow(line.unwrap_or(0)),
    }
}

fn header(nr: usize, with_response: bool) -> String {
    let mut cols: Vec<String> = (1..=nr).map(|i| format!("x{i}")).collect();
    if with_response {
        cols.push("y".into());
    }
    cols.join(",")
}

fn write_row(w: &mut impl Write, row: &[f64], extra: Option<f64>) -> std::io::Result<()> {
    let mut first = true;
    for v in row.iter().chain(extra.iter()) {
        if !first {
            w.write_all(b",")?;
        }
        first = false;
        write!(w, "{v}")?;
    }
    w.write_all(b"\n")
}

/// Writes `x1,...,xN,y` rows using shortest round-trip float formatting.
pub fn write_labeled_csv(w: &mut impl Write, ds: &LabeledDataset) -> Result<()> {
    writeln!(w, "{}", header(ds.dimension(), true))?;
    for (row, y) in ds.inputs().row_iter().zip(ds.responses()) {
        write_row(w, row, Some(*y))?;
    }
    Ok(())
}

pub fn write_unlabeled_csv(w: &mut impl Write, ds: &UnlabeledDataset) -> Result<()> {
    writeln!(w, "{}", header(ds.dimension(), false))?;
    for row in ds.inputs().row_iter() {
        write_row(w, row, None)?;
    }
    Ok(())
}
