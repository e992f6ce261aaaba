//! Reliability problems: limit-state expressions, input distributions and
//! the labeled / unlabeled datasets drawn from them.

mod dataset;
mod expr;
mod input;

pub use dataset::{
    build_labeled_dataset, build_unlabeled_dataset, load_csv_dataset, read_csv_dataset,
    write_labeled_csv, write_unlabeled_csv, CsvDataset, LabeledDataset, UnlabeledDataset,
};
pub use expr::{eval_limit_state, parse_limit_state, BinaryOp, Function, LimitStateExpr, Node};
pub use input::{sample_inputs, Distribution, InputSpec};

/// Limit-state function of the 20-variable benchmark, with inputs
/// i.i.d. normal(2.86, 0.7).
pub const CASE_STUDY_EXPRESSION: &str =
    "160.5 - (x1^2 + 4)*(x2 - 1)/20 + cos(5*x1) - sum(i=1..20, x_i^2)";
