//! Dense linear algebra, seeded sampling and column scaling shared by the
//! learning stages.

mod linalg;
mod matrix;
mod random;
mod scaler;

pub use linalg::{
    backward_substitute_transposed, cholesky_decompose, forward_substitute, solve_spd, Cholesky,
};
pub use matrix::{dot, squared_distance, Matrix};
pub use random::{derive_seed, sample_normal, RandomSource};
pub use scaler::{ColumnScaler, NETWORK_RANGE};
