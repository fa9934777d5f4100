//! Differential operators, pseudodifferential symbols and projective curves on the circle.

pub mod agd;
pub mod circle;
pub mod ds;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod monodromy;
pub mod operator;
pub mod random;

pub use circle::{CircleDiffeo, PeriodicFunction};
pub use error::{Error, Result};
pub use operator::{DensityWeights, DifferentialOperator, GroupClass};
