//! Numerical laboratory for critical Galton–Watson processes with
//! immigration: exact laws of `Z_n`, harmonic moments, limit constants,
//! and Monte Carlo large-deviation estimates for `S_{Z_n} / Z_n`.

pub mod cli;
pub mod config;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod limits;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod series;
pub mod simulate;
pub mod special;

pub use error::{GwiError, Result};
pub use model::{validate_condition_a, DistributionSpec, ModelParams};
pub use series::TruncatedSeries;
