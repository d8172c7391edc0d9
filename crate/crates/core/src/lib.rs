//! Rank-based tests for the shape matrix of an elliptical distribution.
//!
//! The numerical core (special functions, linear algebra, radial models,
//! scores, the sign/rank decomposition and the test statistics) is generic
//! over [`Scalar`]. Sampling, efficiency tables and the simulation harness
//! work in `f64`. The aliases below fix the generic types at `f64`.

pub mod efficiency;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod quadrature;
pub mod radial;
pub mod scalar;
pub mod score;
pub mod sign_rank;
pub mod special;
pub mod tabular;

pub use engine::{CriticalMode, CriticalValue, TestReport};
pub use error::{Error, Result};
pub use montecarlo::{Layout, Population, Scenario, StudyConfig, StudyResult};
pub use scalar::Scalar;
pub use tabular::Table;

pub type Matrix = linalg::Matrix<f64>;
pub type ShapeMatrix = linalg::ShapeMatrix<f64>;
pub type RadialFamily = radial::RadialFamily<f64>;
pub type RadialModel = radial::RadialModel<f64>;
pub type EllipticalSpec = radial::EllipticalSpec<f64>;
pub type ScoreFunction = score::ScoreFunction<f64>;
pub type SignRankDecomposition = sign_rank::SignRankDecomposition<f64>;
pub type TestSpec = engine::TestSpec<f64>;
pub type PreparedTest = engine::PreparedTest<f64>;
