//! Two-qubit state tomography estimators and a Monte-Carlo benchmark.
//!
//! The crate simulates finite-statistics tomography of two-qubit states in a
//! 3-input/2-output Bell scenario and compares five reconstruction
//! pipelines: linear inversion and diluted maximum-likelihood estimation on
//! full or restricted data, and a hybrid method that first projects the
//! observed correlations onto a semidefinite (moment-matrix) relaxation of
//! the quantum set by Kullback-Leibler minimization before running the
//! likelihood stage.
//!
//! All numerical kernels are generic over the floating-point type through
//! [`scalar::Scalar`]; the aliases below fix `f64`, which is what the
//! benchmark harness and CLI use.

// Comparisons written as `!(x > y)` throughout the numerics deliberately
// treat NaN as a failure; spelling them via partial_cmp obscures that.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod di;
pub mod error;
pub mod estimators;
pub mod metrics;
pub mod numerics;
pub mod scalar;
pub mod scenario;
pub mod simulation;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default floating-point type of the benchmark pipelines.
pub type Real = f64;

pub type ComplexMatrix = numerics::mat::ComplexMatrix<Real>;
pub type RealMatrix = numerics::mat::RealMatrix<Real>;
pub type EigenDecomposition = numerics::eig::EigenDecomposition<Real>;
pub type BellScenario = scenario::BellScenario<Real>;
pub type TomographyDesign = scenario::TomographyDesign<Real>;
pub type EventSubset = scenario::EventSubset<Real>;
pub type DensityMatrix = simulation::DensityMatrix<Real>;
pub type FrequencyVector = simulation::FrequencyVector<Real>;
pub type RawStateEstimate = estimators::RawStateEstimate<Real>;
pub type MleResult = estimators::MleResult<Real>;
pub type Behavior = di::Behavior<Real>;
pub type RegularizedBehavior = di::RegularizedBehavior<Real>;
