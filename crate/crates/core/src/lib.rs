//! Spatio-temporal functional regression.
//!
//! Scalar-on-function regression for spatially indexed samples: functional
//! linear models and functional neural networks, each extended with
//! geographic weighting (per-location fits on distance-weighted data) and
//! spatial autoregression (a neighbour-averaged response fed as an extra
//! covariate). The crate also ships the simulation generators, the
//! cross-validation harness and the `stfnn` command line tool.
//!
//! Module map:
//!
//! * [`fda`] - time grids, trapezoidal quadrature, FPCA bases and score encoding.
//! * [`kernels`] - distances, kernel weights, SAR weight matrices, rook adjacency.
//! * [`fnn`] - the functional neural network, analytic gradients and training.
//! * [`models`] - the eight estimators and their in/out-of-sample predictors.
//! * [`simgen`] - seeded generators for the heterogeneity and dependency designs.
//! * [`harness`] - ingestion, metrics, cross-validation, tests and experiments.

pub mod error;
pub mod fda;
pub mod fnn;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod models;
pub mod rng;
pub mod simgen;

pub use error::{Error, Result};
pub use fda::{BasisSystem, Curve, FunctionalSample, SpatialDataset, TimeGrid};
pub use kernels::{KernelFamily, KernelFlavor, KernelSpec, SarWeights};
pub use models::{EstimatorKind, EstimatorSpec, TrainedModel};
