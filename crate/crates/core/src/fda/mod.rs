//! Functional-data representation, quadrature and FPCA bases.

mod data;
mod fpca;
mod grid;
mod quadrature;

pub use data::{Curve, FunctionalSample, SpatialDataset};
pub use fpca::{
    evaluate_param_function, fpca, project_scores, BasisSystem, FeatureBasis, Fpca, ScoreEncoder,
};
pub use grid::TimeGrid;
pub use quadrature::{inner_product, trapezoid_integrate, trapezoid_weights};
