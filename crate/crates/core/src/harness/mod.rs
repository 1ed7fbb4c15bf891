//! Ingestion, metrics, cross-validation protocols, significance tests and
//! experiment orchestration.

pub mod cv;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod stats;

pub use cv::{fold_assignment, kfold_cv, kfold_predictions, loocv, CvOptions, CvPredictions, CvReport, FoldOutcome, Selection};
pub use experiment::{
    evaluate, merge_results, read_results, run_experiment, write_results, ExperimentConfig, ExperimentOutput,
    ResultRow,
};
pub use io::{export_dataset, ingest, load_model, predict_files, save_model, DatasetManifest, ModelFile};
pub use metrics::{improvement, rmse};
pub use stats::{significance_tests, SignificanceResult};
