use rayon::prelude::*;

use super::{prepare, EstimatorKind, EstimatorSpec, Fit, FitMode, LinearHead, Prepared, TrainedModel};
use crate::error::{Error, Result};
use crate::fda::SpatialDataset;
use crate::fnn::{self, NetworkSpec, TrainConfig, TrainedNetwork, TrainingRow};
use crate::kernels::{gw_weight_vector, KernelSpec};
use crate::models::linear::fit_linear;

/// Below this every geographic weight counts as zero.
const WEIGHT_FLOOR: f64 = 1e-12;

/// Curves and responses scaled by `sqrt(w_i)`.
pub fn transform_gw_data(dataset: &SpatialDataset, weights: &[f64]) -> Result<SpatialDataset> {
    check_weights(weights, dataset.len())?;
    let samples = dataset
        .samples()
        .iter()
        .zip(weights)
        .map(|(s, w)| s.scaled(w.sqrt()))
        .collect();
    let y = dataset
        .responses()
        .iter()
        .zip(weights)
        .map(|(y, w)| y * w.sqrt())
        .collect();
    SpatialDataset::with_ids(
        dataset.ids().to_vec(),
        samples,
        y,
        dataset.locations().to_vec(),
    )
}

fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::shape(format!("{} weights for {n} samples", weights.len())));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::invalid(format!("geographic weight {w} is not a finite nonnegative number")));
    }
    Ok(())
}

/// Network training rows for the transformed data: basis coordinates of
/// `sqrt(w) X` (that is `sqrt(w) c - c_mean` for raw projections `c`) and
/// target `sqrt(w) y`.
pub fn gw_training_rows(
    projections: &[Vec<f64>],
    mean_projection: &[f64],
    y: &[f64],
    weights: &[f64],
) -> Result<Vec<TrainingRow>> {
    check_weights(weights, y.len())?;
    if projections.len() != y.len() {
        return Err(Error::shape("projection rows do not match the responses"));
    }
    Ok(projections
        .iter()
        .zip(y)
        .zip(weights)
        .map(|((c, y), w)| {
            let s = w.sqrt();
            let inputs = c.iter().zip(mean_projection).map(|(c, m)| s * c - m).collect();
            TrainingRow::new(inputs, Vec::new(), s * y)
        })
        .collect())
}

fn ensure_support(weights: &[f64], what: impl FnOnce() -> String) -> Result<()> {
    if weights.iter().all(|w| *w < WEIGHT_FLOOR) {
        return Err(Error::Degenerate(format!(
            "all geographic weights vanish for {}",
            what()
        )));
    }
    Ok(())
}

fn local_linear(scores: &[Vec<f64>], y: &[f64], weights: &[f64]) -> Result<LinearHead> {
    let extras = vec![Vec::new(); y.len()];
    fit_linear(scores, &extras, y, Some(weights))
}

fn local_network(
    projections: &[Vec<f64>],
    mean_projection: &[f64],
    y: &[f64],
    weights: &[f64],
    network: &NetworkSpec,
    config: &TrainConfig,
) -> Result<TrainedNetwork> {
    let rows = gw_training_rows(projections, mean_projection, y, weights)?;
    fnn::train(&rows, network, config)
}

/// Weighted least squares at training location `u`:
/// `(Z^T W_u Z)^-1 Z^T W_u Y` with `Z = [1, scores]`.
pub fn fit_gwflm(dataset: &SpatialDataset, kernel: &KernelSpec, u: usize, fve_cutoff: f64) -> Result<LinearHead> {
    if u >= dataset.len() {
        return Err(Error::invalid(format!("location index {u} outside the {} samples", dataset.len())));
    }
    let prep = prepare(dataset, fve_cutoff)?;
    let locations = dataset.locations();
    let w = gw_weight_vector(locations, &locations[u], kernel)?;
    ensure_support(&w, || format!("location {u}"))?;
    local_linear(&prep.scores, dataset.responses(), &w).map_err(|e| e.context(format!("location {u}")))
}

/// One network per training location, each trained on the whole dataset
/// transformed with that location's weights.
pub fn fit_gwfnn(
    dataset: &SpatialDataset,
    kernel: &KernelSpec,
    network: NetworkSpec,
    config: TrainConfig,
) -> Result<TrainedModel> {
    let spec = EstimatorSpec {
        kind: EstimatorKind::Gwfnn,
        kernel_family: Some(kernel.family()),
        bandwidth: Some(kernel.bandwidth()),
        network: Some(network),
        fve_cutoff: super::DEFAULT_FVE_CUTOFF,
        train: config,
    };
    TrainedModel::fit_with_mode(dataset, &spec, FitMode::Full)
}

pub(crate) fn fit_local_models(prep: &Prepared, dataset: &SpatialDataset, spec: &EstimatorSpec) -> Result<Fit> {
    let kernel = spec.kernel()?;
    let locations = dataset.locations();
    let y = dataset.responses();
    let weights = |u: usize| -> Result<Vec<f64>> {
        let w = gw_weight_vector(locations, &locations[u], &kernel)?;
        ensure_support(&w, || format!("location {u}"))?;
        Ok(w)
    };
    match spec.kind {
        EstimatorKind::Gwflm => {
            let heads = (0..dataset.len())
                .map(|u| {
                    weights(u)
                        .and_then(|w| local_linear(&prep.scores, y, &w))
                        .map_err(|e| e.context(format!("location {u}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Fit::LocalLinear(heads))
        }
        EstimatorKind::Gwfnn => {
            let net = spec.network_for(dataset.dim())?;
            let mean = prep.encoder.mean_projection();
            let nets = (0..dataset.len())
                .into_par_iter()
                .map(|u| {
                    weights(u)
                        .and_then(|w| local_network(&prep.projections, &mean, y, &w, &net, &spec.train))
                        .map_err(|e| e.context(format!("location {u}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Fit::LocalNetwork(nets))
        }
        k => Err(Error::invalid(format!("{k} is not geographically weighted"))),
    }
}

/// Fresh local fit around an unseen location, trained on the stored
/// training data only.
pub(crate) fn fit_at(model: &TrainedModel, location: &[f64]) -> Result<Fit> {
    let spec = model.spec();
    let kernel = spec.kernel()?;
    let w = gw_weight_vector(model.locations(), location, &kernel)?;
    ensure_support(&w, || format!("location {location:?}"))?;
    let mean = model.encoder().mean_projection();
    let y = model.responses();
    match spec.kind {
        EstimatorKind::Gwflm => {
            let scores: Vec<Vec<f64>> = model
                .projections()
                .iter()
                .map(|c| c.iter().zip(&mean).map(|(a, b)| a - b).collect())
                .collect();
            Ok(Fit::Linear(local_linear(&scores, y, &w)?))
        }
        EstimatorKind::Gwfnn => {
            let net = spec.network_for(location.len())?;
            Ok(Fit::Network(local_network(model.projections(), &mean, y, &w, &net, &spec.train)?))
        }
        k => Err(Error::invalid(format!("{k} is not geographically weighted"))),
    }
}
