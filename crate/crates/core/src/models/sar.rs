use super::{network_rows, EstimatorKind, EstimatorSpec, Fit, Prepared, TrainedModel};
use crate::error::{Error, Result};
use crate::fda::SpatialDataset;
use crate::fnn::{self, NetworkSpec, TrainConfig};
use crate::kernels::{out_of_sample_row, sar_weight_matrix, KernelSpec, SarWeights};
use crate::models::linear::fit_linear;

pub(crate) fn fit_global(prep: &Prepared, dataset: &SpatialDataset, spec: &EstimatorSpec) -> Result<(SarWeights, Fit)> {
    let kernel = spec.kernel()?;
    let weights = sar_weight_matrix(dataset.locations(), &kernel)?;
    let y = dataset.responses();
    let extras: Vec<Vec<f64>> = weights.lag(y)?.into_iter().map(|v| vec![v]).collect();
    let fit = match spec.kind {
        EstimatorKind::Sarflm => Fit::Linear(fit_linear(&prep.scores, &extras, y, None)?),
        EstimatorKind::Sarfnn => {
            let net = spec.network_for(dataset.dim())?;
            Fit::Network(fnn::train(&network_rows(&prep.scores, &extras, y), &net, &spec.train)?)
        }
        k => return Err(Error::invalid(format!("{k} is not autoregressive"))),
    };
    Ok((weights, fit))
}

/// Least squares of Y on the FPCA scores and the neighbour average of Y.
pub fn fit_sarflm(dataset: &SpatialDataset, kernel: &KernelSpec, fve_cutoff: f64) -> Result<TrainedModel> {
    let spec = EstimatorSpec {
        kind: EstimatorKind::Sarflm,
        kernel_family: Some(kernel.family()),
        bandwidth: Some(kernel.bandwidth()),
        network: None,
        fve_cutoff,
        train: Default::default(),
    };
    TrainedModel::fit(dataset, &spec)
}

/// One network fed the FPCA scores plus the neighbour average of Y.
pub fn fit_sarfnn(
    dataset: &SpatialDataset,
    kernel: &KernelSpec,
    network: NetworkSpec,
    config: TrainConfig,
) -> Result<TrainedModel> {
    let spec = EstimatorSpec {
        kind: EstimatorKind::Sarfnn,
        kernel_family: Some(kernel.family()),
        bandwidth: Some(kernel.bandwidth()),
        network: Some(network),
        fve_cutoff: super::DEFAULT_FVE_CUTOFF,
        train: config,
    };
    TrainedModel::fit(dataset, &spec)
}

/// Neighbour average of the training responses seen from a new location,
/// using the appended row of the augmented weight matrix.
pub fn sar_covariate_out_of_sample(model: &TrainedModel, location: &[f64]) -> Result<f64> {
    if !model.kind().is_sar() {
        return Err(Error::invalid(format!("{} is not autoregressive", model.kind())));
    }
    let kernel = model.spec().kernel()?;
    let row = out_of_sample_row(model.locations(), location, &kernel)?;
    Ok(row.iter().zip(model.responses()).map(|(w, y)| w * y).sum())
}
