use serde::{Deserialize, Serialize};

use super::EstimatorSpec;
use crate::error::{Error, Result};
use crate::fda::SpatialDataset;
use crate::harness::cv::kfold_predictions;
use crate::harness::metrics::rmse;
use crate::kernels::{pairwise_distances, KernelFamily};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthScore {
    pub bandwidth: f64,
    /// Mean fold RMSE; `None` when the candidate failed on some fold.
    pub rmse: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSelection {
    pub bandwidth: f64,
    pub scores: Vec<BandwidthScore>,
}

/// Candidate bandwidths for `family` on the given locations: 8 log-spaced
/// values from a tenth of the median to twice the largest pairwise distance,
/// or neighbour counts {1, 2, 4, 8, N/4, N/2} for the nearest kernel.
pub fn default_bandwidth_grid(locations: &[Vec<f64>], family: KernelFamily) -> Result<Vec<f64>> {
    let n = locations.len();
    if n < 2 {
        return Err(Error::invalid("bandwidth grids need at least 2 locations"));
    }
    if family == KernelFamily::Nearest {
        let mut grid: Vec<usize> = [1, 2, 4, 8, n / 4, n / 2]
            .into_iter()
            .map(|h| h.clamp(1, n - 1))
            .collect();
        grid.sort_unstable();
        grid.dedup();
        return Ok(grid.into_iter().map(|h| h as f64).collect());
    }
    let mut d: Vec<f64> = pairwise_distances(locations)?.into_iter().filter(|v| *v > 0.0).collect();
    if d.is_empty() {
        return Err(Error::Degenerate("all locations coincide".into()));
    }
    d.sort_by(f64::total_cmp);
    let median = if d.len() % 2 == 1 {
        d[d.len() / 2]
    } else {
        0.5 * (d[d.len() / 2 - 1] + d[d.len() / 2])
    };
    let lo = (0.1 * median).ln();
    let hi = (2.0 * d[d.len() - 1]).ln();
    Ok((0..8).map(|i| (lo + (hi - lo) * i as f64 / 7.0).exp()).collect())
}

/// Cross-validated bandwidth choice. Every candidate is scored by the mean
/// fold RMSE of `folds`-fold CV; the smallest bandwidth among the best wins.
/// Candidates whose fit fails on some fold are kept in the table unscored.
pub fn select_bandwidth(
    dataset: &SpatialDataset,
    template: &EstimatorSpec,
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<BandwidthSelection> {
    if grid.is_empty() {
        return Err(Error::invalid("empty bandwidth grid"));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut scores = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    let mut last_err = None;
    for &h in &grid {
        let spec = template.clone().with_bandwidth(h)?;
        let score = kfold_predictions(dataset, &spec, folds, seed).map(|cv| {
            cv.folds
                .iter()
                .map(|f| rmse(&f.predictions, &f.truths))
                .collect::<Result<Vec<_>>>()
                .map(|r| r.iter().sum::<f64>() / r.len() as f64)
        });
        let rmse = match score {
            Ok(Ok(r)) if r.is_finite() => Some(r),
            Ok(Err(e)) | Err(e) => {
                if !e.is_numerical() {
                    return Err(e);
                }
                last_err = Some(e);
                None
            }
            Ok(Ok(_)) => None,
        };
        if let Some(r) = rmse {
            if best.map_or(true, |(_, b)| r < b) {
                best = Some((h, r));
            }
        }
        scores.push(BandwidthScore { bandwidth: h, rmse });
    }
    match best {
        Some((bandwidth, _)) => Ok(BandwidthSelection { bandwidth, scores }),
        None => Err(last_err
            .unwrap_or_else(|| Error::Degenerate("no bandwidth produced a finite score".into()))
            .context("bandwidth selection")),
    }
}
