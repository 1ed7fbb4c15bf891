use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::rmse;
use crate::error::{Error, Result};
use crate::fda::SpatialDataset;
use crate::models::{default_bandwidth_grid, select_bandwidth, EstimatorSpec, FitMode, TrainedModel};
use crate::rng::{streams, Stream};

/// Seeded partition of `0..n` into `k` disjoint folds whose sizes differ by
/// at most one. Indices within a fold are ascending.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::invalid(format!("cannot split {n} samples into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Stream::new(seed, streams::CV_FOLDS).shuffle(&mut order);
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

fn leave_one_out(n: usize) -> Result<Vec<Vec<usize>>> {
    if n < 2 {
        return Err(Error::invalid("leave-one-out needs at least 2 samples"));
    }
    Ok((0..n).map(|i| vec![i]).collect())
}

/// Where a missing bandwidth is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Inner CV inside every training fold.
    Nested,
    /// One inner CV on the whole dataset before the outer folds. Cheaper,
    /// but the held-out responses take part in choosing the bandwidth.
    Global,
}

/// Protocol settings. A spec without bandwidth gets one selected by an
/// inner CV over `grid` (or the default grid).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    pub inner_folds: usize,
    pub grid: Option<Vec<f64>>,
    pub selection: Selection,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            folds: 10,
            seed: 0,
            inner_folds: 5,
            grid: None,
            selection: Selection::Nested,
        }
    }
}

/// Held-out predictions of one fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub test: Vec<usize>,
    pub predictions: Vec<f64>,
    pub truths: Vec<f64>,
    pub bandwidth: Option<f64>,
    pub coordinates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvPredictions {
    pub folds: Vec<FoldOutcome>,
}

/// Cross-validation summary for one estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub estimator: String,
    pub kernel: Option<String>,
    pub seed: u64,
    pub fold_rmse: Vec<f64>,
    /// Mean of the fold RMSEs.
    pub rmse: f64,
    /// RMSE of all held-out residuals pooled together.
    pub pooled_rmse: f64,
    pub bandwidths: Vec<Option<f64>>,
    /// Number of FPCA coordinates used in each fold.
    pub coordinates: Vec<usize>,
    /// Held-out prediction for every sample, in dataset order.
    pub predictions: Vec<f64>,
    pub truths: Vec<f64>,
    pub seconds: f64,
}

impl CvReport {
    /// Absolute held-out errors in dataset order.
    pub fn abs_errors(&self) -> Vec<f64> {
        self.predictions
            .iter()
            .zip(&self.truths)
            .map(|(p, t)| (p - t).abs())
            .collect()
    }
}

fn run_fold(
    dataset: &SpatialDataset,
    spec: &EstimatorSpec,
    fold: usize,
    test: &[usize],
    inner: Option<(&CvOptions, u64)>,
) -> Result<FoldOutcome> {
    let train: Vec<usize> = (0..dataset.len()).filter(|i| test.binary_search(i).is_err()).collect();
    let train_set = dataset.subset(&train);
    let mut spec = spec.clone();
    if spec.needs_bandwidth() {
        let (options, seed) = inner.ok_or_else(|| Error::invalid(format!("{} needs a bandwidth", spec.label())))?;
        spec = resolve_bandwidth(&train_set, &spec, options, seed)?;
    }
    let model = TrainedModel::fit_with_mode(&train_set, &spec, FitMode::OutOfSampleOnly)?;
    let mut predictions = Vec::with_capacity(test.len());
    for &i in test {
        predictions.push(model.predict_out_of_sample(&dataset.samples()[i], &dataset.locations()[i])?);
    }
    Ok(FoldOutcome {
        fold,
        test: test.to_vec(),
        predictions,
        truths: test.iter().map(|&i| dataset.responses()[i]).collect(),
        bandwidth: spec.bandwidth,
        coordinates: model.encoder().dim(),
    })
}

fn resolve_bandwidth(
    dataset: &SpatialDataset,
    spec: &EstimatorSpec,
    options: &CvOptions,
    seed: u64,
) -> Result<EstimatorSpec> {
    let family = spec
        .kernel_family
        .ok_or_else(|| Error::invalid(format!("{} has no kernel", spec.label())))?;
    let grid = match &options.grid {
        Some(g) => g.clone(),
        None => default_bandwidth_grid(dataset.locations(), family)?,
    };
    let folds = options.inner_folds.min(dataset.len());
    let chosen = select_bandwidth(dataset, spec, &grid, folds, seed)?;
    spec.clone().with_bandwidth(chosen.bandwidth)
}

fn run_partition(
    dataset: &SpatialDataset,
    spec: &EstimatorSpec,
    partition: &[Vec<usize>],
    options: Option<&CvOptions>,
) -> Result<CvPredictions> {
    spec.validate()?;
    let resolved;
    let spec = match options {
        Some(o) if o.selection == Selection::Global && spec.needs_bandwidth() => {
            let seed = Stream::new(o.seed, streams::INNER_CV).next_u64();
            resolved = resolve_bandwidth(dataset, spec, o, seed).map_err(|e| e.context(spec.label()))?;
            &resolved
        }
        _ => spec,
    };
    let inner_seeds: Vec<u64> = {
        let mut s = Stream::new(options.map_or(0, |o| o.seed), streams::INNER_CV);
        partition.iter().map(|_| s.next_u64()).collect()
    };
    let folds = partition
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            run_fold(dataset, spec, f, test, options.map(|o| (o, inner_seeds[f])))
                .map_err(|e| e.context(format!("{} fold {f}", spec.label())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvPredictions { folds })
}

/// Held-out predictions of plain k-fold CV for a fully specified estimator.
pub fn kfold_predictions(dataset: &SpatialDataset, spec: &EstimatorSpec, k: usize, seed: u64) -> Result<CvPredictions> {
    let partition = fold_assignment(dataset.len(), k, seed)?;
    run_partition(dataset, spec, &partition, None)
}

fn summarize(dataset: &SpatialDataset, spec: &EstimatorSpec, seed: u64, cv: CvPredictions, start: Instant) -> Result<CvReport> {
    let n = dataset.len();
    let mut predictions = vec![f64::NAN; n];
    let mut fold_rmse = Vec::with_capacity(cv.folds.len());
    for f in &cv.folds {
        fold_rmse.push(rmse(&f.predictions, &f.truths)?);
        for (&i, &p) in f.test.iter().zip(&f.predictions) {
            predictions[i] = p;
        }
    }
    let truths = dataset.responses().to_vec();
    Ok(CvReport {
        estimator: spec.label(),
        kernel: spec.kernel_family.map(|k| k.name().to_string()),
        seed,
        rmse: fold_rmse.iter().sum::<f64>() / fold_rmse.len() as f64,
        pooled_rmse: rmse(&predictions, &truths)?,
        fold_rmse,
        bandwidths: cv.folds.iter().map(|f| f.bandwidth).collect(),
        coordinates: cv.folds.iter().map(|f| f.coordinates).collect(),
        predictions,
        truths,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Seeded k-fold CV; held-out points are always predicted through the
/// out-of-sample path. The reported RMSE is the mean of fold RMSEs.
pub fn kfold_cv(dataset: &SpatialDataset, spec: &EstimatorSpec, options: &CvOptions) -> Result<CvReport> {
    let start = Instant::now();
    let partition = fold_assignment(dataset.len(), options.folds, options.seed)?;
    let cv = run_partition(dataset, spec, &partition, Some(options))?;
    summarize(dataset, spec, options.seed, cv, start)
}

/// Leave-one-out CV; `options.folds` is ignored.
pub fn loocv(dataset: &SpatialDataset, spec: &EstimatorSpec, options: &CvOptions) -> Result<CvReport> {
    let start = Instant::now();
    let partition = leave_one_out(dataset.len())?;
    let cv = run_partition(dataset, spec, &partition, Some(options))?;
    summarize(dataset, spec, options.seed, cv, start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn folds_partition_the_indices(n in 2usize..80, k in 2usize..12, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let folds = fold_assignment(n, k, seed).unwrap();
            prop_assert_eq!(folds.len(), k);
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert_eq!(&folds, &fold_assignment(n, k, seed).unwrap());
        }
    }

    #[test]
    fn bad_fold_counts() {
        assert!(fold_assignment(5, 1, 0).is_err());
        assert!(fold_assignment(5, 6, 0).is_err());
        assert!(leave_one_out(1).is_err());
    }
}
