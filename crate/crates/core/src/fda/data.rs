use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::TimeGrid;
use crate::error::{Error, Result};

/// One observed feature of one subject: values on a time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    grid: Arc<TimeGrid>,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Arc<TimeGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::shape(format!(
                "{} values on a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite curve value at t = {}",
                grid.points()[j]
            )));
        }
        Ok(Curve { grid, values })
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Curve {
        Curve {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn same_grid(&self, other: &TimeGrid) -> bool {
        std::ptr::eq(self.grid.as_ref(), other) || self.grid.as_ref() == other
    }
}

/// The R functional covariates of one subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSample {
    curves: Vec<Curve>,
}

impl FunctionalSample {
    pub fn new(curves: Vec<Curve>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::invalid("a functional sample needs at least one feature"));
        }
        Ok(FunctionalSample { curves })
    }

    pub fn single(curve: Curve) -> Self {
        FunctionalSample {
            curves: vec![curve],
        }
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn curve(&self, feature: usize) -> Result<&Curve> {
        self.curves.get(feature).ok_or_else(|| {
            Error::shape(format!(
                "feature {feature} requested from a sample with {} features",
                self.curves.len()
            ))
        })
    }

    pub fn n_features(&self) -> usize {
        self.curves.len()
    }

    /// Every curve multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> FunctionalSample {
        FunctionalSample {
            curves: self.curves.iter().map(|c| c.scaled(factor)).collect(),
        }
    }
}

/// N subjects, each with functional covariates, a scalar response and a location.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialDataset {
    ids: Vec<String>,
    samples: Vec<FunctionalSample>,
    responses: Vec<f64>,
    locations: Vec<Vec<f64>>,
}

impl SpatialDataset {
    /// Build a dataset with ids `1..=N`.
    pub fn new(
        samples: Vec<FunctionalSample>,
        responses: Vec<f64>,
        locations: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let ids = (1..=samples.len()).map(|i| i.to_string()).collect();
        Self::with_ids(ids, samples, responses, locations)
    }

    pub fn with_ids(
        ids: Vec<String>,
        samples: Vec<FunctionalSample>,
        responses: Vec<f64>,
        locations: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::invalid("dataset is empty"));
        }
        if responses.len() != n || locations.len() != n || ids.len() != n {
            return Err(Error::shape(format!(
                "{n} samples, {} responses, {} locations, {} ids",
                responses.len(),
                locations.len(),
                ids.len()
            )));
        }
        let r = samples[0].n_features();
        if let Some(i) = samples.iter().position(|s| s.n_features() != r) {
            return Err(Error::shape(format!(
                "sample {} has {} features, expected {r}",
                ids[i],
                samples[i].n_features()
            )));
        }
        let d = locations[0].len();
        if d == 0 {
            return Err(Error::invalid("locations must have at least one coordinate"));
        }
        for (i, loc) in locations.iter().enumerate() {
            if loc.len() != d {
                return Err(Error::shape(format!(
                    "location of sample {} has dimension {}, expected {d}",
                    ids[i],
                    loc.len()
                )));
            }
            if loc.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid(format!("location of sample {} is not finite", ids[i])));
            }
        }
        if let Some(i) = responses.iter().position(|y| !y.is_finite()) {
            return Err(Error::invalid(format!("response of sample {} is not finite", ids[i])));
        }
        Ok(SpatialDataset {
            ids,
            samples,
            responses,
            locations,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.samples[0].n_features()
    }

    pub fn dim(&self) -> usize {
        self.locations[0].len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn samples(&self) -> &[FunctionalSample] {
        &self.samples
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn locations(&self) -> &[Vec<f64>] {
        &self.locations
    }

    /// The grid shared by every sample for `feature`, if there is one.
    pub fn common_grid(&self, feature: usize) -> Result<Arc<TimeGrid>> {
        let first = Arc::clone(self.samples[0].curve(feature)?.grid());
        for (i, s) in self.samples.iter().enumerate() {
            if !s.curve(feature)?.same_grid(&first) {
                return Err(Error::shape(format!(
                    "feature {feature} of sample {} is on a different grid",
                    self.ids[i]
                )));
            }
        }
        Ok(first)
    }

    /// The rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> SpatialDataset {
        SpatialDataset {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            responses: indices.iter().map(|&i| self.responses[i]).collect(),
            locations: indices.iter().map(|&i| self.locations[i].clone()).collect(),
        }
    }

    /// Same covariates and locations, different responses.
    pub fn with_responses(&self, responses: Vec<f64>) -> Result<SpatialDataset> {
        SpatialDataset::with_ids(
            self.ids.clone(),
            self.samples.clone(),
            responses,
            self.locations.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<TimeGrid> {
        Arc::new(TimeGrid::uniform(0.0, 1.0, 3).unwrap())
    }

    #[test]
    fn curve_checks() {
        assert!(Curve::new(grid(), vec![1.0, 2.0]).is_err());
        assert!(Curve::new(grid(), vec![1.0, f64::NAN, 2.0]).is_err());
        assert!(Curve::new(grid(), vec![1.0, 2.0, 3.0]).is_ok());
    }

    #[test]
    fn dataset_checks() {
        let s = FunctionalSample::single(Curve::new(grid(), vec![0.0; 3]).unwrap());
        assert!(SpatialDataset::new(vec![s.clone()], vec![1.0, 2.0], vec![vec![0.0]]).is_err());
        assert!(SpatialDataset::new(
            vec![s.clone(), s.clone()],
            vec![1.0, 2.0],
            vec![vec![0.0], vec![0.0, 1.0]]
        )
        .is_err());
        assert!(SpatialDataset::new(vec![s.clone()], vec![f64::INFINITY], vec![vec![0.0]]).is_err());
        let ds = SpatialDataset::new(vec![s.clone(), s], vec![1.0, 2.0], vec![vec![0.0], vec![1.0]])
            .unwrap();
        assert_eq!(ds.ids(), &["1".to_string(), "2".to_string()]);
        assert_eq!(ds.subset(&[1]).responses(), &[2.0]);
    }
}
