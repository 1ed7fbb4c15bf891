use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{trapezoid_weights, FunctionalSample, SpatialDataset, TimeGrid};
use crate::error::{Error, Result};

/// Tolerance on the quadrature Gram matrix for a basis flagged orthonormal.
pub const ORTHONORMAL_TOL: f64 = 1e-6;

/// K functions sampled on a common grid, with the grid's quadrature weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSystem {
    grid: Arc<TimeGrid>,
    functions: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    weights: Vec<f64>,
    orthonormal: bool,
}

impl BasisSystem {
    /// A basis from explicit function values. When `orthonormal` is set the
    /// quadrature Gram matrix is checked against the identity.
    pub fn new(grid: Arc<TimeGrid>, functions: Vec<Vec<f64>>, orthonormal: bool) -> Result<Self> {
        Self::with_eigenvalues(grid, functions, Vec::new(), orthonormal)
    }

    pub fn with_eigenvalues(
        grid: Arc<TimeGrid>,
        functions: Vec<Vec<f64>>,
        eigenvalues: Vec<f64>,
        orthonormal: bool,
    ) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::invalid("a basis needs at least one function"));
        }
        if let Some(f) = functions.iter().find(|f| f.len() != grid.len()) {
            return Err(Error::shape(format!(
                "basis function has {} values on a grid of {}",
                f.len(),
                grid.len()
            )));
        }
        if !eigenvalues.is_empty() && eigenvalues.len() != functions.len() {
            return Err(Error::shape("one eigenvalue per basis function expected"));
        }
        let weights = trapezoid_weights(&grid);
        let basis = BasisSystem {
            grid,
            functions,
            eigenvalues,
            weights,
            orthonormal,
        };
        if orthonormal {
            let g = basis.gram();
            let k = basis.len();
            for a in 0..k {
                for b in 0..k {
                    let target = if a == b { 1.0 } else { 0.0 };
                    if (g[(a, b)] - target).abs() > ORTHONORMAL_TOL {
                        return Err(Error::invalid(format!(
                            "basis flagged orthonormal but <f{a}, f{b}> = {}",
                            g[(a, b)]
                        )));
                    }
                }
            }
        }
        Ok(basis)
    }

    /// `sqrt(2) sin(2 pi k t / L)`, `sqrt(2) cos(2 pi k t / L)` pairs scaled to
    /// unit L2 norm over the grid span `L`. Orthonormality is up to quadrature
    /// error, so the result is not flagged orthonormal.
    pub fn fourier(grid: Arc<TimeGrid>, k: usize) -> Result<Self> {
        let span = grid.upper() - grid.lower();
        let lower = grid.lower();
        let functions = (0..k)
            .map(|idx| {
                let freq = (idx / 2 + 1) as f64;
                grid.points()
                    .iter()
                    .map(|t| {
                        let arg = 2.0 * std::f64::consts::PI * freq * (t - lower) / span;
                        let v = if idx % 2 == 0 { arg.sin() } else { arg.cos() };
                        (2.0 / span).sqrt() * v
                    })
                    .collect()
            })
            .collect();
        BasisSystem::new(grid, functions, false)
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn functions(&self) -> &[Vec<f64>] {
        &self.functions
    }

    pub fn function(&self, k: usize) -> &[f64] {
        &self.functions[k]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Quadrature inner product of every basis function with `values`.
    pub fn project(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.weights.len() {
            return Err(Error::shape(format!(
                "curve has {} values, basis grid has {}",
                values.len(),
                self.weights.len()
            )));
        }
        Ok(self
            .functions
            .iter()
            .map(|f| {
                f.iter()
                    .zip(values)
                    .zip(&self.weights)
                    .map(|((a, b), w)| a * b * w)
                    .sum()
            })
            .collect())
    }

    /// Matrix of pairwise quadrature inner products.
    pub fn gram(&self) -> DMatrix<f64> {
        let k = self.functions.len();
        DMatrix::from_fn(k, k, |a, b| {
            self.functions[a]
                .iter()
                .zip(&self.functions[b])
                .zip(&self.weights)
                .map(|((x, y), w)| x * y * w)
                .sum()
        })
    }

    /// The first `k` functions.
    pub fn truncated(&self, k: usize) -> BasisSystem {
        let k = k.min(self.len()).max(1);
        BasisSystem {
            grid: Arc::clone(&self.grid),
            functions: self.functions[..k].to_vec(),
            eigenvalues: self.eigenvalues.iter().take(k).copied().collect(),
            weights: self.weights.clone(),
            orthonormal: self.orthonormal,
        }
    }
}

/// Result of a functional principal component analysis of one feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fpca {
    pub mean: Vec<f64>,
    /// The leading `k_selected` eigenfunctions.
    pub basis: BasisSystem,
    /// All numerically nonzero eigenvalues, nonincreasing.
    pub eigenvalues: Vec<f64>,
    /// Cumulative fraction of variance explained, one entry per eigenvalue.
    pub fve: Vec<f64>,
    pub k_selected: usize,
}

/// FPCA of feature `feature` of `dataset`.
///
/// The covariance is discretized on the shared grid and symmetrized with the
/// square-root quadrature weights, `W^1/2 C W^1/2 u = lambda u`; eigenfunctions
/// are `W^-1/2 u`, hence orthonormal under the same quadrature. Each
/// eigenfunction is signed so that its integral is positive, falling back to
/// its first clearly nonzero value when the integral vanishes.
pub fn fpca(dataset: &SpatialDataset, feature: usize, fve_cutoff: f64) -> Result<Fpca> {
    if !(fve_cutoff > 0.0 && fve_cutoff <= 1.0) {
        return Err(Error::invalid(format!("FVE cutoff {fve_cutoff} not in (0, 1]")));
    }
    let n = dataset.len();
    if n < 2 {
        return Err(Error::invalid("FPCA needs at least 2 samples"));
    }
    let grid = dataset.common_grid(feature)?;
    let m = grid.len();
    let weights = trapezoid_weights(&grid);
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();

    let mut mean = vec![0.0; m];
    for s in dataset.samples() {
        for (acc, v) in mean.iter_mut().zip(s.curve(feature)?.values()) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);

    // Rows: sqrt(w)-scaled centered curves.
    let mut centered = DMatrix::zeros(n, m);
    for (i, s) in dataset.samples().iter().enumerate() {
        for (j, v) in s.curve(feature)?.values().iter().enumerate() {
            centered[(i, j)] = (v - mean[j]) * sqrt_w[j];
        }
    }
    let mut cov = centered.tr_mul(&centered) / (n - 1) as f64;
    cov = (&cov + cov.transpose()) * 0.5;

    let energy: f64 = dataset
        .samples()
        .iter()
        .map(|s| {
            s.curve(feature)
                .map(|c| c.values().iter().zip(&weights).map(|(v, w)| v * v * w).sum::<f64>())
                .unwrap_or(0.0)
        })
        .sum::<f64>()
        / n as f64;
    let total_var = cov.trace();
    if !(total_var > 1e-24 * (1.0 + energy)) {
        return Err(Error::Degenerate(format!(
            "feature {feature} has zero total variance"
        )));
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let lmax = eig.eigenvalues[order[0]].max(0.0);
    let rank_cut = 1e-12 * lmax;
    let kept: Vec<usize> = order
        .into_iter()
        .take(n - 1)
        .filter(|&k| eig.eigenvalues[k] > rank_cut)
        .collect();
    let eigenvalues: Vec<f64> = kept.iter().map(|&k| eig.eigenvalues[k]).collect();
    let total: f64 = eigenvalues.iter().sum();
    let mut acc = 0.0;
    let fve: Vec<f64> = eigenvalues
        .iter()
        .map(|l| {
            acc += l;
            acc / total
        })
        .collect();
    let k_selected = fve
        .iter()
        .position(|&f| f >= fve_cutoff - 1e-12)
        .map(|p| p + 1)
        .unwrap_or(fve.len());

    let functions: Vec<Vec<f64>> = kept
        .iter()
        .take(k_selected)
        .map(|&k| {
            let col = eig.eigenvectors.column(k);
            let mut f: Vec<f64> = col.iter().zip(&sqrt_w).map(|(u, sw)| u / sw).collect();
            if sign_of(&f, &weights) < 0.0 {
                f.iter_mut().for_each(|v| *v = -*v);
            }
            f
        })
        .collect();
    let basis = BasisSystem::with_eigenvalues(
        Arc::clone(&grid),
        functions,
        eigenvalues[..k_selected].to_vec(),
        true,
    )?;
    Ok(Fpca {
        mean,
        basis,
        eigenvalues,
        fve,
        k_selected,
    })
}

fn sign_of(f: &[f64], weights: &[f64]) -> f64 {
    let integral: f64 = f.iter().zip(weights).map(|(v, w)| v * w).sum();
    let scale: f64 = f.iter().zip(weights).map(|(v, w)| v.abs() * w).sum();
    if integral.abs() > 1e-8 * scale {
        return integral.signum();
    }
    let peak = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    f.iter()
        .find(|v| v.abs() > 1e-8 * peak)
        .map(|v| v.signum())
        .unwrap_or(1.0)
}

/// Scores of a curve: inner products of `values - mean` with each basis function.
pub fn project_scores(values: &[f64], mean: &[f64], basis: &BasisSystem) -> Result<Vec<f64>> {
    if values.len() != mean.len() {
        return Err(Error::shape(format!(
            "curve has {} values, mean curve has {}",
            values.len(),
            mean.len()
        )));
    }
    let centered: Vec<f64> = values.iter().zip(mean).map(|(v, m)| v - m).collect();
    basis.project(&centered)
}

/// The parameter function `sum_k beta_k psi_k(t)` on the basis grid.
pub fn evaluate_param_function(beta: &[f64], basis: &BasisSystem) -> Result<Vec<f64>> {
    if beta.len() != basis.len() {
        return Err(Error::shape(format!(
            "{} coefficients for a basis of {}",
            beta.len(),
            basis.len()
        )));
    }
    let mut out = vec![0.0; basis.grid().len()];
    for (b, f) in beta.iter().zip(basis.functions()) {
        for (o, v) in out.iter_mut().zip(f) {
            *o += b * v;
        }
    }
    Ok(out)
}

/// The FPCA basis and mean curve of one feature, with the mean's projections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureBasis {
    pub mean: Vec<f64>,
    pub basis: BasisSystem,
    pub mean_projection: Vec<f64>,
}

/// Maps functional samples to the concatenated per-feature basis coordinates
/// that feed functional neurons and linear heads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreEncoder {
    features: Vec<FeatureBasis>,
}

impl ScoreEncoder {
    pub fn new(features: Vec<FeatureBasis>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::invalid("encoder needs at least one feature"));
        }
        Ok(ScoreEncoder { features })
    }

    /// Run FPCA on every feature of `dataset`.
    pub fn fit(dataset: &SpatialDataset, fve_cutoff: f64) -> Result<Self> {
        let features = (0..dataset.n_features())
            .map(|r| {
                let f = fpca(dataset, r, fve_cutoff)?;
                let mean_projection = f.basis.project(&f.mean)?;
                Ok(FeatureBasis {
                    mean: f.mean,
                    basis: f.basis,
                    mean_projection,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ScoreEncoder::new(features)
    }

    pub fn features(&self) -> &[FeatureBasis] {
        &self.features
    }

    /// Total number of coordinates, the sum of per-feature basis sizes.
    pub fn dim(&self) -> usize {
        self.features.iter().map(|f| f.basis.len()).sum()
    }

    /// Uncentered projections `int psi_k(t) X(t) dt`, concatenated over features.
    pub fn projections(&self, sample: &FunctionalSample) -> Result<Vec<f64>> {
        if sample.n_features() != self.features.len() {
            return Err(Error::shape(format!(
                "sample has {} features, encoder expects {}",
                sample.n_features(),
                self.features.len()
            )));
        }
        let mut out = Vec::with_capacity(self.dim());
        for (f, c) in self.features.iter().zip(sample.curves()) {
            if !c.same_grid(f.basis.grid()) {
                return Err(Error::shape("sample curve is not on the basis grid"));
            }
            out.extend(f.basis.project(c.values())?);
        }
        Ok(out)
    }

    /// Projections of the mean curves, concatenated over features.
    pub fn mean_projection(&self) -> Vec<f64> {
        self.features
            .iter()
            .flat_map(|f| f.mean_projection.iter().copied())
            .collect()
    }

    /// Centered FPCA scores, concatenated over features.
    pub fn scores(&self, sample: &FunctionalSample) -> Result<Vec<f64>> {
        let mut p = self.projections(sample)?;
        for (v, m) in p.iter_mut().zip(self.mean_projection()) {
            *v -= m;
        }
        Ok(p)
    }
}
