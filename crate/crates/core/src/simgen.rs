//! Seeded generators for the two simulation designs.
//!
//! Subjects sit on a `P x Q` grid of cells (row-major, 1-based indices) and
//! carry one functional covariate on `[0, 10]`:
//!
//! `X_i(t) = cos(U_i) phi_1 + sin(U_i) phi_2 + cos(U'_i) phi_3 + sin(U'_i) phi_4`
//!
//! with `phi = sqrt(2) {sin 2 pi t, cos 2 pi t, sin 4 pi t, cos 4 pi t}` and
//! `U, U' ~ Uniform[0, 2 pi)`. Responses share the nonlinear term
//! `g_i = int_0^10 cos(t - X_i(t) - 5) dt` plus `N(0, sigma^2)` noise:
//!
//! * heterogeneity: `Y_i = alpha(p_i, q_i) + g_i + eps_i`, `alpha = 1 + (p + q) / 6`;
//! * dependency: `(I - rho M) Y = g + eps` with `M` the rook matrix of the grid.
//!
//! The phases come from stream [`streams::SIM_PHASE`] (two uniforms per
//! subject, in subject order) and the noise from [`streams::SIM_NOISE`].

use std::f64::consts::PI;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fda::{trapezoid_integrate, Curve, FunctionalSample, SpatialDataset, TimeGrid};
use crate::kernels::rook_matrix;
use crate::linalg;
use crate::rng::{streams, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Heterogeneity,
    Dependency,
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "heterogeneity" | "sim1" | "i" => Ok(Scenario::Heterogeneity),
            "dependency" | "sim2" | "ii" => Ok(Scenario::Dependency),
            other => Err(Error::invalid(format!("unknown scenario '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub rows: usize,
    pub cols: usize,
    pub t_lower: f64,
    pub t_upper: f64,
    pub grid_points: usize,
    pub sigma: f64,
    pub rho: f64,
    pub scenario: Scenario,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            rows: 10,
            cols: 30,
            t_lower: 0.0,
            t_upper: 10.0,
            grid_points: 201,
            sigma: 0.5,
            rho: 0.25,
            scenario: Scenario::Heterogeneity,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        SimConfig {
            scenario,
            seed,
            ..Default::default()
        }
    }

    pub fn n(&self) -> usize {
        self.rows * self.cols
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::invalid("grid needs at least one row and column"));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::invalid("noise sd must be nonnegative"));
        }
        if self.grid_points < 2 {
            return Err(Error::invalid("time grid needs at least 2 points"));
        }
        if !self.rho.is_finite() {
            return Err(Error::invalid("rho must be finite"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<TimeGrid>> {
        Ok(Arc::new(TimeGrid::uniform(self.t_lower, self.t_upper, self.grid_points)?))
    }
}

/// Cell `(row, col)` of subject `i` (1-based) on a grid with `q` columns.
pub fn cell_indices(i: usize, p: usize, q: usize) -> Result<(usize, usize)> {
    if i == 0 || i > p * q {
        return Err(Error::invalid(format!("subject {i} outside 1..={}", p * q)));
    }
    Ok(((i - 1) / q + 1, (i - 1) % q + 1))
}

pub fn alpha(p: usize, q: usize) -> f64 {
    1.0 + (p + q) as f64 / 6.0
}

pub fn fourier_basis(t: f64) -> [f64; 4] {
    let s = 2f64.sqrt();
    [
        s * (2.0 * PI * t).sin(),
        s * (2.0 * PI * t).cos(),
        s * (4.0 * PI * t).sin(),
        s * (4.0 * PI * t).cos(),
    ]
}

/// Simulated covariates together with their generating coefficients.
#[derive(Clone, Debug)]
pub struct Covariates {
    pub grid: Arc<TimeGrid>,
    pub samples: Vec<FunctionalSample>,
    pub coefficients: Vec<[f64; 4]>,
}

pub fn generate_covariates(config: &SimConfig) -> Result<Covariates> {
    config.validate()?;
    let grid = config.grid()?;
    let basis: Vec<[f64; 4]> = grid.points().iter().map(|&t| fourier_basis(t)).collect();
    let mut phases = Stream::new(config.seed, streams::SIM_PHASE);
    let mut samples = Vec::with_capacity(config.n());
    let mut coefficients = Vec::with_capacity(config.n());
    for _ in 0..config.n() {
        let u = 2.0 * PI * phases.uniform();
        let u2 = 2.0 * PI * phases.uniform();
        let xi = [u.cos(), u.sin(), u2.cos(), u2.sin()];
        let values = basis
            .iter()
            .map(|phi| phi.iter().zip(&xi).map(|(a, b)| a * b).sum())
            .collect();
        samples.push(FunctionalSample::single(Curve::new(Arc::clone(&grid), values)?));
        coefficients.push(xi);
    }
    Ok(Covariates {
        grid,
        samples,
        coefficients,
    })
}

/// `int cos(t - X(t) - 5) dt` by the trapezoid rule on the covariate grid.
pub fn nonlinear_term(sample: &FunctionalSample) -> Result<f64> {
    let c = sample.curve(0)?;
    let integrand: Vec<f64> = c
        .grid()
        .points()
        .iter()
        .zip(c.values())
        .map(|(t, x)| (t - x - 5.0).cos())
        .collect();
    trapezoid_integrate(&integrand, c.grid())
}

fn noise(config: &SimConfig) -> Vec<f64> {
    let mut s = Stream::new(config.seed, streams::SIM_NOISE);
    (0..config.n()).map(|_| config.sigma * s.standard_normal()).collect()
}

pub fn generate_response_heterogeneity(covariates: &Covariates, config: &SimConfig) -> Result<Vec<f64>> {
    let eps = noise(config);
    covariates
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (p, q) = cell_indices(i + 1, config.rows, config.cols)?;
            Ok(alpha(p, q) + nonlinear_term(s)? + eps[i])
        })
        .collect()
}

/// Solves `(I - rho M) Y = Y~` with `Y~_i = g_i + eps_i`.
pub fn generate_response_dependency(covariates: &Covariates, config: &SimConfig) -> Result<Vec<f64>> {
    let eps = noise(config);
    let base = covariates
        .samples
        .iter()
        .zip(&eps)
        .map(|(s, e)| Ok(nonlinear_term(s)? + e))
        .collect::<Result<Vec<f64>>>()?;
    solve_autoregression(&base, config.rows, config.cols, config.rho)
}

/// `Y = (I - rho M)^-1 base` by LU solve, after checking `rho * lambda_max(M) < 1`.
pub fn solve_autoregression(base: &[f64], p: usize, q: usize, rho: f64) -> Result<Vec<f64>> {
    let n = p * q;
    if base.len() != n {
        return Err(Error::shape(format!("{} values for a {p}x{q} grid", base.len())));
    }
    let m = rook_matrix(p, q);
    let radius = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    if !(rho.abs() * radius < 1.0) {
        return Err(Error::Singular(format!(
            "rho = {rho} with spectral radius {radius:.4} makes I - rho M non-invertible or unstable"
        )));
    }
    let a = nalgebra::DMatrix::identity(n, n) - m * rho;
    let y = linalg::solve(&a, &DVector::from_column_slice(base))?;
    Ok(y.iter().copied().collect())
}

/// Planar coordinates of subject `i`: its (row, column) cell indices.
pub fn locations(config: &SimConfig) -> Result<Vec<Vec<f64>>> {
    (1..=config.n())
        .map(|i| {
            let (p, q) = cell_indices(i, config.rows, config.cols)?;
            Ok(vec![p as f64, q as f64])
        })
        .collect()
}

/// The full simulated dataset for `config.scenario`.
pub fn generate(config: &SimConfig) -> Result<SpatialDataset> {
    let cov = generate_covariates(config)?;
    let y = match config.scenario {
        Scenario::Heterogeneity => generate_response_heterogeneity(&cov, config)?,
        Scenario::Dependency => generate_response_dependency(&cov, config)?,
    };
    SpatialDataset::new(cov.samples, y, locations(config)?)
}
