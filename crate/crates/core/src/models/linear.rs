use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// `intercept + coefficients . inputs + extra_coefficients . extras`.
///
/// Extra columns without spread in the training design are dropped and keep
/// a zero coefficient, so a constant coordinate does not make the fit singular.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub extra_coefficients: Vec<f64>,
}

impl LinearHead {
    pub fn predict(&self, inputs: &[f64], extras: &[f64]) -> Result<f64> {
        if inputs.len() != self.coefficients.len() || extras.len() != self.extra_coefficients.len() {
            return Err(Error::shape(format!(
                "linear head expects ({}, {}) inputs, got ({}, {})",
                self.coefficients.len(),
                self.extra_coefficients.len(),
                inputs.len(),
                extras.len()
            )));
        }
        Ok(self.intercept
            + dot(&self.coefficients, inputs)
            + dot(&self.extra_coefficients, extras))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weighted least squares fit; `weights = None` is ordinary least squares.
/// Solved as OLS on rows scaled by `sqrt(w)` (intercept column included).
pub fn fit_linear(
    inputs: &[Vec<f64>],
    extras: &[Vec<f64>],
    y: &[f64],
    weights: Option<&[f64]>,
) -> Result<LinearHead> {
    let n = y.len();
    if inputs.len() != n || extras.len() != n || weights.is_some_and(|w| w.len() != n) {
        return Err(Error::shape("linear design rows do not match the response"));
    }
    if n == 0 {
        return Err(Error::invalid("no rows to fit"));
    }
    let p = inputs[0].len();
    let e = extras[0].len();
    if inputs.iter().any(|r| r.len() != p) || extras.iter().any(|r| r.len() != e) {
        return Err(Error::shape("ragged linear design"));
    }
    if let Some(w) = weights {
        if w.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("negative regression weight"));
        }
    }
    let active: Vec<usize> = (0..e)
        .filter(|&j| {
            let first = extras[0][j];
            extras.iter().any(|r| r[j] != first)
        })
        .collect();
    let cols = 1 + p + active.len();
    if n <= cols {
        return Err(Error::Singular(format!("{n} rows for {cols} coefficients")));
    }
    let mut z = DMatrix::zeros(n, cols);
    let mut rhs = DVector::zeros(n);
    for i in 0..n {
        let s = weights.map_or(1.0, |w| w[i].sqrt());
        z[(i, 0)] = s;
        for j in 0..p {
            z[(i, 1 + j)] = s * inputs[i][j];
        }
        for (k, &j) in active.iter().enumerate() {
            z[(i, 1 + p + k)] = s * extras[i][j];
        }
        rhs[i] = s * y[i];
    }
    let b = linalg::least_squares(&z, &rhs)?;
    let mut extra_coefficients = vec![0.0; e];
    for (k, &j) in active.iter().enumerate() {
        extra_coefficients[j] = b[1 + p + k];
    }
    Ok(LinearHead {
        intercept: b[0],
        coefficients: b.iter().skip(1).take(p).copied().collect(),
        extra_coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_recovery() {
        let mut s = crate::rng::Stream::new(1, 0);
        let inputs: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| s.uniform_range(-1.0, 1.0)).collect()).collect();
        let y: Vec<f64> = inputs.iter().map(|x| 0.5 + 2.0 * x[0] - x[1] + 0.25 * x[2]).collect();
        let h = fit_linear(&inputs, &vec![vec![]; 30], &y, None).unwrap();
        for (x, yi) in inputs.iter().zip(&y) {
            assert!((h.predict(x, &[]).unwrap() - yi).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_extra_column_is_dropped() {
        let mut s = crate::rng::Stream::new(2, 0);
        let inputs: Vec<Vec<f64>> = (0..20).map(|_| vec![s.uniform_range(-1.0, 1.0)]).collect();
        let y: Vec<f64> = inputs.iter().map(|x| 1.0 + x[0] + 0.1 * s.standard_normal()).collect();
        let plain = fit_linear(&inputs, &vec![vec![]; 20], &y, None).unwrap();
        let with = fit_linear(&inputs, &vec![vec![3.0, 4.0]; 20], &y, None).unwrap();
        assert_eq!(with.extra_coefficients, vec![0.0, 0.0]);
        for x in &inputs {
            let a = plain.predict(x, &[]).unwrap();
            let b = with.predict(x, &[3.0, 4.0]).unwrap();
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn too_few_rows() {
        let inputs = vec![vec![1.0, 2.0], vec![0.0, 1.0]];
        assert!(matches!(
            fit_linear(&inputs, &vec![vec![]; 2], &[1.0, 2.0], None),
            Err(Error::Singular(_))
        ));
    }
}
