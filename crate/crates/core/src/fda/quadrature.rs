use super::TimeGrid;
use crate::error::{Error, Result};

/// Trapezoidal quadrature weights: `sum_j w_j f(t_j)` is the trapezoid rule.
pub fn trapezoid_weights(grid: &TimeGrid) -> Vec<f64> {
    let t = grid.points();
    let m = t.len();
    let mut w = vec![0.0; m];
    for j in 0..m - 1 {
        let half = 0.5 * (t[j + 1] - t[j]);
        w[j] += half;
        w[j + 1] += half;
    }
    w
}

/// Trapezoid-rule approximation of the integral of `values` over the span of `grid`.
pub fn trapezoid_integrate(values: &[f64], grid: &TimeGrid) -> Result<f64> {
    let t = grid.points();
    if values.len() != t.len() {
        return Err(Error::shape(format!(
            "{} values on a grid of {} points",
            values.len(),
            t.len()
        )));
    }
    Ok(t.windows(2)
        .zip(values.windows(2))
        .map(|(tw, fw)| 0.5 * (tw[1] - tw[0]) * (fw[0] + fw[1]))
        .sum())
}

/// L2 inner product of two curves sampled on the same grid.
pub fn inner_product(f: &[f64], g: &[f64], grid: &TimeGrid) -> Result<f64> {
    if f.len() != g.len() {
        return Err(Error::shape(format!(
            "curves have {} and {} points",
            f.len(),
            g.len()
        )));
    }
    let prod: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
    trapezoid_integrate(&prod, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize, upper: f64) -> TimeGrid {
        TimeGrid::uniform(0.0, upper, n).unwrap()
    }

    #[test]
    fn constant_integrand() {
        let g = grid(11, 10.0);
        assert!((trapezoid_integrate(&[1.0; 11], &g).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn linear_integrand_exact_on_any_grid() {
        let g = TimeGrid::new(vec![0.0, 0.3, 1.7, 4.0, 9.1, 10.0], 0.0, 10.0).unwrap();
        let f: Vec<f64> = g.points().to_vec();
        assert!((trapezoid_integrate(&f, &g).unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn periodic_integrand_vanishes() {
        let g = grid(365, 1.0);
        let f: Vec<f64> = g.points().iter().map(|t| (2.0 * PI * t).sin()).collect();
        let coarse = trapezoid_integrate(&f, &g).unwrap();
        // Dense-grid oracle.
        let dense = grid(200_001, 1.0);
        let fd: Vec<f64> = dense.points().iter().map(|t| (2.0 * PI * t).sin()).collect();
        let oracle = trapezoid_integrate(&fd, &dense).unwrap();
        assert!(oracle.abs() < 1e-9);
        assert!(coarse.abs() < 1e-3);
    }

    #[test]
    fn weights_agree_with_rule() {
        let g = TimeGrid::new(vec![0.0, 0.1, 0.5, 0.6, 1.0], 0.0, 1.0).unwrap();
        let f = [0.3, -1.0, 2.0, 0.7, 5.0];
        let w = trapezoid_weights(&g);
        let via_w: f64 = w.iter().zip(&f).map(|(a, b)| a * b).sum();
        assert!((via_w - trapezoid_integrate(&f, &g).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn length_mismatch() {
        let g = grid(5, 1.0);
        assert!(matches!(trapezoid_integrate(&[1.0; 4], &g), Err(Error::Shape(_))));
        assert!(inner_product(&[1.0; 5], &[1.0; 4], &g).is_err());
    }

    #[test]
    fn inner_product_of_ones() {
        let g = grid(21, 10.0);
        assert!((inner_product(&[1.0; 21], &[1.0; 21], &g).unwrap() - 10.0).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn linearity(a in -5.0f64..5.0, b in -5.0f64..5.0, seed in 0u64..1000) {
            let g = grid(37, 3.0);
            let mut s = crate::rng::Stream::new(seed, 0);
            let f: Vec<f64> = (0..37).map(|_| s.uniform_range(-1.0, 1.0)).collect();
            let h: Vec<f64> = (0..37).map(|_| s.uniform_range(-1.0, 1.0)).collect();
            let comb: Vec<f64> = f.iter().zip(&h).map(|(x, y)| a * x + b * y).collect();
            let lhs = trapezoid_integrate(&comb, &g).unwrap();
            let rhs = a * trapezoid_integrate(&f, &g).unwrap() + b * trapezoid_integrate(&h, &g).unwrap();
            proptest::prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
