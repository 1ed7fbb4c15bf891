#![allow(dead_code)]

use std::sync::Arc;

use stfnn::rng::Stream;
use stfnn::{Curve, FunctionalSample, SpatialDataset, TimeGrid};

pub fn grid(points: usize) -> Arc<TimeGrid> {
    Arc::new(TimeGrid::uniform(0.0, 1.0, points).unwrap())
}

/// Curves `sum_k a_k phi_k(t)` with a few sines and cosines and random
/// coefficients, one feature per sample.
pub fn random_curves(n: usize, seed: u64, grid: &Arc<TimeGrid>) -> (Vec<FunctionalSample>, Vec<[f64; 4]>) {
    let mut rng = Stream::new(seed, 100);
    let mut samples = Vec::with_capacity(n);
    let mut coefs = Vec::with_capacity(n);
    for _ in 0..n {
        let a = [
            rng.standard_normal(),
            rng.standard_normal(),
            rng.standard_normal(),
            rng.standard_normal(),
        ];
        let values = grid
            .points()
            .iter()
            .map(|&t| basis4(t).iter().zip(&a).map(|(p, c)| p * c).sum())
            .collect();
        samples.push(FunctionalSample::single(Curve::new(grid.clone(), values).unwrap()));
        coefs.push(a);
    }
    (samples, coefs)
}

pub fn basis4(t: f64) -> [f64; 4] {
    let w = 2.0 * std::f64::consts::PI * t;
    [w.sin(), w.cos(), (2.0 * w).sin(), (2.0 * w).cos()]
}

pub fn random_locations(n: usize, seed: u64, extent: f64) -> Vec<Vec<f64>> {
    let mut rng = Stream::new(seed, 101);
    (0..n)
        .map(|_| vec![rng.uniform_range(0.0, extent), rng.uniform_range(0.0, extent)])
        .collect()
}

/// A small dataset whose response mixes a linear functional term, a
/// location effect and noise.
pub fn small_dataset(n: usize, seed: u64) -> SpatialDataset {
    let g = grid(41);
    let (samples, coefs) = random_curves(n, seed, &g);
    let locations = random_locations(n, seed, 10.0);
    let mut rng = Stream::new(seed, 102);
    let y = coefs
        .iter()
        .zip(&locations)
        .map(|(a, s)| 0.8 * a[0] - 0.5 * a[1] + (a[2]).tanh() + 0.2 * s[0] + 0.1 * rng.standard_normal())
        .collect();
    SpatialDataset::new(samples, y, locations).unwrap()
}
