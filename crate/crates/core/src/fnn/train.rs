use serde::{Deserialize, Serialize};

use super::{Network, NetworkParameters, NetworkSpec};
use crate::error::{Error, Result};

/// One training example: basis coordinates of the functional covariates,
/// extra scalar covariates, response and a nonnegative loss weight.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRow {
    pub inputs: Vec<f64>,
    pub extras: Vec<f64>,
    pub target: f64,
    pub weight: f64,
}

impl TrainingRow {
    pub fn new(inputs: Vec<f64>, extras: Vec<f64>, target: f64) -> Self {
        TrainingRow {
            inputs,
            extras,
            target,
            weight: 1.0,
        }
    }
}

/// Full-batch Adam settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub seed: u64,
    /// Stop when the best loss improved by less than this fraction over `patience` iterations.
    pub tolerance: f64,
    pub patience: usize,
    pub init_scale: f64,
    pub checkpoint_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            max_iterations: 2000,
            seed: 0,
            tolerance: 1e-6,
            patience: 50,
            init_scale: 1.0,
            checkpoint_every: 50,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("iteration budget must be positive"));
        }
        if !(self.init_scale > 0.0) || self.patience == 0 || self.checkpoint_every == 0 {
            return Err(Error::invalid("init scale, patience and checkpoint interval must be positive"));
        }
        Ok(())
    }
}

/// Per-column affine standardization `(x - center) / scale`. Columns without
/// spread are only centered.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            center: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Weighted mean and standard deviation of each column. Zero-weight rows
    /// contribute exact zeros to every sum.
    pub fn fit<'a>(columns: usize, rows: impl Iterator<Item = (&'a [f64], f64)> + Clone) -> Self {
        let mut total = 0.0;
        let mut center = vec![0.0; columns];
        for (x, w) in rows.clone() {
            total += w;
            for (c, v) in center.iter_mut().zip(x) {
                *c += w * v;
            }
        }
        center.iter_mut().for_each(|c| *c /= total);
        let mut var = vec![0.0; columns];
        for (x, w) in rows {
            for ((s, v), c) in var.iter_mut().zip(x).zip(&center) {
                *s += w * (v - c) * (v - c);
            }
        }
        let scale = var
            .iter()
            .zip(&center)
            .map(|(s, c)| {
                let sd = (s / total).sqrt();
                if sd > 1e-12 * (1.0 + c.abs()) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { center, scale }
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, v), (c, s)) in out.iter_mut().zip(x).zip(self.center.iter().zip(&self.scale)) {
            *o = (v - c) / s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        out
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

/// A trained network with the standardizations used during training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedNetwork {
    pub params: NetworkParameters,
    pub input_scaler: Standardizer,
    pub extra_scaler: Standardizer,
    pub target_scaler: Standardizer,
    /// Best training loss (standardized MSE) at every checkpoint; nonincreasing.
    pub checkpoints: Vec<f64>,
    pub iterations: usize,
    pub final_loss: f64,
}

impl TrainedNetwork {
    pub fn spec(&self) -> &NetworkSpec {
        self.params.spec()
    }

    pub fn predict(&self, inputs: &[f64], extras: &[f64]) -> Result<f64> {
        let mut net = Network::for_params(&self.params);
        self.predict_with(&mut net, inputs, extras)
    }

    pub fn predict_with(&self, net: &mut Network, inputs: &[f64], extras: &[f64]) -> Result<f64> {
        if inputs.len() != self.input_scaler.dim() || extras.len() != self.extra_scaler.dim() {
            return Err(Error::shape(format!(
                "prediction inputs ({}, {}) do not match the trained network ({}, {})",
                inputs.len(),
                extras.len(),
                self.input_scaler.dim(),
                self.extra_scaler.dim()
            )));
        }
        let x = self.input_scaler.apply(inputs);
        let e = self.extra_scaler.apply(extras);
        let f = net.forward(self.params.as_slice(), &x, &e)?;
        Ok(self.target_scaler.center[0] + self.target_scaler.scale[0] * f)
    }
}

/// Train by full-batch Adam on the weighted mean squared error of
/// standardized targets. Inputs, extras and targets are z-scored with
/// weighted training statistics. Returns the parameters with the lowest
/// loss seen.
pub fn train(rows: &[TrainingRow], spec: &NetworkSpec, config: &TrainConfig) -> Result<TrainedNetwork> {
    spec.validate()?;
    config.validate()?;
    let first = rows.first().ok_or_else(|| Error::invalid("no training rows"))?;
    let dim = first.inputs.len();
    let ne = spec.extra_scalar_inputs;
    for (i, r) in rows.iter().enumerate() {
        if r.inputs.len() != dim || r.extras.len() != ne {
            return Err(Error::shape(format!(
                "training row {i} has shape ({}, {}), expected ({dim}, {ne})",
                r.inputs.len(),
                r.extras.len()
            )));
        }
        if !(r.weight >= 0.0 && r.weight.is_finite()) {
            return Err(Error::invalid(format!("training row {i} has weight {}", r.weight)));
        }
        if !r.target.is_finite() || r.inputs.iter().chain(&r.extras).any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("training row {i} is not finite")));
        }
    }
    let total_weight: f64 = rows.iter().map(|r| r.weight).sum();
    if !(total_weight > 0.0) {
        return Err(Error::invalid("all training rows have zero weight"));
    }

    let active: Vec<&TrainingRow> = rows.iter().filter(|r| r.weight > 0.0).collect();
    let input_scaler = Standardizer::fit(dim, active.iter().map(|r| (r.inputs.as_slice(), r.weight)));
    let extra_scaler = Standardizer::fit(ne, active.iter().map(|r| (r.extras.as_slice(), r.weight)));
    let targets: Vec<[f64; 1]> = active.iter().map(|r| [r.target]).collect();
    let target_scaler = Standardizer::fit(1, targets.iter().zip(&active).map(|(t, r)| (&t[..], r.weight)));

    let n = active.len();
    let mut xs = vec![0.0; n * dim];
    let mut es = vec![0.0; n * ne];
    let mut ts = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for (i, r) in active.iter().enumerate() {
        input_scaler.apply_into(&r.inputs, &mut xs[i * dim..(i + 1) * dim]);
        extra_scaler.apply_into(&r.extras, &mut es[i * ne..(i + 1) * ne]);
        ts[i] = (r.target - target_scaler.center[0]) / target_scaler.scale[0];
        ws[i] = r.weight / total_weight;
    }

    let mut params = NetworkParameters::init(spec, dim, config.seed, config.init_scale);
    let mut net = Network::for_params(&params);
    let np = params.len();
    let mut grad = vec![0.0; np];
    let mut m = vec![0.0; np];
    let mut v = vec![0.0; np];
    let mut best = params.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_history: Vec<f64> = Vec::with_capacity(config.max_iterations);
    let mut checkpoints = Vec::new();
    let mut iterations = 0;

    for it in 0..config.max_iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        {
            let p = params.as_slice();
            for i in 0..n {
                let x = &xs[i * dim..(i + 1) * dim];
                let f = net.forward_unchecked(p, x, &es[i * ne..(i + 1) * ne]);
                let r = f - ts[i];
                loss += ws[i] * r * r;
                net.accumulate_gradient(p, x, ws[i] * r, &mut grad);
            }
        }
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::TrainingFailure { iteration: it, loss });
        }
        iterations = it + 1;
        if loss < best_loss {
            best_loss = loss;
            best.as_mut_slice().copy_from_slice(params.as_slice());
        }
        best_history.push(best_loss);
        if it % config.checkpoint_every == 0 {
            checkpoints.push(best_loss);
        }
        if best_loss == 0.0 {
            break;
        }
        if it >= config.patience {
            let before = best_history[it - config.patience];
            if (before - best_loss) < config.tolerance * before {
                break;
            }
        }
        let t = (it + 1) as i32;
        let c1 = 1.0 - config.beta1.powi(t);
        let c2 = 1.0 - config.beta2.powi(t);
        for (((p, g), mi), vi) in params.as_mut_slice().iter_mut().zip(&grad).zip(&mut m).zip(&mut v) {
            *mi = config.beta1 * *mi + (1.0 - config.beta1) * g;
            *vi = config.beta2 * *vi + (1.0 - config.beta2) * g * g;
            *p -= config.learning_rate * (*mi / c1) / ((*vi / c2).sqrt() + config.epsilon);
        }
    }
    if checkpoints.last() != Some(&best_loss) {
        checkpoints.push(best_loss);
    }

    Ok(TrainedNetwork {
        params: best,
        input_scaler,
        extra_scaler,
        target_scaler,
        checkpoints,
        iterations,
        final_loss: best_loss,
    })
}
