//! The estimators: functional linear models and functional neural networks,
//! each in a plain, spatial-covariate, geographically weighted and spatial
//! autoregressive variant.
//!
//! All estimators share one representation of the functional covariates:
//! FPCA bases fitted on the training curves (see [`ScoreEncoder`]). Linear
//! heads and functional neurons act on the centered basis coordinates.
//!
//! Geographically weighted kinds fit one model per regression point on
//! `sqrt(w)`-scaled curves and responses. Since basis projections are linear
//! in the curve, the scaled curve's coordinates are `sqrt(w) c - c_mean`
//! where `c` are the raw projections and `c_mean` those of the mean curve.
//!
//! Autoregressive kinds feed the row-normalized neighbour average of the
//! training responses as one extra scalar covariate.

mod gw;
mod linear;
mod sar;
mod select;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fda::{FunctionalSample, ScoreEncoder, SpatialDataset};
use crate::fnn::{self, NetworkSpec, TrainConfig, TrainedNetwork, TrainingRow};
use crate::kernels::{KernelFamily, KernelFlavor, KernelSpec, SarWeights};

pub use gw::{fit_gwflm, fit_gwfnn, gw_training_rows, transform_gw_data};
pub use linear::{fit_linear, LinearHead};
pub use sar::{fit_sarflm, fit_sarfnn, sar_covariate_out_of_sample};
pub use select::{default_bandwidth_grid, select_bandwidth, BandwidthScore, BandwidthSelection};

pub const DEFAULT_FVE_CUTOFF: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Flm,
    FlmSp,
    Gwflm,
    Sarflm,
    Fnn,
    FnnSp,
    Gwfnn,
    Sarfnn,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 8] = [
        EstimatorKind::Flm,
        EstimatorKind::FlmSp,
        EstimatorKind::Gwflm,
        EstimatorKind::Sarflm,
        EstimatorKind::Fnn,
        EstimatorKind::FnnSp,
        EstimatorKind::Gwfnn,
        EstimatorKind::Sarfnn,
    ];

    pub fn is_neural(self) -> bool {
        matches!(
            self,
            EstimatorKind::Fnn | EstimatorKind::FnnSp | EstimatorKind::Gwfnn | EstimatorKind::Sarfnn
        )
    }

    pub fn is_gw(self) -> bool {
        matches!(self, EstimatorKind::Gwflm | EstimatorKind::Gwfnn)
    }

    pub fn is_sar(self) -> bool {
        matches!(self, EstimatorKind::Sarflm | EstimatorKind::Sarfnn)
    }

    pub fn kernel_flavor(self) -> Option<KernelFlavor> {
        if self.is_gw() {
            Some(KernelFlavor::Gw)
        } else if self.is_sar() {
            Some(KernelFlavor::Sar)
        } else {
            None
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Flm => "FLM",
            EstimatorKind::FlmSp => "FLM_SP",
            EstimatorKind::Gwflm => "GWFLM",
            EstimatorKind::Sarflm => "SARFLM",
            EstimatorKind::Fnn => "FNN",
            EstimatorKind::FnnSp => "FNN_SP",
            EstimatorKind::Gwfnn => "GWFNN",
            EstimatorKind::Sarfnn => "SARFNN",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_uppercase().replace('-', "_");
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == key || k.name().replace('_', "") == key)
            .ok_or_else(|| Error::invalid(format!("unknown estimator '{s}'")))
    }
}

/// Split a label such as `GWFNN_Gaussian` or `FLM_SP` into kind and kernel.
pub fn parse_label(label: &str) -> Result<(EstimatorKind, Option<KernelFamily>)> {
    if let Ok(kind) = label.parse::<EstimatorKind>() {
        return Ok((kind, None));
    }
    let (head, tail) = label
        .split_once(['_', ':'])
        .ok_or_else(|| Error::invalid(format!("unknown estimator '{label}'")))?;
    let kind: EstimatorKind = head.parse()?;
    let family: KernelFamily = tail.parse()?;
    Ok((kind, Some(family)))
}

/// What to fit: the estimator kind, its kernel (spatial kinds), its network
/// (neural kinds) and the FPCA cutoff. A missing bandwidth means "select by
/// cross-validation" and must be resolved before fitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub kernel_family: Option<KernelFamily>,
    pub bandwidth: Option<f64>,
    pub network: Option<NetworkSpec>,
    pub fve_cutoff: f64,
    pub train: TrainConfig,
}

impl EstimatorSpec {
    /// Defaults: 4 functional neurons and one hidden layer of 2 for neural
    /// kinds, FVE cutoff 0.99, no bandwidth.
    pub fn new(kind: EstimatorKind, kernel_family: Option<KernelFamily>) -> Result<Self> {
        let network = if kind.is_neural() {
            Some(NetworkSpec::new(4, &[2], 0)?)
        } else {
            None
        };
        let spec = EstimatorSpec {
            kind,
            kernel_family,
            bandwidth: None,
            network,
            fve_cutoff: DEFAULT_FVE_CUTOFF,
            train: TrainConfig::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Defaults for a label such as `SARFNN_Nearest`.
    pub fn from_label(label: &str) -> Result<Self> {
        let (kind, family) = parse_label(label)?;
        EstimatorSpec::new(kind, family)
    }

    pub fn with_bandwidth(mut self, h: f64) -> Result<Self> {
        self.bandwidth = Some(h);
        self.validate()?;
        Ok(self)
    }

    pub fn with_network(mut self, network: NetworkSpec) -> Result<Self> {
        self.network = Some(network);
        self.validate()?;
        Ok(self)
    }

    pub fn with_train(mut self, train: TrainConfig) -> Self {
        self.train = train;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let spatial = self.kind.is_gw() || self.kind.is_sar();
        if spatial != self.kernel_family.is_some() {
            return Err(Error::invalid(format!(
                "{} {} a kernel",
                self.kind,
                if spatial { "needs" } else { "does not take" }
            )));
        }
        if self.kind.is_neural() != self.network.is_some() {
            return Err(Error::invalid(format!(
                "{} {} a network spec",
                self.kind,
                if self.kind.is_neural() { "needs" } else { "does not take" }
            )));
        }
        if self.kind.is_gw() && self.kernel_family == Some(KernelFamily::Nearest) {
            return Err(Error::invalid("the nearest kernel is only defined for SAR estimators"));
        }
        if let Some(h) = self.bandwidth {
            if !spatial {
                return Err(Error::invalid(format!("{} does not take a bandwidth", self.kind)));
            }
            self.kernel_with(h)?;
        }
        if !(self.fve_cutoff > 0.0 && self.fve_cutoff <= 1.0) {
            return Err(Error::invalid("FVE cutoff must lie in (0, 1]"));
        }
        if let Some(n) = &self.network {
            n.validate()?;
        }
        self.train.validate()
    }

    /// Display label, e.g. `GWFNN_Gaussian`.
    pub fn label(&self) -> String {
        match self.kernel_family {
            None => self.kind.name().to_string(),
            Some(f) => {
                let fam = match f {
                    KernelFamily::Gaussian => "Gaussian",
                    KernelFamily::Exponential => "Expo",
                    KernelFamily::DoublePower => "DoublePower",
                    KernelFamily::Nearest => "Nearest",
                };
                format!("{}_{fam}", self.kind.name())
            }
        }
    }

    pub fn needs_bandwidth(&self) -> bool {
        self.kernel_family.is_some() && self.bandwidth.is_none()
    }

    fn kernel_with(&self, h: f64) -> Result<KernelSpec> {
        let family = self
            .kernel_family
            .ok_or_else(|| Error::invalid(format!("{} has no kernel", self.kind)))?;
        let flavor = self.kind.kernel_flavor().expect("spatial kinds have a flavor");
        KernelSpec::new(family, h, flavor)
    }

    /// The concrete kernel; fails when the bandwidth is still unresolved.
    pub fn kernel(&self) -> Result<KernelSpec> {
        let h = self
            .bandwidth
            .ok_or_else(|| Error::invalid(format!("{} needs a bandwidth", self.label())))?;
        self.kernel_with(h)
    }

    /// The network with the extra-input count implied by the kind.
    pub fn network_for(&self, dim: usize) -> Result<NetworkSpec> {
        let net = self
            .network
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("{} has no network", self.kind)))?;
        let extra = match self.kind {
            EstimatorKind::FnnSp => dim,
            EstimatorKind::Sarfnn => 1,
            _ => 0,
        };
        Ok(net.with_extra_inputs(extra))
    }
}

/// Whether geographically weighted fits also estimate one model per
/// training location (needed for in-sample prediction only).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitMode {
    Full,
    OutOfSampleOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Fit {
    Linear(LinearHead),
    Network(TrainedNetwork),
    LocalLinear(Vec<LinearHead>),
    LocalNetwork(Vec<TrainedNetwork>),
    /// Geographically weighted model without per-location fits.
    Deferred,
}

/// A fitted estimator together with everything its predictors need: the
/// FPCA encoder, training locations, responses and basis projections, and
/// the SAR weight matrix for autoregressive kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    spec: EstimatorSpec,
    encoder: ScoreEncoder,
    locations: Vec<Vec<f64>>,
    responses: Vec<f64>,
    projections: Vec<Vec<f64>>,
    sar: Option<SarWeights>,
    fit: Fit,
}

/// Per-sample quantities every estimator starts from.
pub(crate) struct Prepared {
    pub encoder: ScoreEncoder,
    pub projections: Vec<Vec<f64>>,
    pub scores: Vec<Vec<f64>>,
}

pub(crate) fn prepare(dataset: &SpatialDataset, fve_cutoff: f64) -> Result<Prepared> {
    let encoder = ScoreEncoder::fit(dataset, fve_cutoff)?;
    let projections = dataset
        .samples()
        .iter()
        .map(|s| encoder.projections(s))
        .collect::<Result<Vec<_>>>()?;
    let mean = encoder.mean_projection();
    let scores = projections
        .iter()
        .map(|p| p.iter().zip(&mean).map(|(a, b)| a - b).collect())
        .collect();
    Ok(Prepared {
        encoder,
        projections,
        scores,
    })
}

fn extras_for(kind: EstimatorKind, location: &[f64], lag: Option<f64>) -> Vec<f64> {
    match kind {
        EstimatorKind::FlmSp | EstimatorKind::FnnSp => location.to_vec(),
        EstimatorKind::Sarflm | EstimatorKind::Sarfnn => vec![lag.unwrap_or(0.0)],
        _ => Vec::new(),
    }
}

pub(crate) fn network_rows(inputs: &[Vec<f64>], extras: &[Vec<f64>], y: &[f64]) -> Vec<TrainingRow> {
    inputs
        .iter()
        .zip(extras)
        .zip(y)
        .map(|((x, e), t)| TrainingRow::new(x.clone(), e.clone(), *t))
        .collect()
}

/// Ordinary least squares of Y on FPCA scores of all features plus an intercept.
pub fn fit_flm(dataset: &SpatialDataset, fve_cutoff: f64) -> Result<TrainedModel> {
    let spec = EstimatorSpec {
        fve_cutoff,
        ..EstimatorSpec::new(EstimatorKind::Flm, None)?
    };
    TrainedModel::fit(dataset, &spec)
}

/// FLM with the location coordinates as extra scalar covariates.
pub fn fit_flm_sp(dataset: &SpatialDataset, fve_cutoff: f64) -> Result<TrainedModel> {
    let spec = EstimatorSpec {
        fve_cutoff,
        ..EstimatorSpec::new(EstimatorKind::FlmSp, None)?
    };
    TrainedModel::fit(dataset, &spec)
}

pub fn fit_fnn(dataset: &SpatialDataset, network: NetworkSpec, train: TrainConfig) -> Result<TrainedModel> {
    let spec = EstimatorSpec::new(EstimatorKind::Fnn, None)?
        .with_network(network)?
        .with_train(train);
    TrainedModel::fit(dataset, &spec)
}

/// FNN with the location coordinates as extra scalar inputs.
pub fn fit_fnn_sp(dataset: &SpatialDataset, network: NetworkSpec, train: TrainConfig) -> Result<TrainedModel> {
    let spec = EstimatorSpec::new(EstimatorKind::FnnSp, None)?
        .with_network(network)?
        .with_train(train);
    TrainedModel::fit(dataset, &spec)
}

impl TrainedModel {
    pub fn fit(dataset: &SpatialDataset, spec: &EstimatorSpec) -> Result<Self> {
        Self::fit_with_mode(dataset, spec, FitMode::Full)
    }

    pub fn fit_with_mode(dataset: &SpatialDataset, spec: &EstimatorSpec, mode: FitMode) -> Result<Self> {
        spec.validate()?;
        let prep = prepare(dataset, spec.fve_cutoff)?;
        let y = dataset.responses();
        let locations = dataset.locations();
        let mut sar = None;
        let fit = match spec.kind {
            EstimatorKind::Flm | EstimatorKind::FlmSp => {
                let extras: Vec<Vec<f64>> = locations.iter().map(|l| extras_for(spec.kind, l, None)).collect();
                Fit::Linear(fit_linear(&prep.scores, &extras, y, None)?)
            }
            EstimatorKind::Fnn | EstimatorKind::FnnSp => {
                let extras: Vec<Vec<f64>> = locations.iter().map(|l| extras_for(spec.kind, l, None)).collect();
                let net = spec.network_for(dataset.dim())?;
                Fit::Network(fnn::train(&network_rows(&prep.scores, &extras, y), &net, &spec.train)?)
            }
            EstimatorKind::Gwflm | EstimatorKind::Gwfnn => match mode {
                FitMode::OutOfSampleOnly => Fit::Deferred,
                FitMode::Full => gw::fit_local_models(&prep, dataset, spec)?,
            },
            EstimatorKind::Sarflm | EstimatorKind::Sarfnn => {
                let (weights, fit) = sar::fit_global(&prep, dataset, spec)?;
                sar = Some(weights);
                fit
            }
        };
        Ok(TrainedModel {
            spec: spec.clone(),
            encoder: prep.encoder,
            locations: locations.to_vec(),
            responses: y.to_vec(),
            projections: prep.projections,
            sar,
            fit,
        })
    }

    pub fn spec(&self) -> &EstimatorSpec {
        &self.spec
    }

    pub fn kind(&self) -> EstimatorKind {
        self.spec.kind
    }

    pub fn encoder(&self) -> &ScoreEncoder {
        &self.encoder
    }

    pub fn fitted(&self) -> &Fit {
        &self.fit
    }

    pub fn locations(&self) -> &[Vec<f64>] {
        &self.locations
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn sar_weights(&self) -> Option<&SarWeights> {
        self.sar.as_ref()
    }

    /// Number of per-location parameter sets (geographically weighted kinds).
    pub fn local_model_count(&self) -> usize {
        match &self.fit {
            Fit::LocalLinear(v) => v.len(),
            Fit::LocalNetwork(v) => v.len(),
            _ => 0,
        }
    }

    fn scores(&self, sample: &FunctionalSample) -> Result<Vec<f64>> {
        self.encoder.scores(sample)
    }

    /// Index of the training location equal to `location`, if any.
    pub fn location_index(&self, location: &[f64]) -> Option<usize> {
        self.locations.iter().position(|l| l.as_slice() == location)
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.locations.len() {
            return Err(Error::invalid(format!(
                "location index {index} outside the {} training locations",
                self.locations.len()
            )));
        }
        Ok(())
    }

    fn predict_global(&self, scores: &[f64], extras: &[f64]) -> Result<f64> {
        match &self.fit {
            Fit::Linear(h) => h.predict(scores, extras),
            Fit::Network(n) => n.predict(scores, extras),
            _ => Err(Error::invalid("model has no global fit")),
        }
    }

    /// Prediction for new covariates observed at training location `index`.
    pub fn predict_in_sample(&self, sample: &FunctionalSample, index: usize) -> Result<f64> {
        self.check_index(index)?;
        let scores = self.scores(sample)?;
        match (&self.fit, self.spec.kind) {
            (Fit::LocalLinear(heads), _) => heads[index].predict(&scores, &[]),
            (Fit::LocalNetwork(nets), _) => nets[index].predict(&scores, &[]),
            (Fit::Deferred, _) => Err(Error::invalid(
                "model was fitted without per-location parameters; refit in full mode",
            )),
            (_, kind) if kind.is_sar() => {
                let lag = self
                    .sar
                    .as_ref()
                    .map(|w| w.normalized[index].iter().zip(&self.responses).map(|(a, b)| a * b).sum());
                self.predict_global(&scores, &extras_for(kind, &self.locations[index], lag))
            }
            (_, kind) => self.predict_global(&scores, &extras_for(kind, &self.locations[index], None)),
        }
    }

    /// Prediction at a location treated as unseen. Geographically weighted
    /// kinds fit a fresh model on the training data weighted around
    /// `location`; autoregressive kinds use the augmented weight matrix.
    pub fn predict_out_of_sample(&self, sample: &FunctionalSample, location: &[f64]) -> Result<f64> {
        if location.len() != self.locations[0].len() {
            return Err(Error::shape(format!(
                "location has dimension {}, model expects {}",
                location.len(),
                self.locations[0].len()
            )));
        }
        let scores = self.scores(sample)?;
        let kind = self.spec.kind;
        if kind.is_gw() {
            let local = gw::fit_at(self, location)?;
            return match local {
                Fit::Linear(h) => h.predict(&scores, &[]),
                Fit::Network(n) => n.predict(&scores, &[]),
                _ => unreachable!("fit_at returns a global fit"),
            };
        }
        let lag = if kind.is_sar() {
            Some(sar::sar_covariate_out_of_sample(self, location)?)
        } else {
            None
        };
        self.predict_global(&scores, &extras_for(kind, location, lag))
    }

    /// In-sample prediction when `location` is a training location and the
    /// model supports it, otherwise out-of-sample.
    pub fn predict(&self, sample: &FunctionalSample, location: &[f64]) -> Result<f64> {
        match self.location_index(location) {
            Some(i) if !matches!(self.fit, Fit::Deferred) => self.predict_in_sample(sample, i),
            _ => self.predict_out_of_sample(sample, location),
        }
    }

    pub(crate) fn projections(&self) -> &[Vec<f64>] {
        &self.projections
    }
}

