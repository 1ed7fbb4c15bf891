use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cv::{kfold_cv, loocv, CvOptions, CvReport, Selection};
use super::io::{ingest, DatasetManifest};
use super::metrics::improvement;
use super::stats::{significance_tests, SignificanceResult};
use crate::error::{Error, Result};
use crate::fda::SpatialDataset;
use crate::fnn::{NetworkSpec, TrainConfig};
use crate::models::{EstimatorKind, EstimatorSpec, DEFAULT_FVE_CUTOFF};
use crate::simgen::{self, Scenario, SimConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// `sim1` or `sim2`.
    pub scenario: Option<String>,
    /// Dataset manifest, relative to the config file.
    pub manifest: Option<PathBuf>,
    /// Seed of the simulation; defaults to the experiment seed.
    pub sim_seed: Option<u64>,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Kfold,
    Loocv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub cv: Protocol,
    pub folds: usize,
    pub inner_folds: usize,
    pub selection: Selection,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            cv: Protocol::Kfold,
            folds: 10,
            inner_folds: 5,
            selection: Selection::Nested,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub functional_neurons: usize,
    pub hidden: Vec<usize>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            functional_neurons: 4,
            hidden: vec![2],
        }
    }
}

impl NetworkConfig {
    pub fn spec(&self) -> Result<NetworkSpec> {
        NetworkSpec::new(self.functional_neurons, &self.hidden, 0)
    }
}

/// An estimator label (`GWFNN_Gaussian`) with an optional fixed bandwidth
/// or candidate grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EstimatorEntry {
    Label(String),
    Detailed {
        name: String,
        #[serde(default)]
        bandwidth: Option<f64>,
        #[serde(default)]
        grid: Option<Vec<f64>>,
    },
}

impl EstimatorEntry {
    pub fn name(&self) -> &str {
        match self {
            EstimatorEntry::Label(s) => s,
            EstimatorEntry::Detailed { name, .. } => name,
        }
    }

    fn bandwidth(&self) -> Option<f64> {
        match self {
            EstimatorEntry::Detailed { bandwidth, .. } => *bandwidth,
            _ => None,
        }
    }

    fn grid(&self) -> Option<Vec<f64>> {
        match self {
            EstimatorEntry::Detailed { grid, .. } => grid.clone(),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    /// Seed of the fold partition and inner selection.
    #[serde(default)]
    pub seed: u64,
    pub data: DataConfig,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default = "default_fve")]
    pub fve_cutoff: f64,
    /// Bandwidth candidates shared by every kernel estimator without its own grid.
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    pub estimators: Vec<EstimatorEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_fve() -> f64 {
    DEFAULT_FVE_CUTOFF
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::parse(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path, message),
            other => other.context(path.display().to_string()),
        })?;
        c.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(c)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::parse("<config>", e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.scenario.is_some() == self.data.manifest.is_some() {
            return Err(Error::invalid("data needs exactly one of 'scenario' or 'manifest'"));
        }
        if self.estimators.is_empty() {
            return Err(Error::invalid("no estimators listed"));
        }
        for e in &self.estimators {
            self.estimator_spec(e)?;
        }
        Ok(())
    }

    pub fn estimator_spec(&self, entry: &EstimatorEntry) -> Result<EstimatorSpec> {
        let mut spec = EstimatorSpec::from_label(entry.name())?;
        if spec.kind.is_neural() {
            spec = spec.with_network(self.network.spec()?)?;
        }
        spec.fve_cutoff = self.fve_cutoff;
        spec = spec.with_train(self.training.clone());
        if let Some(h) = entry.bandwidth() {
            spec = spec.with_bandwidth(h)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load_dataset(&self) -> Result<SpatialDataset> {
        if let Some(s) = &self.data.scenario {
            let scenario: Scenario = s.parse()?;
            let mut sim = SimConfig::new(scenario, self.data.sim_seed.unwrap_or(self.seed));
            if let Some(sigma) = self.data.sigma {
                sim.sigma = sigma;
            }
            if let Some(rho) = self.data.rho {
                sim.rho = rho;
            }
            return simgen::generate(&sim);
        }
        let path = self.data.manifest.as_ref().expect("validated");
        let path = if path.is_absolute() { path.clone() } else { self.base_dir.join(path) };
        ingest(&DatasetManifest::load(&path)?)
    }
}

/// One row of `results.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub estimator: String,
    pub kernel: String,
    /// The bandwidth used in every fold, empty when folds selected different ones.
    pub bandwidth: Option<f64>,
    pub rmse: f64,
    pub imp_vs_flm: Option<f64>,
    pub imp_vs_fnn: Option<f64>,
    pub seed: u64,
}

pub const RESULTS_HEADER: [&str; 7] = ["estimator", "kernel", "bandwidth", "rmse", "imp_vs_flm", "imp_vs_fnn", "seed"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    let err = |e: csv::Error| Error::parse(path, e.to_string());
    w.write_record(RESULTS_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.estimator.clone(),
            r.kernel.clone(),
            opt(r.bandwidth),
            r.rmse.to_string(),
            opt(r.imp_vs_flm),
            opt(r.imp_vs_fnn),
            r.seed.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    let header = rdr.headers().map_err(|e| Error::parse(path, e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != RESULTS_HEADER {
        return Err(Error::parse(path, "not a results table"));
    }
    let parse_opt = |s: &str, line: u64| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|_| Error::parse(path, format!("line {line}: '{s}' is not a number")))
        }
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::parse(path, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(ResultRow {
            estimator: rec[0].to_string(),
            kernel: rec[1].to_string(),
            bandwidth: parse_opt(&rec[2], line)?,
            rmse: parse_opt(&rec[3], line)?
                .ok_or_else(|| Error::parse(path, format!("line {line}: missing rmse")))?,
            imp_vs_flm: parse_opt(&rec[4], line)?,
            imp_vs_fnn: parse_opt(&rec[5], line)?,
            seed: rec[6]
                .parse()
                .map_err(|_| Error::parse(path, format!("line {line}: bad seed '{}'", &rec[6])))?,
        });
    }
    Ok(rows)
}

/// Concatenate result tables in the order given.
pub fn merge_results(paths: &[PathBuf]) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_results(p)?);
    }
    Ok(rows)
}

/// Per-estimator entry of the run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorLog {
    pub report: CvReport,
    pub vs_flm: Option<SignificanceResult>,
    pub vs_fnn: Option<SignificanceResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub config: ExperimentConfig,
    pub samples: usize,
    pub estimators: Vec<EstimatorLog>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub log: RunLog,
}

fn single_bandwidth(report: &CvReport) -> Option<f64> {
    let first = *report.bandwidths.first()?;
    report.bandwidths.iter().all(|b| *b == first).then_some(first).flatten()
}

/// Cross-validate every configured estimator on one dataset.
pub fn evaluate(config: &ExperimentConfig, dataset: &SpatialDataset) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut reports = Vec::with_capacity(config.estimators.len());
    let mut kinds = Vec::with_capacity(config.estimators.len());
    for entry in &config.estimators {
        let spec = config.estimator_spec(entry)?;
        let options = CvOptions {
            folds: config.protocol.folds,
            seed: config.seed,
            inner_folds: config.protocol.inner_folds,
            grid: entry.grid().or_else(|| config.grid.clone()),
            selection: config.protocol.selection,
        };
        let report = match config.protocol.cv {
            Protocol::Kfold => kfold_cv(dataset, &spec, &options),
            Protocol::Loocv => loocv(dataset, &spec, &options),
        }
        .map_err(|e| e.context(format!("estimator {}", entry.name())))?;
        kinds.push(spec.kind);
        reports.push(report);
    }
    let baseline = |kind: EstimatorKind| kinds.iter().position(|k| *k == kind).map(|i| &reports[i]);
    let flm = baseline(EstimatorKind::Flm);
    let fnn = baseline(EstimatorKind::Fnn);
    let mut rows = Vec::with_capacity(reports.len());
    let mut logs = Vec::with_capacity(reports.len());
    for (report, kind) in reports.iter().zip(&kinds) {
        let imp = |b: Option<&CvReport>| b.map(|b| improvement(b.rmse, report.rmse)).transpose();
        let sig = |b: Option<&CvReport>| {
            b.filter(|b| b.estimator != report.estimator)
                .map(|b| significance_tests(&report.abs_errors(), &b.abs_errors()))
                .transpose()
        };
        rows.push(ResultRow {
            estimator: kind.name().to_string(),
            kernel: report.kernel.clone().unwrap_or_default(),
            bandwidth: single_bandwidth(report),
            rmse: report.rmse,
            imp_vs_flm: imp(flm)?,
            imp_vs_fnn: imp(fnn)?,
            seed: config.seed,
        });
        logs.push(EstimatorLog {
            report: report.clone(),
            vs_flm: sig(flm)?,
            vs_fnn: sig(fnn)?,
        });
    }
    Ok(ExperimentOutput {
        rows,
        log: RunLog {
            config: config.clone(),
            samples: dataset.len(),
            estimators: logs,
        },
    })
}

/// Load the data, evaluate every estimator and write `results.csv` and
/// `run_log.json` into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutput> {
    let dataset = config.load_dataset().map_err(|e| e.context("loading data"))?;
    let out = evaluate(config, &dataset).map_err(|e| e.context("cross-validation"))?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_results(&out_dir.join("results.csv"), &out.rows).map_err(|e| e.context("writing results"))?;
    let log_path = out_dir.join("run_log.json");
    let text = serde_json::to_string_pretty(&out.log).map_err(|e| Error::parse(&log_path, e.to_string()))?;
    fs::write(&log_path, text).map_err(|e| Error::io(&log_path, e))?;
    Ok(out)
}
