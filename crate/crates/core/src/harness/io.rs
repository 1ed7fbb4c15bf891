use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fda::{Curve, FunctionalSample, SpatialDataset, TimeGrid};
use crate::models::TrainedModel;

/// Where a dataset lives and how to resample it. Relative paths are taken
/// relative to the manifest file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub curves: PathBuf,
    pub locations: PathBuf,
    pub responses: PathBuf,
    pub features: Vec<String>,
    pub t_lower: f64,
    pub t_upper: f64,
    pub grid_points: usize,
    pub dim: usize,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: DatasetManifest = toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate().map_err(|e| e.context(path.display().to_string()))?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::parse(path, e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::invalid("manifest lists no features"));
        }
        if self.dim == 0 {
            return Err(Error::invalid("coordinate dimension must be positive"));
        }
        self.grid().map(|_| ())
    }

    pub fn grid(&self) -> Result<Arc<TimeGrid>> {
        Ok(Arc::new(TimeGrid::uniform(self.t_lower, self.t_upper, self.grid_points)?))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path, e.to_string()))
}

fn check_header(path: &Path, rdr: &mut csv::Reader<fs::File>, expected: &[String]) -> Result<()> {
    let header = rdr.headers().map_err(|e| Error::parse(path, e.to_string()))?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::parse(
            path,
            format!("header is '{}', expected '{}'", got.join(","), expected.join(",")),
        ));
    }
    Ok(())
}

fn number(path: &Path, line: u64, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::parse(path, format!("line {line}: {what} '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, format!("line {line}: {what} is not finite")));
    }
    Ok(v)
}

/// Records with their 1-based line numbers.
fn records(path: &Path, rdr: &mut csv::Reader<fs::File>) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::parse(path, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push((line, rec));
    }
    Ok(out)
}

/// `sample_id,coord_1,...,coord_d`, in file order.
pub fn read_locations(path: &Path, dim: usize) -> Result<Vec<(String, Vec<f64>)>> {
    let mut rdr = reader(path)?;
    let mut header = vec!["sample_id".to_string()];
    header.extend((1..=dim).map(|k| format!("coord_{k}")));
    check_header(path, &mut rdr, &header)?;
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for (line, rec) in records(path, &mut rdr)? {
        let id = rec[0].to_string();
        if seen.insert(id.clone(), line).is_some() {
            return Err(Error::parse(path, format!("line {line}: duplicate sample id '{id}'")));
        }
        let coords = (1..=dim)
            .map(|k| number(path, line, &rec[k], "coordinate"))
            .collect::<Result<Vec<_>>>()?;
        out.push((id, coords));
    }
    if out.is_empty() {
        return Err(Error::parse(path, "no locations"));
    }
    Ok(out)
}

/// `sample_id,y`, in file order.
pub fn read_responses(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &["sample_id".into(), "y".into()])?;
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for (line, rec) in records(path, &mut rdr)? {
        let id = rec[0].to_string();
        if seen.insert(id.clone(), line).is_some() {
            return Err(Error::parse(path, format!("line {line}: duplicate sample id '{id}'")));
        }
        out.push((id, number(path, line, &rec[1], "response")?));
    }
    Ok(out)
}

/// `sample_id,feature_id,time,value` rows resampled onto `grid` by linear
/// interpolation. Returns one sample per id, features in the order given.
pub fn read_curves(path: &Path, features: &[String], grid: &Arc<TimeGrid>) -> Result<HashMap<String, FunctionalSample>> {
    let mut rdr = reader(path)?;
    check_header(
        path,
        &mut rdr,
        &["sample_id".into(), "feature_id".into(), "time".into(), "value".into()],
    )?;
    let feature_index: HashMap<&str, usize> = features.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect();
    let mut obs: HashMap<String, Vec<Vec<(f64, f64, u64)>>> = HashMap::new();
    for (line, rec) in records(path, &mut rdr)? {
        let &r = feature_index
            .get(&rec[1])
            .ok_or_else(|| Error::parse(path, format!("line {line}: unknown feature '{}'", &rec[1])))?;
        let t = number(path, line, &rec[2], "time")?;
        let v = number(path, line, &rec[3], "value")?;
        obs.entry(rec[0].to_string())
            .or_insert_with(|| vec![Vec::new(); features.len()])[r]
            .push((t, v, line));
    }
    let mut out = HashMap::with_capacity(obs.len());
    for (id, per_feature) in obs {
        let mut curves = Vec::with_capacity(features.len());
        for (r, mut points) in per_feature.into_iter().enumerate() {
            if points.is_empty() {
                return Err(Error::parse(
                    path,
                    format!("sample '{id}' has no observations of feature '{}'", features[r]),
                ));
            }
            points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
            if let Some(w) = points.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::parse(
                    path,
                    format!(
                        "line {}: duplicate observation of sample '{id}', feature '{}' at time {}",
                        w[1].2, features[r], w[1].0
                    ),
                ));
            }
            let times: Vec<f64> = points.iter().map(|p| p.0).collect();
            let values: Vec<f64> = points.iter().map(|p| p.1).collect();
            curves.push(Curve::new(grid.clone(), grid.interpolate(&times, &values)?)?);
        }
        out.insert(id, FunctionalSample::new(curves)?);
    }
    Ok(out)
}

/// Curves and locations keyed by the ids of the locations file, in its order.
pub fn read_covariates(
    curves: &Path,
    locations: &Path,
    features: &[String],
    grid: &Arc<TimeGrid>,
    dim: usize,
) -> Result<(Vec<String>, Vec<FunctionalSample>, Vec<Vec<f64>>)> {
    let locs = read_locations(locations, dim)?;
    let mut curves_by_id = read_curves(curves, features, grid)?;
    let mut ids = Vec::with_capacity(locs.len());
    let mut samples = Vec::with_capacity(locs.len());
    let mut coords = Vec::with_capacity(locs.len());
    for (id, s) in locs {
        let sample = curves_by_id
            .remove(&id)
            .ok_or_else(|| Error::parse(curves, format!("no curves for sample '{id}'")))?;
        ids.push(id);
        samples.push(sample);
        coords.push(s);
    }
    if let Some(extra) = curves_by_id.keys().min() {
        return Err(Error::parse(curves, format!("sample '{extra}' has no location")));
    }
    Ok((ids, samples, coords))
}

pub fn ingest(manifest: &DatasetManifest) -> Result<SpatialDataset> {
    manifest.validate()?;
    let grid = manifest.grid()?;
    let (ids, samples, locations) = read_covariates(
        &manifest.resolve(&manifest.curves),
        &manifest.resolve(&manifest.locations),
        &manifest.features,
        &grid,
        manifest.dim,
    )?;
    let responses_path = manifest.resolve(&manifest.responses);
    let mut by_id: HashMap<String, f64> = read_responses(&responses_path)?.into_iter().collect();
    let mut y = Vec::with_capacity(ids.len());
    for id in &ids {
        y.push(
            by_id
                .remove(id)
                .ok_or_else(|| Error::parse(&responses_path, format!("no response for sample '{id}'")))?,
        );
    }
    if let Some(extra) = by_id.keys().min() {
        return Err(Error::parse(&responses_path, format!("sample '{extra}' has no location")));
    }
    SpatialDataset::with_ids(ids, samples, y, locations)
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::parse(path, e.to_string())
}

pub fn write_curves(path: &Path, ids: &[String], samples: &[FunctionalSample], features: &[String]) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    w.write_record(["sample_id", "feature_id", "time", "value"]).map_err(&err)?;
    for (id, s) in ids.iter().zip(samples) {
        for (f, c) in features.iter().zip(s.curves()) {
            for (t, v) in c.grid().points().iter().zip(c.values()) {
                w.write_record([id.as_str(), f.as_str(), &t.to_string(), &v.to_string()])
                    .map_err(&err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_locations(path: &Path, ids: &[String], locations: &[Vec<f64>]) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    let dim = locations.first().map_or(0, Vec::len);
    let mut header = vec!["sample_id".to_string()];
    header.extend((1..=dim).map(|k| format!("coord_{k}")));
    w.write_record(&header).map_err(&err)?;
    for (id, s) in ids.iter().zip(locations) {
        let mut rec = vec![id.clone()];
        rec.extend(s.iter().map(f64::to_string));
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_responses(path: &Path, ids: &[String], y: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    w.write_record(["sample_id", "y"]).map_err(&err)?;
    for (id, v) in ids.iter().zip(y) {
        w.write_record([id.as_str(), &v.to_string()]).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write `curves.csv`, `locations.csv`, `responses.csv` and `manifest.toml`
/// into `dir`. All curves must share one uniform grid.
pub fn export_dataset(dataset: &SpatialDataset, dir: &Path, features: &[String]) -> Result<DatasetManifest> {
    if features.len() != dataset.n_features() {
        return Err(Error::shape(format!(
            "{} feature names for {} features",
            features.len(),
            dataset.n_features()
        )));
    }
    let grid = dataset.common_grid(0)?;
    for r in 1..dataset.n_features() {
        if *dataset.common_grid(r)? != *grid {
            return Err(Error::invalid("features must share one grid to be exported"));
        }
    }
    let uniform = TimeGrid::uniform(grid.lower(), grid.upper(), grid.len())?;
    if uniform != *grid {
        return Err(Error::invalid("only uniform grids can be described by a manifest"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_curves(&dir.join("curves.csv"), dataset.ids(), dataset.samples(), features)?;
    write_locations(&dir.join("locations.csv"), dataset.ids(), dataset.locations())?;
    write_responses(&dir.join("responses.csv"), dataset.ids(), dataset.responses())?;
    let manifest = DatasetManifest {
        curves: "curves.csv".into(),
        locations: "locations.csv".into(),
        responses: "responses.csv".into(),
        features: features.to_vec(),
        t_lower: grid.lower(),
        t_upper: grid.upper(),
        grid_points: grid.len(),
        dim: dataset.dim(),
        base_dir: dir.to_path_buf(),
    };
    manifest.save(&dir.join("manifest.toml"))?;
    Ok(manifest)
}

/// On-disk form of a trained model: the model plus the feature names its
/// curves are read under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub features: Vec<String>,
    pub model: TrainedModel,
}

const MODEL_FORMAT: &str = "stfnn-model";

pub fn save_model(path: &Path, model: &TrainedModel, features: &[String]) -> Result<()> {
    if features.len() != model.encoder().features().len() {
        return Err(Error::shape("feature names do not match the model"));
    }
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: 1,
        features: features.to_vec(),
        model: model.clone(),
    };
    let text = serde_json::to_string(&file).map_err(|e| Error::parse(path, e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    if file.format != MODEL_FORMAT || file.version != 1 {
        return Err(Error::parse(path, "not a version 1 model file"));
    }
    if file.features.len() != file.model.encoder().features().len() {
        return Err(Error::parse(path, "feature names do not match the model"));
    }
    Ok(file)
}

/// Predictions for the samples of a curves/locations pair, in the order of
/// the locations file.
pub fn predict_files(file: &ModelFile, curves: &Path, locations: &Path) -> Result<Vec<(String, f64)>> {
    let model = &file.model;
    let grid = model.encoder().features()[0].basis.grid().clone();
    let dim = model.locations()[0].len();
    let (ids, samples, locs) = read_covariates(curves, locations, &file.features, &grid, dim)?;
    ids.into_iter()
        .zip(samples.iter().zip(&locs))
        .map(|(id, (x, s))| {
            let y = model.predict(x, s).map_err(|e| e.context(format!("sample '{id}'")))?;
            Ok((id, y))
        })
        .collect()
}
