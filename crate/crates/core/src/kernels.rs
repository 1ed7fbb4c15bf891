//! Spatial distances, kernel weights and SAR weight matrices.
//!
//! Two flavors share the same kernel formulas. Geographically weighted (GW)
//! kernels weigh training samples around a regression point and equal 1 at
//! distance zero. Spatial-autoregressive (SAR) kernels build neighbour
//! averages of responses and are forced to 0 at distance zero so a location
//! never sees its own response.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "locations of dimension {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    Exponential,
    DoublePower,
    Nearest,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Exponential => "exponential",
            KernelFamily::DoublePower => "double_power",
            KernelFamily::Nearest => "nearest",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "exponential" | "expo" => Ok(KernelFamily::Exponential),
            "double_power" | "doublepower" | "bisquare" => Ok(KernelFamily::DoublePower),
            "nearest" => Ok(KernelFamily::Nearest),
            other => Err(Error::invalid(format!("unknown kernel family '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFlavor {
    Gw,
    Sar,
}

/// Kernel family, bandwidth and flavor. For `Nearest` the bandwidth is the
/// neighbour count and must be a positive integer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr")]
pub struct KernelSpec {
    family: KernelFamily,
    bandwidth: f64,
    flavor: KernelFlavor,
}

#[derive(Deserialize)]
struct KernelRepr {
    family: KernelFamily,
    bandwidth: f64,
    flavor: KernelFlavor,
}

impl TryFrom<KernelRepr> for KernelSpec {
    type Error = Error;

    fn try_from(r: KernelRepr) -> Result<Self> {
        KernelSpec::new(r.family, r.bandwidth, r.flavor)
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64, flavor: KernelFlavor) -> Result<Self> {
        if !(bandwidth > 0.0) || bandwidth.is_nan() {
            return Err(Error::invalid(format!("bandwidth {bandwidth} must be positive")));
        }
        if family == KernelFamily::Nearest {
            if flavor != KernelFlavor::Sar {
                return Err(Error::invalid("the nearest-neighbour kernel is SAR-only"));
            }
            if bandwidth.fract() != 0.0 || !bandwidth.is_finite() {
                return Err(Error::invalid(format!(
                    "nearest-neighbour bandwidth {bandwidth} must be an integer"
                )));
            }
        }
        Ok(KernelSpec {
            family,
            bandwidth,
            flavor,
        })
    }

    pub fn gw(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        KernelSpec::new(family, bandwidth, KernelFlavor::Gw)
    }

    pub fn sar(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        KernelSpec::new(family, bandwidth, KernelFlavor::Sar)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn flavor(&self) -> KernelFlavor {
        self.flavor
    }

    pub fn with_bandwidth(&self, bandwidth: f64) -> Result<Self> {
        KernelSpec::new(self.family, bandwidth, self.flavor)
    }

    /// Neighbour count for the nearest kernel.
    pub fn neighbours(&self) -> usize {
        self.bandwidth as usize
    }
}

/// Kernel value at distance `w`. Not defined for the nearest kernel, whose
/// value depends on the whole distance vector (see [`nearest_weights`]).
pub fn kernel_weight(spec: &KernelSpec, w: f64) -> Result<f64> {
    if !(w >= 0.0) {
        return Err(Error::invalid(format!("distance {w} is negative")));
    }
    if spec.flavor == KernelFlavor::Sar && w == 0.0 {
        return Ok(0.0);
    }
    let h = spec.bandwidth;
    Ok(match spec.family {
        KernelFamily::Gaussian => (-0.5 * (w / h).powi(2)).exp(),
        KernelFamily::Exponential => (-0.5 * w / h).exp(),
        KernelFamily::DoublePower => {
            if w < h {
                let r = 1.0 - (w / h).powi(2);
                r * r
            } else {
                0.0
            }
        }
        KernelFamily::Nearest => {
            return Err(Error::invalid(
                "the nearest kernel needs the full distance vector",
            ))
        }
    })
}

/// 0/1 weights selecting the `h` smallest strictly positive distances.
/// Ties are broken by ascending index, so at most `h` entries are 1.
pub fn nearest_weights(distances: &[f64], h: usize) -> Result<Vec<f64>> {
    if h == 0 || h > distances.len() {
        return Err(Error::invalid(format!(
            "neighbour count {h} outside [1, {}]",
            distances.len()
        )));
    }
    if let Some(d) = distances.iter().find(|d| !(**d >= 0.0)) {
        return Err(Error::invalid(format!("distance {d} is negative")));
    }
    let mut order: Vec<usize> = (0..distances.len()).filter(|&i| distances[i] > 0.0).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; distances.len()];
    for &i in order.iter().take(h) {
        out[i] = 1.0;
    }
    Ok(out)
}

/// Kernel values of every location relative to `target`.
pub fn kernel_vector(locations: &[Vec<f64>], target: &[f64], spec: &KernelSpec) -> Result<Vec<f64>> {
    let distances = locations
        .iter()
        .map(|s| euclidean_distance(s, target))
        .collect::<Result<Vec<_>>>()?;
    match spec.family {
        KernelFamily::Nearest => nearest_weights(&distances, spec.neighbours().min(distances.len())),
        _ => distances.iter().map(|&w| kernel_weight(spec, w)).collect(),
    }
}

/// Geographic weights of all training locations around `target`.
pub fn gw_weight_vector(locations: &[Vec<f64>], target: &[f64], spec: &KernelSpec) -> Result<Vec<f64>> {
    if spec.flavor != KernelFlavor::Gw {
        return Err(Error::invalid("geographic weights need a GW-flavored kernel"));
    }
    kernel_vector(locations, target, spec)
}

/// Rows scaled to sum to one; all-zero rows are kept as zeros.
pub fn row_normalize(raw: &[Vec<f64>]) -> Vec<Vec<f64>> {
    raw.iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter().map(|v| v / s).collect()
            } else {
                vec![0.0; row.len()]
            }
        })
        .collect()
}

/// Raw SAR kernel matrix and its row-normalized version.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SarWeights {
    pub raw: Vec<Vec<f64>>,
    pub normalized: Vec<Vec<f64>>,
}

impl SarWeights {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Neighbour average `W_i . y` for every row.
    pub fn lag(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.len() {
            return Err(Error::shape(format!(
                "{} responses for a {}x{} weight matrix",
                y.len(),
                self.len(),
                self.len()
            )));
        }
        Ok(self
            .normalized
            .iter()
            .map(|row| row.iter().zip(y).map(|(w, v)| w * v).sum())
            .collect())
    }
}

pub fn sar_weight_matrix(locations: &[Vec<f64>], spec: &KernelSpec) -> Result<SarWeights> {
    let n = locations.len();
    if n < 2 {
        return Err(Error::invalid("a SAR weight matrix needs at least 2 locations"));
    }
    if spec.flavor != KernelFlavor::Sar {
        return Err(Error::invalid("SAR weights need a SAR-flavored kernel"));
    }
    if spec.family == KernelFamily::Nearest && spec.neighbours() > n - 1 {
        return Err(Error::invalid(format!(
            "neighbour count {} exceeds N - 1 = {}",
            spec.neighbours(),
            n - 1
        )));
    }
    let mut raw = Vec::with_capacity(n);
    for (i, s) in locations.iter().enumerate() {
        let mut row = kernel_vector(locations, s, spec)?;
        row[i] = 0.0;
        raw.push(row);
    }
    let normalized = row_normalize(&raw);
    Ok(SarWeights { raw, normalized })
}

/// The (N+1)-location system obtained by appending a new location.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedSar {
    pub raw: Vec<Vec<f64>>,
    pub normalized: Vec<Vec<f64>>,
    /// Normalized weights of the training locations for the new location.
    pub new_row: Vec<f64>,
}

/// Block matrix `[[W*, k], [k^T, 0]]` with `k` the kernel values of the
/// training locations relative to `new_location`, then row-normalized.
pub fn augment_sar_matrix(
    trained: &SarWeights,
    new_location: &[f64],
    locations: &[Vec<f64>],
    spec: &KernelSpec,
) -> Result<AugmentedSar> {
    let n = trained.len();
    if locations.len() != n {
        return Err(Error::shape(format!(
            "{} locations for a weight matrix of {n}",
            locations.len()
        )));
    }
    if spec.flavor != KernelFlavor::Sar {
        return Err(Error::invalid("SAR weights need a SAR-flavored kernel"));
    }
    let k = kernel_vector(locations, new_location, spec)?;
    let mut raw: Vec<Vec<f64>> = trained
        .raw
        .iter()
        .zip(&k)
        .map(|(row, kv)| {
            let mut r = row.clone();
            r.push(*kv);
            r
        })
        .collect();
    let mut last = k.clone();
    last.push(0.0);
    raw.push(last);
    let normalized = row_normalize(&raw);
    let new_row = normalized[n][..n].to_vec();
    Ok(AugmentedSar {
        raw,
        normalized,
        new_row,
    })
}

/// Just the normalized new-location row of [`augment_sar_matrix`].
pub fn out_of_sample_row(locations: &[Vec<f64>], new_location: &[f64], spec: &KernelSpec) -> Result<Vec<f64>> {
    if spec.flavor != KernelFlavor::Sar {
        return Err(Error::invalid("SAR weights need a SAR-flavored kernel"));
    }
    let k = kernel_vector(locations, new_location, spec)?;
    Ok(row_normalize(&[k]).pop().unwrap_or_default())
}

/// Edge-adjacency ("rook") matrix of a `p x q` grid of cells, row-major.
pub fn rook_matrix(p: usize, q: usize) -> DMatrix<f64> {
    let n = p * q;
    let mut m = DMatrix::zeros(n, n);
    for r in 0..p {
        for c in 0..q {
            let i = r * q + c;
            if r + 1 < p {
                m[(i, i + q)] = 1.0;
                m[(i + q, i)] = 1.0;
            }
            if c + 1 < q {
                m[(i, i + 1)] = 1.0;
                m[(i + 1, i)] = 1.0;
            }
        }
    }
    m
}

/// All pairwise distances `i < j`.
pub fn pairwise_distances(locations: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(locations.len() * locations.len().saturating_sub(1) / 2);
    for i in 0..locations.len() {
        for j in i + 1..locations.len() {
            out.push(euclidean_distance(&locations[i], &locations[j])?);
        }
    }
    Ok(out)
}
