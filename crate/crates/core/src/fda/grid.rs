use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered observation times inside a compact interval `[lower, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr")]
pub struct TimeGrid {
    lower: f64,
    upper: f64,
    points: Vec<f64>,
}

#[derive(Deserialize)]
struct GridRepr {
    lower: f64,
    upper: f64,
    points: Vec<f64>,
}

impl TryFrom<GridRepr> for TimeGrid {
    type Error = Error;

    fn try_from(r: GridRepr) -> Result<Self> {
        TimeGrid::new(r.points, r.lower, r.upper)
    }
}

impl TimeGrid {
    pub fn new(points: Vec<f64>, lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::invalid(format!(
                "time interval [{lower}, {upper}] is not a proper finite interval"
            )));
        }
        if points.len() < 2 {
            return Err(Error::invalid("a time grid needs at least 2 points"));
        }
        for w in points.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::invalid(format!(
                    "time grid is not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        if points[0] < lower || points[points.len() - 1] > upper {
            return Err(Error::invalid(format!(
                "time grid [{}, {}] leaves the interval [{lower}, {upper}]",
                points[0],
                points[points.len() - 1]
            )));
        }
        Ok(TimeGrid {
            lower,
            upper,
            points,
        })
    }

    /// `n` equally spaced points covering `[lower, upper]` including both ends.
    pub fn uniform(lower: f64, upper: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("a time grid needs at least 2 points"));
        }
        let step = (upper - lower) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|j| lower + step * j as f64).collect();
        points[n - 1] = upper;
        TimeGrid::new(points, lower, upper)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Linear interpolation of `(times, values)` at every grid point. Points
    /// outside the observed span take the nearest observed value.
    pub fn interpolate(&self, times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
        if times.len() != values.len() || times.is_empty() {
            return Err(Error::shape(format!(
                "{} times for {} values",
                times.len(),
                values.len()
            )));
        }
        for w in times.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::invalid("observation times are not strictly increasing"));
            }
        }
        let last = times.len() - 1;
        let mut out = Vec::with_capacity(self.points.len());
        let mut seg = 0usize;
        for &t in &self.points {
            if t <= times[0] {
                out.push(values[0]);
                continue;
            }
            if t >= times[last] {
                out.push(values[last]);
                continue;
            }
            while times[seg + 1] < t {
                seg += 1;
            }
            let (t0, t1) = (times[seg], times[seg + 1]);
            if t == t1 {
                out.push(values[seg + 1]);
                continue;
            }
            let frac = (t - t0) / (t1 - t0);
            out.push(values[seg] + frac * (values[seg + 1] - values[seg]));
        }
        Ok(out)
    }
}
