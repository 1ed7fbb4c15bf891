use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    /// Two-sided Welch t-test.
    pub t_p_value: f64,
    /// Two-sided Wilcoxon rank-sum test, normal approximation with tie
    /// correction.
    pub wilcoxon_p_value: f64,
    /// Every value in both samples is identical; both p-values are 1.
    pub degenerate: bool,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = if x.len() > 1 {
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, v)
}

pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid("the t-test needs at least 2 values per sample"));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        return Ok(if ma == mb { 1.0 } else { 0.0 });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(e.to_string()))?;
    Ok((2.0 * (1.0 - dist.cdf(t.abs()))).min(1.0))
}

/// Midranks (1-based) of the pooled sample and the tie-group sizes.
pub fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = r;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks, ties)
}

/// Rank sum of `a` in the pooled sample, with its null mean and variance.
pub fn rank_sum_statistic(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let w: f64 = ranks[..a.len()].iter().sum();
    let mean = n1 * (n + 1.0) / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    (w, mean, var)
}

pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("the rank-sum test needs two nonempty samples"));
    }
    let (w, mean, var) = rank_sum_statistic(a, b);
    if var <= 0.0 {
        return Ok(1.0);
    }
    let z = (w - mean) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok((2.0 * (1.0 - normal.cdf(z.abs()))).min(1.0))
}

/// Two-sample tests on per-sample absolute errors of two estimators.
pub fn significance_tests(errors_a: &[f64], errors_b: &[f64]) -> Result<SignificanceResult> {
    if errors_a.is_empty() || errors_b.is_empty() {
        return Err(Error::invalid("significance tests need nonempty error samples"));
    }
    if errors_a.iter().chain(errors_b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("error samples must be finite"));
    }
    let first = errors_a[0];
    if errors_a.iter().chain(errors_b).all(|v| *v == first) {
        return Ok(SignificanceResult {
            t_p_value: 1.0,
            wilcoxon_p_value: 1.0,
            degenerate: true,
        });
    }
    Ok(SignificanceResult {
        t_p_value: welch_t_test(errors_a, errors_b)?,
        wilcoxon_p_value: rank_sum_test(errors_a, errors_b)?,
        degenerate: false,
    })
}
