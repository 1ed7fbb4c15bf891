use crate::error::{Error, Result};

/// Root mean square error.
pub fn rmse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid("rmse of an empty sample"));
    }
    let sse: f64 = predictions.iter().zip(truths).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

/// Relative RMSE reduction in percent, negative when the model is worse.
pub fn improvement(rmse_baseline: f64, rmse_model: f64) -> Result<f64> {
    if !(rmse_baseline > 0.0) || !rmse_baseline.is_finite() {
        return Err(Error::invalid(format!("baseline RMSE {rmse_baseline} must be positive")));
    }
    Ok(100.0 * (rmse_baseline - rmse_model) / rmse_baseline)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[1.5, 2.5, 3.5], &[1.0, 2.0, 3.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn improvement_examples() {
        assert_eq!(improvement(0.7, 0.7).unwrap(), 0.0);
        assert!((improvement(0.564, 0.461).unwrap() - 18.26).abs() < 0.005);
        assert!((improvement(0.705, 0.709).unwrap() + 0.57).abs() < 0.005);
        assert!(improvement(0.0, 1.0).is_err());
    }
}
