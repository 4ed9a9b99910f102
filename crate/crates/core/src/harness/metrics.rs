use crate::error::{Error, Result};

/// `sum_c |h_hat_c - h_true_c|`
pub fn l1_proportion_error(h_hat: &[f64], h_true: &[f64]) -> Result<f64> {
    if h_hat.len() != h_true.len() {
        return Err(Error::InvalidInput(format!(
            "proportion vectors differ in length: {} vs {}",
            h_hat.len(),
            h_true.len()
        )));
    }
    Ok(h_hat.iter().zip(h_true).map(|(a, b)| (a - b).abs()).sum())
}

/// Fraction of exact label matches.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("accuracy of an empty label set".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
