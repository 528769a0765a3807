use crate::error::{Error, Result};

/// Inverse-probability-weighted ATE: mean of
/// `yhat_i t_i / e_i - yhat_i (1 - t_i) / (1 - e_i)`.
pub fn ipw_ate(yhat: &[f64], t: &[u8], e: &[f64]) -> Result<f64> {
    if yhat.len() != t.len() || t.len() != e.len() {
        return Err(Error::Dimension(format!(
            "ipw_ate lengths differ: {} predictions, {} treatments, {} propensities",
            yhat.len(),
            t.len(),
            e.len()
        )));
    }
    if yhat.is_empty() {
        return Err(Error::Degenerate("ipw_ate on empty sample".into()));
    }
    if let Some(bad) = e.iter().find(|&&v| !(0.0 < v && v < 1.0)) {
        return Err(Error::Degenerate(format!("propensity {bad} outside (0, 1)")));
    }
    let sum: f64 = yhat
        .iter()
        .zip(t)
        .zip(e)
        .map(|((&y, &ti), &ei)| {
            if ti == 1 {
                y / ei
            } else {
                -y / (1.0 - ei)
            }
        })
        .sum();
    Ok(sum / yhat.len() as f64)
}
