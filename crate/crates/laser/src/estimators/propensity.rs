use crate::error::{Error, Result};
use crate::numeric::Matrix;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logistic propensity model e(x) = P(t = 1 | x), fitted on standardized
/// covariates; predictions are clipped away from 0 and 1 because the IPW
/// estimator divides by e and 1 - e.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub clip_lo: f64,
    pub clip_hi: f64,
    x_mean: Vec<f64>,
    x_std: Vec<f64>,
}

const L2_PENALTY: f64 = 1e-4;
const ITERATIONS: usize = 500;
const LEARNING_RATE: f64 = 0.1;

pub fn fit_propensity(x: &Matrix, t: &[u8]) -> Result<PropensityModel> {
    fit_propensity_with(x, t, 0.01, 0.99)
}

pub fn fit_propensity_with(
    x: &Matrix,
    t: &[u8],
    clip_lo: f64,
    clip_hi: f64,
) -> Result<PropensityModel> {
    if x.rows() != t.len() {
        return Err(Error::Dimension(format!(
            "{} covariate rows vs {} treatments",
            x.rows(),
            t.len()
        )));
    }
    if !(0.0 < clip_lo && clip_lo < clip_hi && clip_hi < 1.0) {
        return Err(Error::Config(format!("clip bounds ({clip_lo}, {clip_hi}) invalid")));
    }
    let n_treated = t.iter().filter(|&&v| v == 1).count();
    if n_treated == 0 || n_treated == t.len() {
        return Err(Error::Degenerate(
            "propensity fit needs both treated and control units".into(),
        ));
    }

    let n = x.rows();
    let p = x.cols();
    let mut x_mean = vec![0.0; p];
    let mut x_std = vec![0.0; p];
    for j in 0..p {
        let col = x.col(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        x_mean[j] = mean;
        x_std[j] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    }
    let xs = Matrix::from_fn(n, p, |r, c| (x.get(r, c) - x_mean[c]) / x_std[c]);

    // full-batch gradient descent on penalized log-loss
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    for _ in 0..ITERATIONS {
        let mut grad_w = vec![0.0; p];
        let mut grad_b = 0.0;
        for i in 0..n {
            let row = xs.row(i);
            let logit: f64 = b + row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
            let resid = sigmoid(logit) - f64::from(t[i]);
            grad_b += resid;
            for j in 0..p {
                grad_w[j] += resid * row[j];
            }
        }
        let inv = 1.0 / n as f64;
        b -= LEARNING_RATE * grad_b * inv;
        for j in 0..p {
            w[j] -= LEARNING_RATE * (grad_w[j] * inv + L2_PENALTY * w[j]);
        }
    }
    Ok(PropensityModel { weights: w, bias: b, clip_lo, clip_hi, x_mean, x_std })
}

impl PropensityModel {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.weights.len() {
            return Err(Error::Dimension(format!(
                "{} covariates, model expects {}",
                x.cols(),
                self.weights.len()
            )));
        }
        Ok((0..x.rows())
            .map(|i| {
                let logit: f64 = self.bias
                    + x.row(i)
                        .iter()
                        .enumerate()
                        .map(|(j, &v)| (v - self.x_mean[j]) / self.x_std[j] * self.weights[j])
                        .sum::<f64>();
                sigmoid(logit).clamp(self.clip_lo, self.clip_hi)
            })
            .collect())
    }
}
