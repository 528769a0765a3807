use crate::error::{Error, Result};
use crate::numeric::{
    ridge_least_squares, AdamState, Graph, Matrix, MlpParams, SeededRng, DEFAULT_SLOPE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressorKind {
    Linear,
    Mlp,
}

const LINEAR_RIDGE: f64 = 1e-9;
const MLP_HIDDEN: [usize; 2] = [64, 64];
const MLP_EPOCHS: usize = 500;
const MLP_LR: f64 = 1e-3;

/// Scalar-output regressor used by the baseline estimators. Both kinds
/// standardize their inputs (and, for the MLP, the target) internally.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    pub kind: RegressorKind,
    beta: Option<Matrix>,
    net: Option<MlpParams>,
    feat_mean: Vec<f64>,
    feat_std: Vec<f64>,
    y_mean: f64,
    y_std: f64,
}

fn feature_stats(features: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = features.rows() as f64;
    let p = features.cols();
    let mut mean = vec![0.0; p];
    let mut std = vec![1.0; p];
    for j in 0..p {
        let col = features.col(j);
        let mu = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        mean[j] = mu;
        std[j] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    }
    (mean, std)
}

pub fn fit_regressor(
    features: &Matrix,
    y: &[f64],
    kind: RegressorKind,
    seed: u64,
) -> Result<Regressor> {
    if features.rows() != y.len() {
        return Err(Error::Dimension(format!(
            "{} feature rows vs {} targets",
            features.rows(),
            y.len()
        )));
    }
    if features.rows() == 0 {
        return Err(Error::Degenerate("regression on empty sample".into()));
    }
    let (feat_mean, feat_std) = feature_stats(features);
    let xs = Matrix::from_fn(features.rows(), features.cols(), |r, c| {
        (features.get(r, c) - feat_mean[c]) / feat_std[c]
    });
    let n = y.len() as f64;
    let y_mean = y.iter().sum::<f64>() / n;
    let y_var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n;
    let y_std = if y_var.sqrt() > 1e-12 { y_var.sqrt() } else { 1.0 };

    match kind {
        RegressorKind::Linear => {
            let ones = Matrix::from_fn(xs.rows(), 1, |_, _| 1.0);
            let design = Matrix::hcat(&[&xs, &ones])?;
            let target = Matrix::column(y);
            let (beta, _) = ridge_least_squares(&design, &target, LINEAR_RIDGE)?;
            Ok(Regressor {
                kind,
                beta: Some(beta),
                net: None,
                feat_mean,
                feat_std,
                y_mean,
                y_std,
            })
        }
        RegressorKind::Mlp => {
            let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_std).collect();
            let sizes: Vec<usize> = std::iter::once(xs.cols())
                .chain(MLP_HIDDEN)
                .chain(std::iter::once(1))
                .collect();
            let mut rng = SeededRng::new(seed);
            let mut net = MlpParams::init(&sizes, DEFAULT_SLOPE, &mut rng)?;
            let shapes: Vec<(usize, usize)> =
                net.tensors().iter().map(|m| (m.rows(), m.cols())).collect();
            let mut adam = AdamState::new(&shapes, MLP_LR, 0.9, 0.999)?;
            let target = Matrix::column(&ys);
            for epoch in 0..MLP_EPOCHS {
                let mut g = Graph::new();
                let vars = net.register(&mut g);
                let x_node = g.leaf(xs.clone());
                let y_node = g.leaf(target.clone());
                let pred = net.forward_on(&mut g, &vars, x_node)?;
                let diff = g.sub(pred, y_node)?;
                let sq = g.square(diff);
                let loss = g.mean_all(sq);
                if !g.scalar(loss).is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite regression loss at epoch {epoch}"
                    )));
                }
                let grads = g.backward(loss)?;
                let grad_list = vars.collect_grads(&net, &grads);
                let mut params: Vec<&mut Matrix> = net.tensors_mut();
                adam.step(&mut params, &grad_list)?;
            }
            Ok(Regressor {
                kind,
                beta: None,
                net: Some(net),
                feat_mean,
                feat_std,
                y_mean,
                y_std,
            })
        }
    }
}

impl Regressor {
    pub fn input_dim(&self) -> usize {
        self.feat_mean.len()
    }

    pub fn predict(&self, features: &Matrix) -> Result<Vec<f64>> {
        if features.cols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "{} features, regressor expects {}",
                features.cols(),
                self.input_dim()
            )));
        }
        let xs = Matrix::from_fn(features.rows(), features.cols(), |r, c| {
            (features.get(r, c) - self.feat_mean[c]) / self.feat_std[c]
        });
        match self.kind {
            RegressorKind::Linear => {
                let beta = self.beta.as_ref().expect("linear regressor has beta");
                let ones = Matrix::from_fn(xs.rows(), 1, |_, _| 1.0);
                let design = Matrix::hcat(&[&xs, &ones])?;
                Ok(design.matmul(beta)?.col(0))
            }
            RegressorKind::Mlp => {
                let net = self.net.as_ref().expect("mlp regressor has net");
                let out = net.forward(&xs)?;
                Ok(out.col(0).iter().map(|v| v * self.y_std + self.y_mean).collect())
            }
        }
    }
}
