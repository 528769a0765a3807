use crate::error::{Error, Result};

use super::graph::{Graph, NodeId};
use super::matrix::Matrix;
use super::rng::SeededRng;

/// Default LeakyReLU negative slope.
pub const DEFAULT_SLOPE: f64 = 0.01;

/// Feedforward network parameters. LeakyReLU after every layer except the
/// last; the last layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Matrix>,
    pub biases: Vec<Matrix>, // 1 x out each
    pub activation_slope: f64,
}

impl MlpParams {
    /// He-style initialization scaled for LeakyReLU.
    pub fn init(layer_sizes: &[usize], slope: f64, rng: &mut SeededRng) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config("an MLP needs at least input and output sizes".into()));
        }
        if !(0.0 < slope && slope < 1.0) {
            return Err(Error::Config(format!("activation slope {slope} outside (0, 1)")));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for win in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (win[0], win[1]);
            let std = (2.0 / (1.0 + slope * slope) / fan_in.max(1) as f64).sqrt();
            weights.push(rng.normal_matrix(fan_in, fan_out).scale(std));
            biases.push(Matrix::zeros(1, fan_out));
        }
        Ok(MlpParams {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            activation_slope: slope,
        })
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Plain forward pass, one input row per matrix row.
    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.input_size() {
            return Err(Error::Dimension(format!(
                "mlp input width {} != expected {}",
                input.cols(),
                self.input_size()
            )));
        }
        let last = self.weights.len() - 1;
        let mut h = input.clone();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            h = h.matmul(w)?.add_row(b)?;
            if i != last {
                let slope = self.activation_slope;
                h = h.map(|x| if x >= 0.0 { x } else { slope * x });
            }
        }
        Ok(h)
    }

    /// Register all parameters of this network as graph leaves.
    pub fn register(&self, g: &mut Graph) -> MlpVars {
        MlpVars {
            weights: self.weights.iter().map(|w| g.leaf(w.clone())).collect(),
            biases: self.biases.iter().map(|b| g.leaf(b.clone())).collect(),
        }
    }

    /// Differentiable forward pass through previously registered parameters.
    pub fn forward_on(&self, g: &mut Graph, vars: &MlpVars, input: NodeId) -> Result<NodeId> {
        let last = vars.weights.len() - 1;
        let mut h = input;
        for i in 0..vars.weights.len() {
            h = g.matmul(h, vars.weights[i])?;
            h = g.add_row(h, vars.biases[i])?;
            if i != last {
                h = g.leaky_relu(h, self.activation_slope);
            }
        }
        Ok(h)
    }

    /// Flat view of parameters in a fixed order (weights and biases
    /// interleaved per layer); pairs with [`MlpVars::collect_grads`].
    pub fn tensors(&self) -> Vec<&Matrix> {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w, b])
            .collect()
    }
}

/// Graph node ids of one network's parameters.
pub struct MlpVars {
    pub weights: Vec<NodeId>,
    pub biases: Vec<NodeId>,
}

impl MlpVars {
    /// Gradients in the same order as [`MlpParams::tensors`].
    pub fn collect_grads(
        &self,
        params: &MlpParams,
        grads: &super::graph::Gradients,
    ) -> Vec<Matrix> {
        let mut out = Vec::new();
        for i in 0..self.weights.len() {
            let w = &params.weights[i];
            out.push(grads.for_leaf(self.weights[i], (w.rows(), w.cols())));
            let b = &params.biases[i];
            out.push(grads.for_leaf(self.biases[i], (b.rows(), b.cols())));
        }
        out
    }
}
