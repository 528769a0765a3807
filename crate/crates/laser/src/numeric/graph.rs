//! Tape-based reverse-mode differentiation over matrix-valued nodes.
//!
//! The primitive set is fixed to exactly what the training losses need:
//! affine maps, LeakyReLU, elementwise exp/log/sigmoid/square, clamping,
//! concatenation/slicing, and full reductions. Nodes are appended in
//! construction order, so iterating ids in reverse is a valid topological
//! order for backpropagation.

use crate::error::{Error, Result};

use super::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    LeakyRelu(NodeId, f64),
    Exp(NodeId),
    Log(NodeId),
    Sigmoid(NodeId),
    Square(NodeId),
    Clamp(NodeId, f64, f64),
    SumAll(NodeId),
    MeanAll(NodeId),
    SliceCols(NodeId, usize, usize),
    ConcatCols(NodeId, NodeId),
}

struct Node {
    value: Matrix,
    op: Op,
}

/// Computation tape. Build the loss forward, then call [`Graph::backward`]
/// on the scalar output to obtain gradients for every leaf of interest.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&mut self, value: Matrix, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        debug_assert_eq!((v.rows(), v.cols()), (1, 1));
        v.data()[0]
    }

    /// Register a leaf. Constants and trainable parameters are both leaves;
    /// the caller decides which gradients it reads back.
    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).hadamard(self.value(b))?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    /// Broadcast-add a 1 x k row vector to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let v = self.value(a).add_row(self.value(row))?;
        Ok(self.push(v, Op::AddRow(a, row)))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).scale(c);
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).map(|x| x + c);
        self.push(v, Op::AddScalar(a))
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> NodeId {
        let v = self.value(a).map(|x| if x >= 0.0 { x } else { slope * x });
        self.push(v, Op::LeakyRelu(a, slope))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn log(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::ln);
        self.push(v, Op::Log(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x * x);
        self.push(v, Op::Square(a))
    }

    /// Elementwise clamp; gradient is blocked where the bound is active.
    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let v = self.value(a).map(|x| x.clamp(lo, hi));
        self.push(v, Op::Clamp(a, lo, hi))
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = Matrix::from_vec(1, 1, vec![self.value(a).sum()]).unwrap();
        self.push(v, Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let v = Matrix::from_vec(1, 1, vec![self.value(a).mean()]).unwrap();
        self.push(v, Op::MeanAll(a))
    }

    pub fn slice_cols(&mut self, a: NodeId, from: usize, to: usize) -> NodeId {
        let v = self.value(a).slice_cols(from, to);
        self.push(v, Op::SliceCols(a, from, to))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = Matrix::hcat(&[self.value(a), self.value(b)])?;
        Ok(self.push(v, Op::ConcatCols(a, b)))
    }

    /// Reverse-mode sweep from a 1 x 1 loss node. Returns the gradient of the
    /// loss with respect to every node (leaves included).
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lv = self.value(loss);
        if (lv.rows(), lv.cols()) != (1, 1) {
            return Err(Error::Dimension(format!(
                "backward requires a scalar loss node, got {}x{}",
                lv.rows(),
                lv.cols()
            )));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Matrix::from_vec(1, 1, vec![1.0]).unwrap());

        for id in (0..=loss.0).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            match self.nodes[id].op.clone() {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let da = g.matmul(&self.value(b).transpose())?;
                    let db = self.value(a).transpose().matmul(&g)?;
                    self.accumulate(&mut grads, a, da)?;
                    self.accumulate(&mut grads, b, db)?;
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut grads, a, g.clone())?;
                    self.accumulate(&mut grads, b, g)?;
                }
                Op::Sub(a, b) => {
                    self.accumulate(&mut grads, a, g.clone())?;
                    self.accumulate(&mut grads, b, g.scale(-1.0))?;
                }
                Op::Mul(a, b) => {
                    let da = g.hadamard(self.value(b))?;
                    let db = g.hadamard(self.value(a))?;
                    self.accumulate(&mut grads, a, da)?;
                    self.accumulate(&mut grads, b, db)?;
                }
                Op::AddRow(a, row) => {
                    self.accumulate(&mut grads, a, g.clone())?;
                    self.accumulate(&mut grads, row, g.col_sums())?;
                }
                Op::Scale(a, c) => self.accumulate(&mut grads, a, g.scale(c))?,
                Op::AddScalar(a) => self.accumulate(&mut grads, a, g)?,
                Op::LeakyRelu(a, slope) => {
                    let mask = self.value(a).map(|x| if x >= 0.0 { 1.0 } else { slope });
                    self.accumulate(&mut grads, a, g.hadamard(&mask)?)?;
                }
                Op::Exp(a) => {
                    // value already holds exp(x)
                    let d = g.hadamard(&self.nodes[id].value)?;
                    self.accumulate(&mut grads, a, d)?;
                }
                Op::Log(a) => {
                    let d = g.zip_with(self.value(a), |gi, x| gi / x)?;
                    self.accumulate(&mut grads, a, d)?;
                }
                Op::Sigmoid(a) => {
                    let d = g.zip_with(&self.nodes[id].value, |gi, s| gi * s * (1.0 - s))?;
                    self.accumulate(&mut grads, a, d)?;
                }
                Op::Square(a) => {
                    let d = g.zip_with(self.value(a), |gi, x| gi * 2.0 * x)?;
                    self.accumulate(&mut grads, a, d)?;
                }
                Op::Clamp(a, lo, hi) => {
                    let mask =
                        self.value(a).map(|x| if x > lo && x < hi { 1.0 } else { 0.0 });
                    self.accumulate(&mut grads, a, g.hadamard(&mask)?)?;
                }
                Op::SumAll(a) => {
                    let s = g.data()[0];
                    let v = self.value(a);
                    self.accumulate(
                        &mut grads,
                        a,
                        Matrix::from_fn(v.rows(), v.cols(), |_, _| s),
                    )?;
                }
                Op::MeanAll(a) => {
                    let v = self.value(a);
                    let n = (v.rows() * v.cols()).max(1) as f64;
                    let s = g.data()[0] / n;
                    self.accumulate(
                        &mut grads,
                        a,
                        Matrix::from_fn(v.rows(), v.cols(), |_, _| s),
                    )?;
                }
                Op::SliceCols(a, from, _to) => {
                    let v = self.value(a);
                    let mut d = Matrix::zeros(v.rows(), v.cols());
                    for r in 0..g.rows() {
                        for c in 0..g.cols() {
                            d.set(r, from + c, g.get(r, c));
                        }
                    }
                    self.accumulate(&mut grads, a, d)?;
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.value(a).cols();
                    let da = g.slice_cols(0, ca);
                    let db = g.slice_cols(ca, g.cols());
                    self.accumulate(&mut grads, a, da)?;
                    self.accumulate(&mut grads, b, db)?;
                }
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(
        &self,
        grads: &mut [Option<Matrix>],
        id: NodeId,
        delta: Matrix,
    ) -> Result<()> {
        match &mut grads[id.0] {
            Some(existing) => {
                *existing = existing.add(&delta)?;
            }
            slot @ None => *slot = Some(delta),
        }
        Ok(())
    }
}

/// Gradient of a scalar loss with respect to every graph node.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Matrix> {
        self.grads[id.0].as_ref()
    }

    /// Gradient for a leaf, zero-filled when the loss does not depend on it.
    pub fn for_leaf(&self, id: NodeId, shape: (usize, usize)) -> Matrix {
        self.grads[id.0].clone().unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        // loss = sum(w^2), w = (1, -2) -> grad (2, -4)
        let mut g = Graph::new();
        let w = g.leaf(Matrix::row_vec(&[1.0, -2.0]));
        let sq = g.square(w);
        let loss = g.sum_all(sq);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(w).unwrap().data(), &[2.0, -4.0]);
    }

    #[test]
    fn unused_parameter_zero_gradient() {
        let mut g = Graph::new();
        let w = g.leaf(Matrix::row_vec(&[3.0]));
        let unused = g.leaf(Matrix::row_vec(&[5.0]));
        let loss = g.sum_all(w);
        let grads = g.backward(loss).unwrap();
        assert!(grads.get(unused).is_none());
        assert_eq!(grads.for_leaf(unused, (1, 1)).data(), &[0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::new();
        let w = g.leaf(Matrix::zeros(2, 2));
        assert!(g.backward(w).is_err());
    }

    #[test]
    fn shared_parent_accumulates() {
        // loss = sum(x * x) must match d/dx = 2x via accumulation
        let mut g = Graph::new();
        let x = g.leaf(Matrix::row_vec(&[3.0]));
        let prod = g.mul(x, x).unwrap();
        let loss = g.sum_all(prod);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[6.0]);
    }
}
