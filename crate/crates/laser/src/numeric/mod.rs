//! Dense matrices, a fixed-primitive reverse-mode tape, feedforward
//! networks, Adam, and seeded sampling. All arithmetic is f64.

pub mod adam;
pub mod graph;
pub mod linalg;
pub mod matrix;
pub mod mlp;
pub mod rng;

pub use adam::AdamState;
pub use graph::{Gradients, Graph, NodeId};
pub use linalg::{cholesky_solve, ridge_least_squares};
pub use matrix::Matrix;
pub use mlp::{MlpParams, MlpVars, DEFAULT_SLOPE};
pub use rng::{SeededRng, RNG_ALGORITHM_ID};
