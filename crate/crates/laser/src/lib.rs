//! Long-term average treatment effect estimation from short-term outcomes.
//!
//! The observed short-term outcomes of an experiment mix genuine surrogates
//! with noisy proxies of surrogates that were never measured. This crate
//! learns a latent surrogate representation with a conditional variational
//! autoencoder, predicts the long-term outcome from it, and converts the
//! predictions into an average treatment effect with inverse probability
//! weighting. A semi-synthetic world generator, baseline estimators
//! (surrogate-index and back-door regressions), and a multi-seed benchmark
//! harness support end-to-end evaluation against known ground truth.

pub mod config;
pub mod data;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod model;
pub mod numeric;
pub mod report;

pub use error::{Error, Result};
