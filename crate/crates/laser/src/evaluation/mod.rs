//! Evaluation protocol: the MAPE metric, multi-seed benchmark sweeps, and
//! the latent-recovery diagnostic.

mod align;
mod sweep;

pub use align::{align_latents, export_scatter, Alignment};
pub use sweep::{
    run_sweep, run_sweep_with, BenchmarkRow, BenchmarkTable, CellResult, SweepAxis, SweepSpec,
};

use crate::error::{Error, Result};

/// Absolute percentage error of the estimate relative to the truth.
pub fn mape(tau_true: f64, tau_hat: f64) -> Result<f64> {
    if tau_true == 0.0 {
        return Err(Error::UndefinedMetric(
            "relative error undefined when the true effect is zero".into(),
        ));
    }
    Ok(((tau_true - tau_hat) / tau_true).abs())
}
