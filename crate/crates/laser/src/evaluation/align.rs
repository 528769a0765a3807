use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::{ridge_least_squares, Matrix};

/// Result of mapping recovered latents onto the true ones by least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// Coefficient of determination for each true latent dimension.
    pub r2_per_dim: Vec<f64>,
    /// The recovered latents mapped through the fitted affine transform.
    pub aligned: Matrix,
    /// True when the recovered latents were rank-deficient and the fit fell
    /// back to a regularized pseudoinverse.
    pub degenerate: bool,
}

const ALIGN_RIDGE: f64 = 1e-10;

/// Fit an affine map (with intercept) from the recovered latents to each
/// true latent dimension. Identifiability holds only up to an invertible
/// affine transform, so r-squared of this fit is the faithful recovery
/// score.
pub fn align_latents(s_true: &Matrix, s_hat: &Matrix) -> Result<Alignment> {
    if s_true.rows() != s_hat.rows() {
        return Err(Error::Dimension(format!(
            "{} true rows vs {} recovered rows",
            s_true.rows(),
            s_hat.rows()
        )));
    }
    if s_true.rows() < 2 {
        return Err(Error::Degenerate("alignment needs at least two rows".into()));
    }
    let n = s_true.rows();
    let ones = Matrix::from_fn(n, 1, |_, _| 1.0);
    let design = Matrix::hcat(&[s_hat, &ones])?;
    let (beta, degenerate) = ridge_least_squares(&design, s_true, ALIGN_RIDGE)?;
    let aligned = design.matmul(&beta)?;

    let mut r2 = Vec::with_capacity(s_true.cols());
    for j in 0..s_true.cols() {
        let truth = s_true.col(j);
        let fit = aligned.col(j);
        let mean = truth.iter().sum::<f64>() / n as f64;
        let sst: f64 = truth.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sse: f64 = truth.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum();
        r2.push(if sst > 0.0 { 1.0 - sse / sst } else { 0.0 });
    }
    Ok(Alignment { r2_per_dim: r2, aligned, degenerate })
}

/// Write paired true/aligned latent coordinates plus the treatment label as
/// CSV for external plotting.
pub fn export_scatter(s_true: &Matrix, aligned: &Matrix, t: &[u8], path: &Path) -> Result<()> {
    if s_true.rows() != aligned.rows() || s_true.cols() != aligned.cols() {
        return Err(Error::Dimension(format!(
            "true latents {}x{} vs aligned {}x{}",
            s_true.rows(),
            s_true.cols(),
            aligned.rows(),
            aligned.cols()
        )));
    }
    if t.len() != s_true.rows() {
        return Err(Error::Dimension(format!(
            "{} treatment labels for {} rows",
            t.len(),
            s_true.rows()
        )));
    }
    let mut out = String::new();
    for j in 0..s_true.cols() {
        let _ = write!(out, "true_s{j},");
    }
    for j in 0..s_true.cols() {
        let _ = write!(out, "aligned_s{j},");
    }
    out.push_str("t\n");
    for i in 0..s_true.rows() {
        for v in s_true.row(i) {
            let _ = write!(out, "{v},");
        }
        for v in aligned.row(i) {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{}", t[i]);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}
