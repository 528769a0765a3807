use crate::error::{Error, Result};

use super::matrix::Matrix;

/// Cholesky solve of the symmetric positive definite system `A x = b` for
/// every column of `b`. Fails when `A` is not positive definite.
pub fn cholesky_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n || b.rows() != n {
        return Err(Error::Dimension(format!(
            "cholesky_solve on {}x{} with rhs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    // lower-triangular factor L with A = L L^T
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Numeric(format!(
                        "matrix not positive definite at pivot {i} (value {sum})"
                    )));
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut x = Matrix::zeros(n, b.cols());
    for c in 0..b.cols() {
        // forward solve L y = b
        let mut y = vec![0.0f64; n];
        for i in 0..n {
            let mut sum = b.get(i, c);
            for k in 0..i {
                sum -= l[i * n + k] * y[k];
            }
            y[i] = sum / l[i * n + i];
        }
        // back solve L^T x = y
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in i + 1..n {
                sum -= l[k * n + i] * x.get(k, c);
            }
            x.set(i, c, sum / l[i * n + i]);
        }
    }
    Ok(x)
}

/// Ridge-regularized least squares: minimizes `|X beta - y|^2 + ridge |beta|^2`
/// per column of `y`. Escalates the ridge when the Gram matrix is numerically
/// singular; returns the coefficients and whether escalation was needed.
pub fn ridge_least_squares(x: &Matrix, y: &Matrix, ridge: f64) -> Result<(Matrix, bool)> {
    if x.rows() != y.rows() {
        return Err(Error::Dimension(format!(
            "least squares with {} design rows and {} target rows",
            x.rows(),
            y.rows()
        )));
    }
    let xt = x.transpose();
    let gram = xt.matmul(x)?;
    let rhs = xt.matmul(y)?;
    let scale = (0..gram.rows()).map(|i| gram.get(i, i)).fold(1.0, f64::max);
    // a pivot this small relative to the diagonal means the design is
    // numerically rank-deficient even if the factorization would succeed
    let pivot_floor = scale * 1e-9;
    let mut lambda = ridge;
    let mut degenerate = false;
    for _ in 0..24 {
        let mut reg = gram.clone();
        for i in 0..reg.rows() {
            reg.set(i, i, reg.get(i, i) + lambda);
        }
        if min_cholesky_pivot(&reg).is_some_and(|p| p >= pivot_floor) {
            if let Ok(beta) = cholesky_solve(&reg, &rhs) {
                if beta.is_finite() {
                    return Ok((beta, degenerate));
                }
            }
        }
        degenerate = true;
        lambda = (lambda * 10.0).max(scale * 1e-12);
    }
    Err(Error::Numeric("least squares failed even with escalated ridge".into()))
}

/// Smallest diagonal value encountered during Cholesky factorization (before
/// the square root), or `None` when the matrix is not positive definite.
fn min_cholesky_pivot(a: &Matrix) -> Option<f64> {
    let n = a.rows();
    let mut l = vec![0.0f64; n * n];
    let mut min_pivot = f64::INFINITY;
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                min_pivot = min_pivot.min(sum);
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(min_pivot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng::SeededRng;

    #[test]
    fn solves_spd_system() {
        let a = Matrix::from_vec(2, 2, vec![4.0, 1.0, 1.0, 3.0]).unwrap();
        let b = Matrix::column(&[1.0, 2.0]);
        let x = cholesky_solve(&a, &b).unwrap();
        let back = a.matmul(&x).unwrap();
        assert!((back.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((back.get(1, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(cholesky_solve(&a, &Matrix::column(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn least_squares_recovers_coefficients() {
        let mut rng = SeededRng::new(11);
        let x = rng.normal_matrix(200, 3);
        let beta = Matrix::column(&[2.0, -1.0, 0.5]);
        let y = x.matmul(&beta).unwrap();
        let (fit, degenerate) = ridge_least_squares(&x, &y, 1e-10).unwrap();
        assert!(!degenerate);
        for i in 0..3 {
            assert!((fit.get(i, 0) - beta.get(i, 0)).abs() < 1e-6);
        }
    }

    #[test]
    fn rank_deficient_design_flags_degeneracy() {
        // duplicated column
        let mut rng = SeededRng::new(3);
        let base = rng.normal_matrix(50, 1);
        let x = Matrix::hcat(&[&base, &base]).unwrap();
        let y = base.clone();
        let (_, degenerate) = ridge_least_squares(&x, &y, 0.0).unwrap();
        assert!(degenerate);
    }
}
