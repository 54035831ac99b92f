//! Hilbert-Schmidt independence criterion (biased estimator).

use crate::error::{CumiError, Result};
use crate::info::kernel::gaussian_kernel;
use crate::tensor::Matrix;

/// `tr(K_x H K_y H) / (N-1)²` with unit-diagonal Gaussian kernels and the
/// centering matrix `H = I - J/N`.
pub fn hsic(x: &Matrix, y: &Matrix, sigma_x: f64, sigma_y: f64) -> Result<f64> {
    let n = x.rows();
    if y.rows() != n {
        return Err(CumiError::dim(
            "hsic",
            format!("{n} samples vs {}", y.rows()),
        ));
    }
    if n < 2 {
        return Err(CumiError::Contract(format!(
            "HSIC needs at least 2 samples, got {n}"
        )));
    }
    let kx = center(&gaussian_kernel(x, sigma_x)?);
    let ky = gaussian_kernel(y, sigma_y)?;
    // tr(HKxH Ky) = Σ_ij (HKxH)_ij (Ky)_ji, and Ky is symmetric
    let t: f64 = kx
        .as_slice()
        .iter()
        .zip(ky.as_slice())
        .map(|(a, b)| a * b)
        .sum();
    let d = (n - 1) as f64;
    Ok(t / (d * d))
}

/// Double centering `H K H`.
fn center(k: &Matrix) -> Matrix {
    let n = k.rows();
    let row_means: Vec<f64> = (0..n)
        .map(|i| k.row(i).iter().sum::<f64>() / n as f64)
        .collect();
    let col_means: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| k.get(i, j)).sum::<f64>() / n as f64)
        .collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    Matrix::from_fn(n, n, |i, j| {
        k.get(i, j) - row_means[i] - col_means[j] + grand
    })
}
