//! Gaussian kernels and bandwidth selection.

use serde::{Deserialize, Serialize};

use crate::error::{CumiError, Result};
use crate::par::{self, Exec};
use crate::tensor::Matrix;

/// How the Gaussian kernel width is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthMode {
    /// Median pairwise distance of the rows being embedded.
    #[default]
    Median,
    Fixed(f64),
}

impl BandwidthMode {
    pub fn validate(self) -> Result<Self> {
        if let BandwidthMode::Fixed(s) = self {
            if !(s > 0.0 && s.is_finite()) {
                return Err(CumiError::Contract(format!(
                    "bandwidth must be positive, got {s}"
                )));
            }
        }
        Ok(self)
    }

    /// Bandwidth for `x`. The median is taken on plain values, never through a tape.
    pub fn sigma_for(self, x: &Matrix) -> Result<f64> {
        match self {
            BandwidthMode::Median => median_bandwidth(x),
            BandwidthMode::Fixed(s) => Ok(s),
        }
    }
}

/// Median of the `N(N-1)/2` pairwise Euclidean distances between rows, or
/// 1.0 when that median is zero.
pub fn median_bandwidth(x: &Matrix) -> Result<f64> {
    let n = x.rows();
    if n < 2 {
        return Err(CumiError::Contract(format!(
            "median bandwidth needs at least 2 samples, got {n}"
        )));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(sq_dist(x.row(i), x.row(j)).sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    Ok(if median > 0.0 { median } else { 1.0 })
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Unnormalized Gaussian kernel `K(m, n) = exp(-‖x_m - x_n‖² / (2σ²))`.
pub fn gaussian_kernel(x: &Matrix, sigma: f64) -> Result<Matrix> {
    gaussian_kernel_with(x, sigma, Exec::Auto)
}

pub fn gaussian_kernel_with(x: &Matrix, sigma: f64, exec: Exec) -> Result<Matrix> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(CumiError::Contract(format!(
            "bandwidth must be positive, got {sigma}"
        )));
    }
    if !x.is_finite() {
        return Err(CumiError::Numeric(
            "non-finite sample in kernel input".into(),
        ));
    }
    let n = x.rows();
    let denom = 2.0 * sigma * sigma;
    let mut out = vec![0.0; n * n];
    par::for_each_row(exec, &mut out, n, n * n * x.cols().max(1), |i, row| {
        let xi = x.row(i);
        for (j, k) in row.iter_mut().enumerate() {
            *k = if i == j {
                1.0
            } else {
                (-sq_dist(xi, x.row(j)) / denom).exp()
            };
        }
    });
    Matrix::new(n, n, out)
}

/// Symmetric PSD matrix with unit trace, the input of the matrix-based entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedGram(Matrix);

impl NormalizedGram {
    /// `K / tr(K)` for a symmetric kernel matrix.
    pub fn from_kernel(k: &Matrix) -> Result<Self> {
        if !k.is_square() {
            return Err(CumiError::dim(
                "NormalizedGram",
                format!("{}x{} is not square", k.rows(), k.cols()),
            ));
        }
        let t = k.trace();
        if !(t > 0.0 && t.is_finite()) {
            return Err(CumiError::Numeric(format!(
                "kernel trace {t} cannot normalize"
            )));
        }
        Self::new(k.scale(1.0 / t))
    }

    /// Wraps a matrix that already has unit trace and is symmetric.
    pub fn new(a: Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(CumiError::dim(
                "NormalizedGram",
                format!("{}x{} is not square", a.rows(), a.cols()),
            ));
        }
        if (a.trace() - 1.0).abs() > 1e-10 {
            return Err(CumiError::Contract(format!("trace {} is not 1", a.trace())));
        }
        if a.asymmetry() > 1e-10 {
            return Err(CumiError::Contract(
                "normalized Gram is not symmetric".into(),
            ));
        }
        Ok(Self(a))
    }

    /// `I / N`.
    pub fn uniform(n: usize) -> Self {
        Self(Matrix::identity(n).scale(1.0 / n as f64))
    }

    /// `J / N`: every sample identical.
    pub fn constant(n: usize) -> Self {
        Self(Matrix::filled(n, n, 1.0 / n as f64))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self(self.0.permute_symmetric(perm))
    }
}

/// Gaussian Gram of the rows of `x`, normalized to unit trace (`K / N`).
pub fn gaussian_gram(x: &Matrix, sigma: f64) -> Result<NormalizedGram> {
    NormalizedGram::from_kernel(&gaussian_kernel(x, sigma)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn col(v: &[f64]) -> Matrix {
        Matrix::column_vector(v)
    }

    #[test]
    fn median_examples() {
        assert_eq!(median_bandwidth(&col(&[0.0, 2.0])).unwrap(), 2.0);
        assert_eq!(median_bandwidth(&col(&[0.0, 1.0, 2.0])).unwrap(), 1.0);
        assert_eq!(median_bandwidth(&col(&[3.0, 3.0, 3.0])).unwrap(), 1.0);
        assert!(matches!(
            median_bandwidth(&col(&[1.0])),
            Err(CumiError::Contract(_))
        ));
    }

    #[test]
    fn gram_diagonal_and_constant() {
        let x = Matrix::from_fn(5, 3, |i, j| (i * j) as f64 * 0.3);
        let a = gaussian_gram(&x, 0.7).unwrap();
        for i in 0..5 {
            assert_abs_diff_eq!(a.matrix().get(i, i), 0.2, epsilon = 1e-15);
        }
        let same = Matrix::filled(4, 2, 1.5);
        let a = gaussian_gram(&same, 1.0).unwrap();
        assert!(a.matrix().max_abs_diff(&Matrix::filled(4, 4, 0.25)) < 1e-15);
    }

    #[test]
    fn gram_three_points() {
        let a = gaussian_gram(&col(&[0.0, 1.0, 2.0]), 1.0).unwrap();
        let m = a.matrix();
        assert_abs_diff_eq!(m.get(0, 1), (-0.5f64).exp() / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.get(0, 1), 0.20218, epsilon = 1e-5);
        assert_abs_diff_eq!(m.get(0, 2), 0.04511, epsilon = 1e-5);
    }

    #[test]
    fn kernel_rejects_bad_input() {
        assert!(gaussian_kernel(&col(&[0.0, 1.0]), 0.0).is_err());
        let mut x = col(&[0.0, 1.0]);
        x.set(1, 0, f64::INFINITY);
        assert!(gaussian_kernel(&x, 1.0).unwrap_err().is_numeric());
    }

    #[test]
    fn serial_and_parallel_kernels_identical() {
        let x = Matrix::from_fn(200, 4, |i, j| ((i * 13 + j) as f64).sin());
        let s = gaussian_kernel_with(&x, 0.8, Exec::Serial).unwrap();
        let p = gaussian_kernel_with(&x, 0.8, Exec::Auto).unwrap();
        assert_eq!(s, p);
    }
}
