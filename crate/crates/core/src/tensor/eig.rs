//! Symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! Each sweep visits every off-diagonal pair `(p, q)` once and applies the
//! plane rotation that zeroes `a[p][q]`. The off-diagonal mass shrinks
//! quadratically once it is small, and the accumulated rotations form the
//! eigenvector matrix. Jacobi is slower than tridiagonal QR for large inputs,
//! but it is simple and delivers eigenvalues with high relative accuracy,
//! which matters for the tiny tail of a Gram spectrum.

use crate::error::{CumiError, Result};
use crate::tensor::Matrix;

/// Off-diagonal Frobenius norm (relative to `max(1, ‖A‖_F)`) at which a sweep stops.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues in descending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenPair {
    /// `U diag(λ) Uᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(|l| l)
    }

    /// `U diag(f(λ)) Uᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let u = &self.vectors;
        let w: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for (m, wm) in w.iter().enumerate() {
                    acc += u.get(i, m) * wm * u.get(j, m);
                }
                out.set(i, j, acc);
                out.set(j, i, acc);
            }
        }
        out
    }
}

/// Eigendecomposition of `(A + Aᵀ)/2`.
///
/// Deterministic for identical input bits. Each eigenvector is signed so its
/// first non-negligible component is positive.
pub fn sym_eig(a: &Matrix) -> Result<EigenPair> {
    if !a.is_square() {
        return Err(CumiError::dim(
            "sym_eig",
            format!("{}x{} is not square", a.rows(), a.cols()),
        ));
    }
    let n = a.rows();
    let mut w = a.symmetrize()?.into_vec();
    let mut v = Matrix::identity(n).into_vec();

    let tol = JACOBI_TOLERANCE * a.frobenius_norm().max(1.0);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&w, n) <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut w, &mut v, n, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&w, n) > tol {
        return Err(CumiError::Numeric(format!(
            "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps (n = {n})"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[j * n + j].total_cmp(&w[i * n + i]));

    let values: Vec<f64> = order.iter().map(|&i| w[i * n + i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let sign = match (0..n).map(|r| v[r * n + src]).find(|x| x.abs() > 1e-12) {
            Some(x) if x < 0.0 => -1.0,
            _ => 1.0,
        };
        for r in 0..n {
            vectors.set(r, col, sign * v[r * n + src]);
        }
    }
    Ok(EigenPair { values, vectors })
}

fn off_diagonal_norm(w: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += w[i * n + j] * w[i * n + j];
            }
        }
    }
    s.sqrt()
}

fn rotate(w: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = w[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = w[p * n + p];
    let aqq = w[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.is_finite() {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    } else {
        // apq is negligible against the diagonal gap
        0.5 / theta
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        let akp = w[k * n + p];
        let akq = w[k * n + q];
        w[k * n + p] = c * akp - s * akq;
        w[k * n + q] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = w[p * n + k];
        let aqk = w[q * n + k];
        w[p * n + k] = c * apk - s * aqk;
        w[q * n + k] = s * apk + c * aqk;
    }
    w[p * n + q] = 0.0;
    w[q * n + p] = 0.0;

    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = c * vkp - s * vkq;
        v[k * n + q] = s * vkp + c * vkq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn identity_has_unit_spectrum() {
        let e = sym_eig(&Matrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_sorted_descending() {
        let e = sym_eig(&Matrix::diag(&[1.0, 3.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
    }

    #[test]
    fn two_by_two_symmetric() {
        let a = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let e = sym_eig(&a).unwrap();
        assert_abs_diff_eq!(e.values[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(e.vectors.get(0, 0), r, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors.get(1, 0), r, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors.get(0, 1), r, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors.get(1, 1), -r, epsilon = 1e-14);
    }

    #[test]
    fn rejects_non_square() {
        assert!(matches!(
            sym_eig(&Matrix::zeros(2, 3)),
            Err(CumiError::Dimension { .. })
        ));
    }

    #[test]
    fn empty_and_scalar() {
        assert!(sym_eig(&Matrix::zeros(0, 0)).unwrap().values.is_empty());
        assert_eq!(sym_eig(&Matrix::scalar(-2.5)).unwrap().values, vec![-2.5]);
    }

    fn symmetric(n: usize) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(-5.0f64..5.0, n * n).prop_map(move |d| {
            let m = Matrix::new(n, n, d).unwrap();
            m.symmetrize().unwrap()
        })
    }

    proptest! {
        #[test]
        fn reconstructs_and_is_orthogonal(a in symmetric(8)) {
            let e = sym_eig(&a).unwrap();
            prop_assert!(e.reconstruct().sub(&a).unwrap().frobenius_norm() <= 1e-8);
            let u = &e.vectors;
            let utu = u.transpose().matmul(u).unwrap();
            prop_assert!(utu.sub(&Matrix::identity(8)).unwrap().frobenius_norm() <= 1e-8);
            prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn bitwise_deterministic(a in symmetric(6)) {
            let x = sym_eig(&a).unwrap();
            let y = sym_eig(&a.clone()).unwrap();
            prop_assert_eq!(x, y);
        }
    }
}
