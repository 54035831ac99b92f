use crate::error::{CumiError, Result};
use crate::tensor::{sym_eig, Matrix};

/// Added to the diagonal of both covariance matrices before whitening.
pub const CCA_RIDGE: f64 = 1e-8;

/// Canonical directions, correlations (descending) and the projected samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Cca {
    pub x_weights: Matrix,
    pub y_weights: Matrix,
    pub correlations: Vec<f64>,
    pub x_scores: Matrix,
    pub y_scores: Matrix,
}

fn centred(x: &Matrix) -> Matrix {
    let n = x.rows() as f64;
    let means: Vec<f64> = (0..x.cols())
        .map(|j| x.column(j).iter().sum::<f64>() / n)
        .collect();
    Matrix::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j) - means[j])
}

fn covariance(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    Ok(a.transpose().matmul(b)?.scale(1.0 / (a.rows() - 1) as f64))
}

fn inverse_sqrt(c: &Matrix) -> Result<Matrix> {
    let eig = sym_eig(c)?;
    let top = eig.values.first().copied().unwrap_or(0.0);
    if let Some(bad) = eig.values.iter().find(|&&l| !(l > 1e-15 * top.max(1.0))) {
        return Err(CumiError::Numeric(format!(
            "covariance is singular beyond ridge repair (eigenvalue {bad:e})"
        )));
    }
    Ok(eig.reconstruct_with(|l| 1.0 / l.sqrt()))
}

/// Classical CCA between the rows of `x` (N×p) and `y` (N×q): whiten both
/// covariances, then take the singular pairs of the whitened cross-covariance
/// `T = Cxx^{-1/2} Cxy Cyy^{-1/2}` via the eigenvectors of `T Tᵀ`.
pub fn linear_cca(x: &Matrix, y: &Matrix, k: usize) -> Result<Cca> {
    let (n, p, q) = (x.rows(), x.cols(), y.cols());
    if y.rows() != n {
        return Err(CumiError::dim(
            "linear_cca",
            format!("{n} and {} rows", y.rows()),
        ));
    }
    if n <= p.max(q) {
        return Err(CumiError::Contract(format!(
            "CCA needs more samples ({n}) than features ({})",
            p.max(q)
        )));
    }
    if k == 0 || k > p.min(q) {
        return Err(CumiError::Contract(format!(
            "{k} components requested, at most {} available",
            p.min(q)
        )));
    }
    let (xc, yc) = (centred(x), centred(y));
    let cxx = covariance(&xc, &xc)?.add(&Matrix::identity(p).scale(CCA_RIDGE))?;
    let cyy = covariance(&yc, &yc)?.add(&Matrix::identity(q).scale(CCA_RIDGE))?;
    let cxy = covariance(&xc, &yc)?;
    let wx = inverse_sqrt(&cxx)?;
    let wy = inverse_sqrt(&cyy)?;
    let t = wx.matmul(&cxy)?.matmul(&wy)?;
    let eig = sym_eig(&t.matmul(&t.transpose())?)?;

    let mut a = Matrix::zeros(p, k);
    let mut b = Matrix::zeros(q, k);
    let mut correlations = Vec::with_capacity(k);
    for m in 0..k {
        let s = eig.values[m].max(0.0).sqrt();
        let left = eig.vectors.column(m);
        // right singular vector: Tᵀ a / s
        let mut right = vec![0.0; q];
        for (j, r) in right.iter_mut().enumerate() {
            *r = (0..p).map(|i| t.get(i, j) * left[i]).sum::<f64>();
        }
        let norm = right.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            right.iter_mut().for_each(|v| *v /= norm);
        }
        for (i, l) in left.iter().enumerate() {
            a.set(i, m, *l);
        }
        for (j, r) in right.iter().enumerate() {
            b.set(j, m, *r);
        }
        correlations.push(s.min(1.0));
    }
    let x_weights = wx.matmul(&a)?;
    let y_weights = wy.matmul(&b)?;
    Ok(Cca {
        x_scores: xc.matmul(&x_weights)?,
        y_scores: yc.matmul(&y_weights)?,
        x_weights,
        y_weights,
        correlations,
    })
}
