//! Central finite-difference gradient checking.

use crate::error::Result;
use crate::tensor::{Matrix, Tape, Var};

/// Compares the tape's analytic gradient against central differences.
///
/// `build` receives a fresh tape and one leaf per entry of `params` and must
/// return a scalar loss that depends only on those leaves. The result is the
/// largest `|analytic - numeric| / max(1, |numeric|)` over every parameter entry.
pub fn grad_check<F>(build: F, params: &[Matrix], eps: f64) -> Result<f64>
where
    F: Fn(&Tape, &[Var]) -> Result<Var>,
{
    let analytic = {
        let tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
        let loss = build(&tape, &vars)?;
        tape.backward(loss)?;
        vars.iter().map(|v| tape.grad(*v)).collect::<Vec<_>>()
    };

    let eval = |ps: &[Matrix]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.leaf(p.clone())).collect();
        let loss = build(&tape, &vars)?;
        Ok(tape.scalar(loss))
    };

    let mut work: Vec<Matrix> = params.to_vec();
    let mut worst = 0.0f64;
    for (pi, grad) in analytic.iter().enumerate() {
        for k in 0..grad.as_slice().len() {
            let orig = work[pi].as_slice()[k];
            work[pi].as_mut_slice()[k] = orig + eps;
            let up = eval(&work)?;
            work[pi].as_mut_slice()[k] = orig - eps;
            let down = eval(&work)?;
            work[pi].as_mut_slice()[k] = orig;

            let numeric = (up - down) / (2.0 * eps);
            let err = (grad.as_slice()[k] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let w = Matrix::from_fn(3, 4, |i, j| (i as f64 - j as f64) * 0.37);
        let err = grad_check(
            |t, v| {
                let sq = t.hadamard(v[0], v[0])?;
                Ok(t.sum(sq))
            },
            &[w],
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-7, "err = {err}");
    }

    #[test]
    fn mlp_layer_with_relu() {
        let x = Matrix::from_fn(5, 3, |i, j| ((i * 3 + j) as f64 * 0.7).sin());
        let w = Matrix::from_fn(3, 4, |i, j| ((i + 5 * j) as f64 * 0.3).cos());
        let b = Matrix::from_fn(1, 4, |_, j| 0.1 * j as f64 - 0.15);
        let err = grad_check(
            |t, v| {
                let h = t.matmul(v[0], v[1])?;
                let h = t.add_row(h, v[2])?;
                let h = t.relu(h);
                let s = t.hadamard(h, h)?;
                Ok(t.mean(s))
            },
            &[x, w, b],
            1e-6,
        )
        .unwrap();
        assert!(err <= 1e-6, "err = {err}");
    }
}
