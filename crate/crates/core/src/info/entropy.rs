//! Matrix-based Rényi α-order entropy, joint entropy and total correlation.
//!
//! For a unit-trace Gram matrix `A` with eigenvalues `λ_m`,
//!
//! ```text
//! H_α(A) = 1/(1-α) · log₂ Σ_m λ_m^α
//! ```
//!
//! Joint entropy applies `H_α` to the trace-normalized Hadamard product of the
//! per-variable Grams, and total correlation is the sum of marginal entropies
//! minus the joint entropy. All values are in bits.
//!
//! Each quantity comes in two forms: on plain [`NormalizedGram`]s and on tape
//! nodes, where it is differentiable through the eigendecomposition.

use crate::error::{CumiError, Result};
use crate::info::kernel::NormalizedGram;
use crate::tensor::{sym_eig, Matrix, SpectralFn, Tape, Var, EIGEN_FLOOR};

/// Default entropy order, close to Shannon while keeping `1 - α` nonzero.
pub const DEFAULT_ALPHA: f64 = 1.01;

pub fn check_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(CumiError::Contract(format!(
            "entropy order must be positive, got {alpha}"
        )));
    }
    if (alpha - 1.0).abs() < 1e-12 {
        return Err(CumiError::Contract(
            "entropy order 1 is undefined here; use 1.01 for near-Shannon behaviour".into(),
        ));
    }
    Ok(alpha)
}

/// `Σ λ^α` over eigenvalues at or above the floor.
fn power_sum(a: &Matrix, alpha: f64) -> Result<f64> {
    let eig = sym_eig(a)?;
    Ok(eig
        .values
        .iter()
        .filter(|&&l| l >= EIGEN_FLOOR)
        .map(|l| l.powf(alpha))
        .sum())
}

pub fn renyi_entropy(a: &NormalizedGram, alpha: f64) -> Result<f64> {
    let alpha = check_alpha(alpha)?;
    let s = power_sum(a.matrix(), alpha)?;
    Ok(s.log2() / (1.0 - alpha))
}

fn check_same_n<T>(items: &[T], n: impl Fn(&T) -> usize) -> Result<usize> {
    if items.len() < 2 {
        return Err(CumiError::Contract(format!(
            "joint quantities need at least 2 variables, got {}",
            items.len()
        )));
    }
    let first = n(&items[0]);
    if let Some(bad) = items.iter().map(&n).find(|&m| m != first) {
        return Err(CumiError::dim(
            "joint_entropy",
            format!("Gram sizes {first} and {bad} differ"),
        ));
    }
    Ok(first)
}

/// Trace-normalized Hadamard product of the Grams.
pub fn joint_gram(grams: &[&NormalizedGram]) -> Result<NormalizedGram> {
    check_same_n(grams, |g| g.n())?;
    let mut prod = grams[0].matrix().clone();
    for g in &grams[1..] {
        prod = prod.hadamard(g.matrix())?;
    }
    NormalizedGram::from_kernel(&prod)
}

pub fn joint_entropy(grams: &[&NormalizedGram], alpha: f64) -> Result<f64> {
    renyi_entropy(&joint_gram(grams)?, alpha)
}

pub fn total_correlation(grams: &[&NormalizedGram], alpha: f64) -> Result<f64> {
    let joint = joint_entropy(grams, alpha)?;
    let mut marginals = 0.0;
    for g in grams {
        marginals += renyi_entropy(g, alpha)?;
    }
    Ok(marginals - joint)
}

/// Differentiable `H_α` of a unit-trace Gram node.
pub fn renyi_entropy_var(tape: &Tape, a: Var, alpha: f64) -> Result<Var> {
    let alpha = check_alpha(alpha)?;
    let s = tape.spectral_scalar(a, SpectralFn::Power(alpha))?;
    let l = tape.log2(s)?;
    Ok(tape.scale(l, 1.0 / (1.0 - alpha)))
}

/// Differentiable joint entropy of unit-trace Gram nodes.
pub fn joint_entropy_var(tape: &Tape, grams: &[Var], alpha: f64) -> Result<Var> {
    check_same_n(grams, |g| tape.value(*g).rows())?;
    let mut prod = grams[0];
    for g in &grams[1..] {
        prod = tape.hadamard(prod, *g)?;
    }
    let joint = tape.trace_normalize(prod)?;
    renyi_entropy_var(tape, joint, alpha)
}

/// Differentiable total correlation. Returns `(tc, marginal_entropies)` so a
/// caller that also needs `H(A_0)` can reuse the node.
pub fn total_correlation_var(tape: &Tape, grams: &[Var], alpha: f64) -> Result<(Var, Vec<Var>)> {
    let joint = joint_entropy_var(tape, grams, alpha)?;
    let mut marginals = Vec::with_capacity(grams.len());
    for g in grams {
        marginals.push(renyi_entropy_var(tape, *g, alpha)?);
    }
    let mut sum = marginals[0];
    for m in &marginals[1..] {
        sum = tape.add(sum, *m)?;
    }
    Ok((tape.sub(sum, joint)?, marginals))
}
