//! Exact Shannon quantities on small discrete joint distributions.
//!
//! Used as a brute-force reference for identities between entropies and
//! mutual informations; nothing here is estimated from samples.

use crate::error::{CumiError, Result};

/// Probability table over a finite grid, stored row-major over its axes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePmf {
    shape: Vec<usize>,
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl DiscretePmf {
    pub fn new(shape: Vec<usize>, labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        let cells: usize = shape.iter().product();
        if labels.len() != shape.len() {
            return Err(CumiError::Contract(format!(
                "{} axis labels for {} axes",
                labels.len(),
                shape.len()
            )));
        }
        if probs.len() != cells {
            return Err(CumiError::Contract(format!(
                "{} probabilities for a grid of {cells} cells",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(CumiError::Contract(format!("invalid probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(CumiError::Contract(format!("probabilities sum to {total}")));
        }
        Ok(Self {
            shape,
            labels,
            probs,
        })
    }

    /// Product distribution of independent factors, axes concatenated in order.
    pub fn product(factors: &[&DiscretePmf]) -> Result<Self> {
        let mut shape = Vec::new();
        let mut labels = Vec::new();
        let mut probs = vec![1.0];
        for f in factors {
            shape.extend_from_slice(&f.shape);
            labels.extend(f.labels.iter().cloned());
            probs = probs
                .iter()
                .flat_map(|p| f.probs.iter().map(move |q| p * q))
                .collect();
        }
        // renormalize away rounding from the products
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Self::new(shape, labels, probs)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn axis(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Marginal table over `axes` (sorted, deduplicated), as a flat vector.
    fn marginal(&self, axes: &[usize]) -> Result<Vec<f64>> {
        if let Some(&bad) = axes.iter().find(|&&a| a >= self.shape.len()) {
            return Err(CumiError::Contract(format!("axis {bad} out of range")));
        }
        let mut keep: Vec<usize> = axes.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let size: usize = keep.iter().map(|&a| self.shape[a]).product();
        let mut out = vec![0.0; size];
        let mut index = vec![0usize; self.shape.len()];
        for &p in &self.probs {
            let mut flat = 0;
            for &a in &keep {
                flat = flat * self.shape[a] + index[a];
            }
            out[flat] += p;
            // odometer increment, last axis fastest
            for ax in (0..self.shape.len()).rev() {
                index[ax] += 1;
                if index[ax] < self.shape[ax] {
                    break;
                }
                index[ax] = 0;
            }
        }
        Ok(out)
    }

    /// Shannon entropy in bits of the marginal over `axes`.
    pub fn entropy(&self, axes: &[usize]) -> Result<f64> {
        Ok(self
            .marginal(axes)?
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|p| -p * p.log2())
            .sum())
    }

    /// `I(A; B) = H(A) + H(B) - H(A ∪ B)`; the groups may share axes.
    pub fn mutual_information(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        let union: Vec<usize> = a.iter().chain(b).copied().collect();
        Ok(self.entropy(a)? + self.entropy(b)? - self.entropy(&union)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fair(label: &str) -> DiscretePmf {
        DiscretePmf::new(vec![2], vec![label.into()], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn fair_bit() {
        assert_abs_diff_eq!(fair("c").entropy(&[0]).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn coupled_uniques_add_a_bit() {
        let c = fair("c");
        // u1 = u2, a shared fair bit
        let u = DiscretePmf::new(
            vec![2, 2],
            vec!["u1".into(), "u2".into()],
            vec![0.5, 0.0, 0.0, 0.5],
        )
        .unwrap();
        let p = DiscretePmf::product(&[&c, &u]).unwrap();
        assert_eq!(p.mutual_information(&[0, 1], &[0, 2]).unwrap(), 2.0);
    }

    #[test]
    fn independent_uniques() {
        let p = DiscretePmf::product(&[&fair("c"), &fair("u1"), &fair("u2")]).unwrap();
        assert_eq!(p.mutual_information(&[0, 1], &[0, 2]).unwrap(), 1.0);
    }

    #[test]
    fn rejects_invalid() {
        assert!(DiscretePmf::new(vec![2], vec!["a".into()], vec![0.7, 0.7]).is_err());
        assert!(DiscretePmf::new(vec![2], vec!["a".into()], vec![1.2, -0.2]).is_err());
        assert!(DiscretePmf::new(vec![3], vec!["a".into()], vec![0.5, 0.5]).is_err());
        assert!(fair("c").entropy(&[1]).is_err());
    }
}
