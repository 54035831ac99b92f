//! Information estimators: kernel Grams, matrix-based Rényi entropy, total
//! correlation, HSIC, and an exact discrete reference.

pub mod discrete;
pub mod entropy;
pub mod hsic;
pub mod kernel;

pub use discrete::DiscretePmf;
pub use entropy::{
    check_alpha, joint_entropy, joint_entropy_var, joint_gram, renyi_entropy, renyi_entropy_var,
    total_correlation, total_correlation_var, DEFAULT_ALPHA,
};
pub use hsic::hsic;
pub use kernel::{
    gaussian_gram, gaussian_kernel, gaussian_kernel_with, median_bandwidth, BandwidthMode,
    NormalizedGram,
};

use serde::{Deserialize, Serialize};

/// Kernel width rule and entropy order used together by an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub bandwidth: BandwidthMode,
    pub alpha: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            bandwidth: BandwidthMode::Median,
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl KernelConfig {
    pub fn validate(self) -> crate::Result<Self> {
        self.bandwidth.validate()?;
        check_alpha(self.alpha)?;
        Ok(self)
    }
}
