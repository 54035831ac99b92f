//! Learning common and unique information from multi-view data.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense matrices, a reverse-mode tape and a Jacobi eigensolver
//!   whose spectral backward rule makes eigenvalue functionals trainable.
//! - [`info`]: matrix-based Rényi entropy, joint entropy, total correlation,
//!   HSIC, and an exact discrete reference for Shannon identities.
//! - [`model`]: per-view common/unique encoders, decoders and a classifier.
//! - [`train`]: the combined objective, an SGD loop and per-epoch diagnostics.
//! - [`synthetic`]: the two-view sinusoid benchmark and a linear CCA baseline.
//! - [`data`]: CSV manifests, standardization and stratified splits.

pub mod data;
pub mod error;
pub mod info;
pub mod model;
pub mod par;
pub mod synthetic;
pub mod tensor;
pub mod train;

pub use error::{CumiError, Result};
pub use tensor::{Matrix, Tape, Var};
