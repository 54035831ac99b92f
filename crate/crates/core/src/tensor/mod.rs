//! Dense matrices, a reverse-mode tape, and the symmetric eigensolver it
//! differentiates through.

pub mod eig;
mod gradcheck;
mod matrix;
mod tape;

pub use eig::{sym_eig, EigenPair};
pub use gradcheck::grad_check;
pub use matrix::Matrix;
pub use tape::{SpectralFn, Tape, Var, EIGEN_FLOOR};
