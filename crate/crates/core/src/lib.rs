//! Kaczmarz-type solvers for tensor, matrix and vector linear systems with
//! strongly convex regularizers, built on the t-product algebra.
//!
//! The crate is organized bottom up:
//! - [`tensor`]: third-order tensors, block circulants and the t-product,
//! - [`linalg`]: SVD, soft thresholding and singular value thresholding,
//! - [`convex`]: regularizers, their conjugate gradients and Bregman distances,
//! - [`solvers`]: the randomized and cyclic Bregman-Kaczmarz family,
//! - [`apps`]: problem generators, image utilities and quality metrics,
//! - [`verify`]: the algebraic identity suite behind `selftest`.

// Negated float comparisons in this crate reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apps;
pub mod convex;
pub mod error;
pub mod linalg;
pub mod random;
pub mod solvers;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use tensor::{circ, tprod_fft, tprod_naive, CMatrix, ComplexTensor3, Matrix, Spectrum, Squeezed, Tensor, Tensor3};
