#![no_std]
//! Constrained empirical risk minimization on implicitly defined manifolds.
//!
//! Parameters split into a flat block `α` and a constrained block `θ` with
//! `F(θ) = 0`. Optimization runs in graph charts built from the implicit function
//! theorem and retracts every step back onto the manifold with Newton's method.

extern crate alloc;

pub mod constraint_zoo;
pub mod contour;
pub mod dft_conv;
pub mod error;
pub mod fft;
pub mod implicit_manifold;
pub mod linalg;
pub mod mra;
pub mod riemannian_sgd;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use nalgebra::{DMatrix, DVector};
