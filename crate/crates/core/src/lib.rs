//! Generalized linear model training with the Newton-Stein method.
//!
//! The Newton-Stein update replaces the Hessian of a GLM objective with an
//! estimate built from a Stein-type identity for Gaussian covariates:
//!
//! ```text
//! E[x xᵀ φ''(⟨x, β⟩)] = E[φ''(⟨x, β⟩)] Σ + E[φ''''(⟨x, β⟩)] Σ β βᵀ Σ
//! ```
//!
//! The covariance `Σ` is estimated once from a row sub-sample and denoised by
//! eigenvalue thresholding, so each iteration only needs two scalar averages,
//! one gradient, and a low-rank matrix-vector product.
//!
//! Modules:
//! - [`glm`]: cumulant families, datasets, objective/gradient/Hessian.
//! - [`stein`]: sub-sampled covariance, thresholding, the factored scaling matrix.
//! - [`optim`]: Newton-Stein loop and the baseline optimizers sharing one trace type.
//! - [`theory`]: step-size and parameter rules, composite-convergence fitting,
//!   iteration-bound calculator.
//! - [`data`]: spiked-covariance generator, CSV/libsvm loading, standardization.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod glm;
pub mod linalg;
pub mod optim;
pub mod stein;
pub mod theory;

pub use error::{Error, Result};
pub use glm::{CumulantFamily, Dataset, Glm};
pub use optim::{IterationTrace, Method, OptimizerConfig, Termination};
