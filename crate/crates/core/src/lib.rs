//! Dictionary recovery for square, invertible dictionaries: factor `Y = A X`
//! with sparse `X` by hunting for the sparsest vectors in the row span of
//! `Y` through a sequence of l1-minimizing linear programs.
//!
//! The crate provides:
//!
//! - [`mat`]: a small dense linear algebra kernel (LU, pivoted QR rank,
//!   Jacobi eigendecomposition, Gram-Schmidt).
//! - [`randmodel`]: seeded Bernoulli-Subgaussian coefficient models and test
//!   dictionaries with a pinned generator stack.
//! - [`l1lp`]: the row-recovery linear program `min ||w^T Y||_1` subject to
//!   `r^T w = 1`, solved by a self-contained active-set simplex.
//! - [`erspud`]: the candidate-generation pipelines (single-column,
//!   double-column, iterative projections, elementary-vector baseline),
//!   greedy selection, preconditioning and dictionary reconstruction.
//! - [`metrics`]: permutation-scale relative error and row-recovery counts.
//! - [`theory`]: Monte-Carlo and brute-force checkers for the statistical
//!   claims the pipelines rest on.
//! - [`phase`]: the phase-transition experiment harness and its file outputs.

// indexed loops are the house style for the numeric kernels
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod mat;
pub mod randmodel;
pub mod l1lp;
pub mod erspud;
pub mod metrics;
pub mod theory;
pub mod phase;

pub use error::{Error, Result};
pub use mat::Mat;
