//! Independent component analysis of whitened signals.
//!
//! The unmixing matrix is searched as `W = O·W₀`, where `W₀` whitens the
//! data and `O` is orthogonal. [`picardo::solve`] runs a preconditioned
//! L-BFGS on the orthogonal group with sign-adaptive scores, and
//! [`fastica::fastica_solve`] runs symmetric FastICA as a baseline.
//!
//! ```
//! use picardo::bench::{gen_synthetic, DatasetSpec};
//! use picardo::{solve, SolverConfig};
//!
//! let data = gen_synthetic(&DatasetSpec::uniform_laplace(2, 2, 5_000, 1)).unwrap();
//! let res = solve(&data.x, &SolverConfig::default()).unwrap();
//! assert!(res.converged);
//! ```
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod error;
pub mod fastica;
pub mod lbfgs;
pub mod linalg;
pub mod model;
pub mod picardo;

pub use error::{IcaError, Result};
pub use fastica::{fastica_solve, fastica_step};
pub use linalg::{whiten, Mat, OrthogonalMatrix, SignalMatrix, SkewSymmetricMatrix, Whitening};
pub use model::ScoreFunction;
pub use picardo::{solve, IterationRecord, IterationTrace, SolveResult, SolverConfig, Termination};
