//! Stochastic subgradient projection methods for convex problems with many
//! functional constraints.
//!
//! The crate is organized around sampling oracles:
//!
//! - [`problem`]: the composite problem `min E[f + g]` s.t. `h(·,ξ) ≤ 0`, `x ∈ Y`.
//! - [`prox`]: prox maps, projections onto simple sets, the Polyak step.
//! - [`stepsize`]: stepsize rules and the name-keyed [`stepsize::StepsizeRegistry`].
//! - [`ssp`]: the general solver with weighted averaging and traces.
//! - [`ls`]: the linear-system specialization with adaptive stepsizes.
//! - [`builders`]: constrained least squares, LP feasibility, sparse and robust SVMs.
//! - [`io`]: Matrix Market and LIBSVM readers/writers, report files.
//! - [`oracles`]: slow independent reference computations for testing.
//! - [`cli`]: the `ssp` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod builders;
pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod ls;
pub mod oracles;
pub mod problem;
pub mod prox;
pub mod rng;
pub mod ssp;
pub mod stepsize;
pub mod trace;

pub use error::{Result, SspError};
