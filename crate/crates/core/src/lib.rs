//! Dynamic optimal mass transport on weighted graphs, for scalar and
//! vector-valued densities.
//!
//! [`transport`] assembles and solves the quadratic distances, [`w1`] the
//! min-cost-flow distance, [`entropy`] integrates the entropy gradient flow
//! and [`imaging`] interpolates color images. [`oracle`] holds slow dense
//! reference solvers for validation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod entropy;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod imaging;
pub mod mass;
pub mod oracle;
pub mod solver;
pub mod transport;
pub mod w1;

pub use error::{Error, Result};
