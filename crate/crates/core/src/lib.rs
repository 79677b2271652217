//! Numerical verification of holomorphic supercurves and the associated
//! supersymmetric sigma-model actions on a discretized torus.
//!
//! The crate is organised bottom-up: [`grassmann`] arithmetic, the
//! [`worldsheet`] grid, almost-complex [`target`]s, [`fields`] along a map with
//! their first-order operators, and the [`action`] functionals and identities.
//! [`suite`] bundles the checks into reports.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod config;
pub mod construct;
pub mod conventions;
pub mod error;
pub mod fieldio;
pub mod fields;
pub mod grassmann;
pub mod random;
pub mod report;
pub mod suite;
pub mod target;
pub mod worldsheet;

pub use error::{Error, Result};
