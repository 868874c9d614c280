//! A numerical laboratory for fully coupled slow-fast stochastic differential systems.
//!
//! The crate simulates coupled systems and their averaged limits, computes invariant
//! measures of the frozen fast process (exactly via scale/speed densities and
//! empirically via long runs), measures distances between measures, classifies
//! ergodicity of one-dimensional fast processes, and runs the averaging and
//! mean-square-failure studies.

// `!(a > b)` is used on purpose so that NaN is rejected along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod command;
pub mod ergodicity;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod models;
pub mod par;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod stationary;

pub use error::{Error, Result};
