//! Influence-function scoring and class-based detection of mislabeled
//! training data for small softmax classifiers.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod cli;
pub mod data;
pub mod detection;
pub mod error;
pub mod influence;
pub mod model;
pub mod numerics;
pub mod theory;

pub use error::{Error, Result};
