//! Bayesian wavelet regression with a three-component spike-and-slab prior
//! (point mass, MOM and IMOM nonlocal slabs), empirical Bayes hyperparameter
//! fitting and posterior-mean shrinkage.

// `!(x > 0.0)` is used on purpose so NaN fails validation; filter taps and
// series constants keep every digit they were generated with.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod bench;
pub mod ebayes;
pub mod error;
pub mod hyperspec;
pub mod io;
pub mod optim;
pub mod posterior;
pub mod priors;
pub mod special;
pub mod transform;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
