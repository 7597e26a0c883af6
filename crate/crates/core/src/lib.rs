// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod dists;
pub mod error;
pub mod gof;
pub mod markov;
pub mod mcmc;
pub mod mle;
pub mod model;
pub mod optim;
pub mod panel;
pub mod report;
pub mod select;
pub mod stats;

pub use error::{Error, Result};
