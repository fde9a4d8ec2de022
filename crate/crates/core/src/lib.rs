//! Online task offloading in a fog network with a discounted-UCB learner,
//! delayed bandit feedback and abruptly changing node capabilities.

// Negated float comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod baselines;
pub mod env;
pub mod error;
pub mod harness;
pub mod policy;
pub mod rng;

pub use error::{Error, Result};
