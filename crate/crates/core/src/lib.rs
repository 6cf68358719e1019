//! Continuous-time laboratory for stochastic gradient descent without replacement.
//!
//! The crate generates epoched Brownian motions for four shuffling schemes,
//! solves the additive-noise Young equation they drive, runs the discrete
//! shuffled-SGD reference, and checks the predicted almost-sure convergence
//! behaviour with Monte Carlo suites.

// `!(x > 0.0)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod linalg;
pub mod noise;
pub mod objectives;
pub mod rng;
pub mod schedule;
pub mod sgdo;
pub mod young;

pub use error::{Error, Result};
pub use schedule::Schedule;
