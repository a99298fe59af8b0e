//! Trajectory-centric model-based reinforcement learning with time-varying
//! linear-Gaussian controllers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod cost;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod generalization;
pub mod json;
pub mod learner;
pub mod linalg;
pub mod lqg;
pub mod oracle;
pub mod rng;
pub mod trajectory;

pub use error::{Error, Result};
