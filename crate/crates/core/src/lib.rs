//! Variance-reduced adaptive stochastic mirror descent for composite
//! finite-sum problems `F(x) = (1/n) Σ f_i(x) + h(x)`.

pub mod algorithms;
pub mod bregman;
pub mod error;
pub mod estimate;
pub mod exec;
pub mod harness;
pub mod hyper;
pub mod metrics;
pub mod problems;
pub mod proxstep;
pub mod rng;
pub mod schedule;
pub mod vector;
pub mod verify;

pub use error::{Error, Result};
pub use vector::DenseVector;
