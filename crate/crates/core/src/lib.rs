//! Curiosity-driven forward-model learning with Homeo-Heterostatic Value Gradients.
//!
//! The crate is organised bottom-up:
//!
//! * [`mathcore`]: Gaussian algebra, Householder covariances and discrete
//!   information-theoretic diagnostics.
//! * [`diffnet`]: parameter storage, small tanh MLPs with hand-written
//!   backpropagation, optimizers, schedules and checkpoints.
//! * [`env`]: the deterministic two-dimensional mountain car.
//! * [`models`]: forward model, meta-model, value and policy networks.
//! * [`agent`]: the outer learning loop and its five ablation variants.
//! * [`harness`]: experiment phases, coverage metrics, validation and statistics.
//! * [`config`] / [`cli`]: experiment configuration and the `hhvg` command line.

pub mod agent;
pub mod cli;
pub mod config;
pub mod diffnet;
pub mod env;
pub mod error;
pub mod harness;
pub mod mathcore;
pub mod models;
pub mod selftest;

pub use error::{Error, Result};
