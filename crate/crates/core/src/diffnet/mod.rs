//! Minimal trainable-parameter engine: parameter sets, tanh MLPs with
//! hand-written backpropagation, optimizers, plateau schedules and checkpoints.

pub mod checkpoint;
mod gradcheck;
mod init;
mod mlp;
mod optim;
mod params;
mod schedule;

pub use gradcheck::{grad_check, grad_check_coords, FD_STEP, REL_FLOOR};
pub use init::{xavier_init, xavier_init_with};
pub use mlp::{Mlp, MlpCache};
pub use optim::{sgd_step, Optimizer, OptimizerKind};
pub use params::{Param, ParamSet};
pub use schedule::LrSchedule;
