//! Deep Q-learning from scratch: a one-hidden-layer ReLU network trained by
//! plain SGD on the squared TD error, with experience replay, a periodically
//! synced target network and linearly annealed ε-greedy exploration.

mod network;
mod policy;
mod replay;
mod trainer;

pub use network::{Gradient, QNetwork, TdSample};
pub use policy::{select_action, select_action_masked, EpsilonSchedule};
pub use replay::{ReplayBuffer, Transition};
pub use trainer::{sync_target, td_target, train_step, DqnModel, ModelParams, TrainerConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DqnError {
    #[error("input has {got} features, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("action {action} out of range for {output_dim} outputs")]
    ActionOutOfRange { action: usize, output_dim: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid network shape {input_dim}->{hidden_dim}->{output_dim}")]
    InvalidShape {
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
    },
    #[error("networks have different shapes")]
    ShapeMismatch,
    #[error("epsilon {0} outside [0, 1]")]
    InvalidEpsilon(f64),
    #[error("invalid epsilon schedule {0:?}")]
    InvalidSchedule(EpsilonSchedule),
    #[error("invalid trainer config {0:?}")]
    InvalidTrainer(TrainerConfig),
    #[error("replay buffer capacity must be positive")]
    ZeroCapacity,
    #[error("non-finite training loss {0}")]
    NonFiniteLoss(f64),
}
