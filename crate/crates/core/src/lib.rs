//! Populations of independent DQN agents playing the Iterated Prisoner's
//! Dilemma under direct punishment, third-party punishment, partner
//! selection and reputation.

pub mod agents;
pub mod dqn;
pub mod experiment;
pub mod game;
pub mod metrics;
pub mod sim;
