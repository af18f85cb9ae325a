use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{Gradient, QNetwork, TdSample};
use super::policy::{select_action_masked, EpsilonSchedule};
use super::replay::{ReplayBuffer, Transition};
use super::DqnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    pub batch_size: usize,
    /// Train steps between target-network syncs.
    pub target_update_interval: u64,
    /// Rescale the gradient to at most this L2 norm before stepping.
    #[serde(default)]
    pub max_grad_norm: Option<f64>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            learning_rate: 0.01,
            gamma: 0.9,
            batch_size: 100,
            target_update_interval: 200,
            max_grad_norm: None,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), DqnError> {
        let ok = self.learning_rate.is_finite()
            && self.learning_rate >= 0.0
            && (0.0..1.0).contains(&self.gamma)
            && self.batch_size > 0
            && self.target_update_interval > 0
            && self.max_grad_norm.map_or(true, |m| m > 0.0);
        if ok {
            Ok(())
        } else {
            Err(DqnError::InvalidTrainer(*self))
        }
    }
}

/// Bootstrapped regression target: `r` for terminal steps, otherwise
/// `r + gamma * max_a' Q_target(s', a')`.
pub fn td_target(target_net: &QNetwork, t: &Transition, gamma: f64) -> Result<f64, DqnError> {
    match &t.next_state {
        None => Ok(t.reward),
        Some(next) => Ok(t.reward + gamma * target_net.max_q(next)?),
    }
}

/// One SGD step on the mean squared TD error of `batch`. Returns the loss
/// measured before the step.
pub fn train_step(
    net: &mut QNetwork,
    target_net: &QNetwork,
    batch: &[&Transition],
    cfg: &TrainerConfig,
) -> Result<f64, DqnError> {
    let mut grad = Gradient::new();
    train_step_with(net, target_net, batch, cfg, &mut grad)
}

pub(crate) fn train_step_with(
    net: &mut QNetwork,
    target_net: &QNetwork,
    batch: &[&Transition],
    cfg: &TrainerConfig,
    grad: &mut Gradient,
) -> Result<f64, DqnError> {
    if batch.is_empty() {
        return Err(DqnError::EmptyInput);
    }
    if !net.same_shape(target_net) {
        return Err(DqnError::ShapeMismatch);
    }
    let mut samples = Vec::with_capacity(batch.len());
    let mut hidden = vec![0.0; target_net.hidden_dim()];
    for t in batch {
        let target = match &t.next_state {
            None => t.reward,
            Some(next) => t.reward + cfg.gamma * target_net.max_q_with(next, &mut hidden)?,
        };
        samples.push(TdSample {
            state: &t.state,
            action: t.action,
            target,
        });
    }
    let loss = net.td_loss_and_gradient(&samples, grad)?;
    if !loss.is_finite() {
        return Err(DqnError::NonFiniteLoss(loss));
    }
    let mut step = cfg.learning_rate;
    if let Some(max_norm) = cfg.max_grad_norm {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > max_norm {
            step *= max_norm / norm;
        }
    }
    if step != 0.0 {
        net.apply_gradient(grad, step);
    }
    Ok(loss)
}

/// Copy online parameters into the target network.
pub fn sync_target(net: &QNetwork, target_net: &mut QNetwork) -> Result<(), DqnError> {
    target_net.copy_from(net)
}

/// Gradient-norm ceiling used by the stock model parameters. Plain SGD with
/// the play model's learning rate can blow up once reputations enter the state.
pub const DEFAULT_MAX_GRAD_NORM: f64 = 10.0;

/// Every knob of one DQN model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub buffer_capacity: usize,
    pub eps_max: f64,
    pub eps_min: f64,
    pub eps_decay: f64,
    pub trainer: TrainerConfig,
}

impl ModelParams {
    fn published(buffer_capacity: usize, eps_min: f64, eps_decay: f64, learning_rate: f64) -> Self {
        ModelParams {
            buffer_capacity,
            eps_max: 0.8889,
            eps_min,
            eps_decay,
            trainer: TrainerConfig {
                learning_rate,
                max_grad_norm: Some(DEFAULT_MAX_GRAD_NORM),
                ..TrainerConfig::default()
            },
        }
    }

    pub fn selection() -> Self {
        Self::published(131_072, 0.0001, 0.3, 0.01)
    }

    pub fn playing() -> Self {
        Self::published(131_072, 0.01, 0.3, 0.1)
    }

    pub fn punishing() -> Self {
        Self::published(524_288, 0.2, 0.5, 0.001)
    }

    pub fn schedule(&self, horizon_episodes: u64) -> EpsilonSchedule {
        EpsilonSchedule {
            eps_max: self.eps_max,
            eps_min: self.eps_min,
            decay_fraction: self.eps_decay,
            horizon_episodes,
        }
    }

    pub fn validate(&self, horizon_episodes: u64) -> Result<(), DqnError> {
        if self.buffer_capacity == 0 {
            return Err(DqnError::ZeroCapacity);
        }
        self.schedule(horizon_episodes).validate()?;
        self.trainer.validate()
    }
}

/// Online network, target copy, replay memory and exploration schedule of
/// one agent ability.
#[derive(Debug, Clone)]
pub struct DqnModel {
    online: QNetwork,
    target: QNetwork,
    buffer: ReplayBuffer,
    schedule: EpsilonSchedule,
    trainer: TrainerConfig,
    train_steps: u64,
    grad: Gradient,
}

impl DqnModel {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        params: &ModelParams,
        horizon_episodes: u64,
        rng: &mut R,
    ) -> Result<Self, DqnError> {
        params.validate(horizon_episodes)?;
        let online = QNetwork::new(input_dim, hidden_dim, output_dim, rng)?;
        let target = online.clone();
        Ok(DqnModel {
            online,
            target,
            buffer: ReplayBuffer::new(params.buffer_capacity),
            schedule: params.schedule(horizon_episodes),
            trainer: params.trainer,
            train_steps: 0,
            grad: Gradient::new(),
        })
    }

    pub fn online(&self) -> &QNetwork {
        &self.online
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    pub fn online_mut(&mut self) -> &mut QNetwork {
        &mut self.online
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn schedule(&self) -> &EpsilonSchedule {
        &self.schedule
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn input_dim(&self) -> usize {
        self.online.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.online.output_dim()
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>, DqnError> {
        self.online.forward(state)
    }

    pub fn epsilon(&self, episode: u64) -> f64 {
        self.schedule.epsilon_at(episode)
    }

    /// ε-greedy action at the given episode, optionally masking one index.
    pub fn act<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        episode: u64,
        excluded: Option<usize>,
        rng: &mut R,
    ) -> Result<usize, DqnError> {
        let q = self.q_values(state)?;
        select_action_masked(&q, self.epsilon(episode), excluded, rng)
    }

    pub fn remember(&mut self, t: Transition) -> Result<(), DqnError> {
        let dim = self.online.input_dim();
        let next_ok = t.next_state.as_ref().map_or(true, |s| s.len() == dim);
        if t.state.len() != dim || !next_ok {
            return Err(DqnError::DimensionMismatch {
                expected: dim,
                got: t.state.len(),
            });
        }
        if t.action >= self.online.output_dim() {
            return Err(DqnError::ActionOutOfRange {
                action: t.action,
                output_dim: self.online.output_dim(),
            });
        }
        self.buffer.push(t);
        Ok(())
    }

    /// Sample a batch and take one train step, syncing the target network
    /// every `target_update_interval` steps. `Ok(None)` while the buffer is
    /// still smaller than one batch.
    pub fn train<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<f64>, DqnError> {
        let Some(batch) = self.buffer.sample_batch(self.trainer.batch_size, rng) else {
            return Ok(None);
        };
        let loss = train_step_with(&mut self.online, &self.target, &batch, &self.trainer, &mut self.grad)?;
        self.train_steps += 1;
        if self.train_steps % self.trainer.target_update_interval == 0 {
            sync_target(&self.online, &mut self.target)?;
        }
        Ok(Some(loss))
    }
}
