//! Per-agent DQN models and the observations each of them sees.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dqn::{DqnError, DqnModel, ModelParams, QNetwork};
use crate::game::{Action, Units};

/// Index of an agent within its population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub usize);

impl AgentId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent {}", self.0)
    }
}

/// The three things an agent can decide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ability {
    Select,
    Play,
    Punish,
}

/// Which behaviours feed into reputation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepSources {
    PlayOnly,
    PunishOnly,
    Both,
}

impl RepSources {
    pub fn counts_play(self) -> bool {
        matches!(self, RepSources::PlayOnly | RepSources::Both)
    }

    pub fn counts_punish(self) -> bool {
        matches!(self, RepSources::PunishOnly | RepSources::Both)
    }

    pub fn name(self) -> &'static str {
        match self {
            RepSources::PlayOnly => "play",
            RepSources::PunishOnly => "punish",
            RepSources::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "play" | "play-only" | "playonly" => Some(RepSources::PlayOnly),
            "punish" | "punish-only" | "punishonly" => Some(RepSources::PunishOnly),
            "both" => Some(RepSources::Both),
            _ => None,
        }
    }
}

/// How raw integer reputations are turned into network inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepScaling {
    /// Fed unchanged.
    Raw,
    /// Divided by the number of episodes started so far (`episode + 1`).
    PerEpisode,
}

impl RepScaling {
    pub fn apply(self, rep: Units, episode: u64) -> f64 {
        match self {
            RepScaling::Raw => rep as f64,
            RepScaling::PerEpisode => rep as f64 / (episode + 1) as f64,
        }
    }
}

/// Which observations carry reputations, and how reputation is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateEncodingConfig {
    pub rep_in_play_state: bool,
    pub rep_in_punish_state: bool,
    pub rep_sources: RepSources,
    pub rep_scaling: RepScaling,
}

impl StateEncodingConfig {
    /// Defaults: reputations in the play state only when third-party
    /// punishment is active or no mechanism is active at all.
    pub fn for_mode(rep_in_play_state: bool) -> Self {
        StateEncodingConfig {
            rep_in_play_state,
            rep_in_punish_state: false,
            rep_sources: RepSources::Both,
            rep_scaling: RepScaling::PerEpisode,
        }
    }

    pub fn play_dim(&self) -> usize {
        if self.rep_in_play_state {
            4
        } else {
            2
        }
    }

    pub fn punish_dim(&self) -> usize {
        if self.rep_in_punish_state {
            4
        } else {
            2
        }
    }

    /// `[own_prev, partner_prev]`, or `[own_rep, partner_rep, own_prev, partner_prev]`
    /// when reputations are observed.
    pub fn encode_play_state(
        &self,
        self_prev: Action,
        partner_prev: Action,
        self_rep: Units,
        partner_rep: Units,
        episode: u64,
    ) -> Vec<f64> {
        let actions = [self_prev.as_feature(), partner_prev.as_feature()];
        if self.rep_in_play_state {
            vec![
                self.rep_scaling.apply(self_rep, episode),
                self.rep_scaling.apply(partner_rep, episode),
                actions[0],
                actions[1],
            ]
        } else {
            actions.to_vec()
        }
    }

    /// `[target_action, target_partner_action]`, followed by both
    /// reputations when they are observed.
    pub fn encode_punish_state(
        &self,
        judged: (Action, Action),
        judged_reps: (Units, Units),
        episode: u64,
    ) -> Vec<f64> {
        let mut s = vec![judged.0.as_feature(), judged.1.as_feature()];
        if self.rep_in_punish_state {
            s.push(self.rep_scaling.apply(judged_reps.0, episode));
            s.push(self.rep_scaling.apply(judged_reps.1, episode));
        }
        s
    }

    /// Every agent's reputation in agent-index order.
    pub fn encode_select_state(&self, reputations: &[Units], episode: u64) -> Vec<f64> {
        encode_select_state(reputations, self.rep_scaling, episode)
    }
}

pub fn encode_select_state(reputations: &[Units], scaling: RepScaling, episode: u64) -> Vec<f64> {
    reputations.iter().map(|&r| scaling.apply(r, episode)).collect()
}

/// Per-ability DQN settings, shared by every agent in a population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    pub select: ModelParams,
    pub play: ModelParams,
    pub punish: ModelParams,
}

impl Default for ModelSet {
    fn default() -> Self {
        ModelSet {
            select: ModelParams::selection(),
            play: ModelParams::playing(),
            punish: ModelParams::punishing(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("{0:?} model is not active in this configuration")]
    MissingModel(Ability),
    #[error(transparent)]
    Dqn(#[from] DqnError),
}

/// What an agent needs to know about the population to build its models.
#[derive(Debug, Clone, Copy)]
pub struct BrainLayout {
    pub population_size: usize,
    pub hidden_dim: usize,
    pub selection: bool,
    pub punishment: bool,
    pub encoding: StateEncodingConfig,
    pub horizon_episodes: u64,
}

/// Up to three independent DQN models of one agent. A single punish model
/// serves direct and third-party punishment alike.
#[derive(Debug, Clone)]
pub struct AgentBrain {
    select: Option<DqnModel>,
    play: DqnModel,
    punish: Option<DqnModel>,
}

impl AgentBrain {
    pub fn new<R: Rng + ?Sized>(layout: &BrainLayout, models: &ModelSet, rng: &mut R) -> Result<Self, DqnError> {
        let n = layout.population_size;
        let h = layout.hidden_dim;
        let horizon = layout.horizon_episodes;
        let select = if layout.selection {
            Some(DqnModel::new(n, h, n, &models.select, horizon, rng)?)
        } else {
            None
        };
        let play = DqnModel::new(layout.encoding.play_dim(), h, 2, &models.play, horizon, rng)?;
        let punish = if layout.punishment {
            Some(DqnModel::new(layout.encoding.punish_dim(), h, 2, &models.punish, horizon, rng)?)
        } else {
            None
        };
        Ok(AgentBrain { select, play, punish })
    }

    pub fn model(&self, ability: Ability) -> Option<&DqnModel> {
        match ability {
            Ability::Select => self.select.as_ref(),
            Ability::Play => Some(&self.play),
            Ability::Punish => self.punish.as_ref(),
        }
    }

    pub fn model_mut(&mut self, ability: Ability) -> Option<&mut DqnModel> {
        match ability {
            Ability::Select => self.select.as_mut(),
            Ability::Play => Some(&mut self.play),
            Ability::Punish => self.punish.as_mut(),
        }
    }

    pub(crate) fn require_mut(&mut self, ability: Ability) -> Result<&mut DqnModel, AgentError> {
        self.model_mut(ability).ok_or(AgentError::MissingModel(ability))
    }

    /// ε-greedy decision. For [`Ability::Select`] the agent's own index
    /// (`self_id`) is masked out so it can never pick itself.
    pub fn decide<R: Rng + ?Sized>(
        &self,
        ability: Ability,
        state: &[f64],
        episode: u64,
        self_id: AgentId,
        rng: &mut R,
    ) -> Result<usize, AgentError> {
        let model = self.model(ability).ok_or(AgentError::MissingModel(ability))?;
        let excluded = (ability == Ability::Select).then_some(self_id.index());
        Ok(model.act(state, episode, excluded, rng)?)
    }

    /// Online and target networks of every active model.
    pub fn networks(&self) -> Vec<(Ability, &QNetwork, &QNetwork)> {
        [Ability::Select, Ability::Play, Ability::Punish]
            .into_iter()
            .filter_map(|a| self.model(a).map(|m| (a, m.online(), m.target())))
            .collect()
    }
}
