//! The episode pipeline: partner selection once per episode, then a
//! dilemma game and a punishment stage in every round.
//!
//! Within a round every decision is taken first (on the reputations the
//! round started with), then all reward and reputation deltas are applied,
//! then every model that acted takes one train step.

mod config;

pub use config::{MechanismConfig, Mode};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Ability, AgentBrain, AgentError, AgentId, BrainLayout};
use crate::dqn::{DqnError, QNetwork, Transition};
use crate::game::{classify_punishment, play_reputation_delta, Action, Justness, PunishDecision, PunishmentDeltas, Units};
use crate::metrics::{episode_metrics, EpisodeMetrics};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{agent} {ability:?} model failed at episode {episode}: {source}")]
    Model {
        agent: AgentId,
        ability: Ability,
        episode: u64,
        #[source]
        source: DqnError,
    },
    #[error("{agent}: {source}")]
    Agent {
        agent: AgentId,
        #[source]
        source: AgentError,
    },
}

impl SimError {
    /// True when training produced a non-finite loss.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            SimError::Model {
                source: DqnError::NonFiniteLoss(_),
                ..
            }
        )
    }
}

fn agent_err(agent: AgentId) -> impl FnOnce(AgentError) -> SimError {
    move |source| SimError::Agent { agent, source }
}

/// The agent that chose (or was randomly given) `partner` for this episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pairing {
    pub selector: AgentId,
    pub partner: AgentId,
}

impl Pairing {
    pub fn members(&self) -> [AgentId; 2] {
        [self.selector, self.partner]
    }

    pub fn contains(&self, agent: AgentId) -> bool {
        self.selector == agent || self.partner == agent
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PunishmentKind {
    Direct,
    ThirdParty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PunishmentAssignment {
    pub punisher: AgentId,
    pub target: AgentId,
    pub kind: PunishmentKind,
}

/// One resolved punishment opportunity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PunishmentEvent {
    pub assignment: PunishmentAssignment,
    pub target_action: Action,
    pub decision: PunishDecision,
    pub justness: Justness,
    pub deltas: PunishmentDeltas,
}

impl PunishmentEvent {
    pub fn punished(&self) -> bool {
        self.decision == PunishDecision::Punish
    }
}

/// What happened in one pairing during one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLog {
    pub pairing_index: usize,
    pub pairing: Pairing,
    pub round: usize,
    /// (selector, partner)
    pub actions: (Action, Action),
    pub payoffs: (Units, Units),
    pub punishments: Vec<PunishmentEvent>,
}

/// Full record of one episode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: u64,
    pub pairings: Vec<Pairing>,
    pub rounds: Vec<RoundLog>,
    pub reputations_start: Vec<Units>,
    pub reputations_end: Vec<Units>,
    /// Net reward each agent collected this episode.
    pub agent_rewards: Vec<Units>,
    /// Reputation change each agent accumulated this episode.
    pub agent_rep_deltas: Vec<Units>,
}

impl EpisodeLog {
    pub fn population_size(&self) -> usize {
        self.reputations_start.len()
    }

    pub fn societal_reward(&self) -> Units {
        self.agent_rewards.iter().sum()
    }

    pub fn societal_reputation(&self) -> Units {
        self.reputations_end.iter().sum()
    }

    /// Payoffs plus every punishment reward delta, summed from the round logs.
    pub fn logged_reward_total(&self) -> Units {
        self.rounds
            .iter()
            .map(|r| {
                r.payoffs.0
                    + r.payoffs.1
                    + r.punishments
                        .iter()
                        .map(|p| p.deltas.punisher_reward + p.deltas.punished_reward)
                        .sum::<Units>()
            })
            .sum()
    }

    pub fn punishment_events(&self) -> impl Iterator<Item = &PunishmentEvent> {
        self.rounds.iter().flat_map(|r| r.punishments.iter())
    }
}

/// Stage 1: one pairing per agent. With selection each agent's select
/// model picks from the reputation vector (its own index masked); otherwise
/// the partner is uniform over the other agents.
pub fn pair_agents<R: Rng + ?Sized>(
    cfg: &MechanismConfig,
    brains: &[AgentBrain],
    reputations: &[Units],
    episode: u64,
    rng: &mut R,
) -> Result<Vec<Pairing>, SimError> {
    let n = cfg.population_size;
    if n < 2 || brains.len() != n || reputations.len() != n {
        return Err(SimError::Config(format!("pairing needs {n} >= 2 agents with matching state")));
    }
    let state = cfg.encoding.encode_select_state(reputations, episode);
    (0..n)
        .map(|i| {
            let selector = AgentId(i);
            let partner = if cfg.mode.has_selection() {
                brains[i]
                    .decide(Ability::Select, &state, episode, selector, rng)
                    .map_err(agent_err(selector))?
            } else {
                let j = rng.gen_range(0..n - 1);
                if j >= i {
                    j + 1
                } else {
                    j
                }
            };
            Ok(Pairing {
                selector,
                partner: AgentId(partner),
            })
        })
        .collect()
}

/// Who may punish whom after `pairing` plays. Direct assignments come
/// first, then the two third-party ones (P judges the selector, K the
/// partner; P and K are distinct outsiders).
pub fn assign_punishers<R: Rng + ?Sized>(
    mode: Mode,
    population_size: usize,
    pairing: Pairing,
    rng: &mut R,
) -> Result<Vec<PunishmentAssignment>, SimError> {
    let (a, b) = (pairing.selector, pairing.partner);
    let mut out = Vec::with_capacity(mode.opportunities_per_pairing());
    if mode.has_direct() {
        out.push(PunishmentAssignment {
            punisher: b,
            target: a,
            kind: PunishmentKind::Direct,
        });
        out.push(PunishmentAssignment {
            punisher: a,
            target: b,
            kind: PunishmentKind::Direct,
        });
    }
    if mode.has_third_party() {
        if population_size < 4 {
            return Err(SimError::Config(format!(
                "third-party punishment needs at least 4 agents, got {population_size}"
            )));
        }
        let outsiders: Vec<AgentId> = (0..population_size)
            .map(AgentId)
            .filter(|&x| !pairing.contains(x))
            .collect();
        let picks = sample(rng, outsiders.len(), 2);
        let (p, k) = (outsiders[picks.index(0)], outsiders[picks.index(1)]);
        out.push(PunishmentAssignment {
            punisher: p,
            target: a,
            kind: PunishmentKind::ThirdParty,
        });
        out.push(PunishmentAssignment {
            punisher: k,
            target: b,
            kind: PunishmentKind::ThirdParty,
        });
    }
    Ok(out)
}

/// A punish decision waiting for the agent's next punish state.
struct PendingPunish {
    state: Vec<f64>,
    action: usize,
    reward: f64,
}

/// Per-episode scratch state.
struct EpisodeState {
    pairings: Vec<Pairing>,
    /// Previous round's (selector, partner) actions per pairing.
    prev_actions: Vec<(Action, Action)>,
    pending_punish: Vec<Option<PendingPunish>>,
    agent_rewards: Vec<Units>,
    agent_rep_deltas: Vec<Units>,
    rounds: Vec<RoundLog>,
}

/// Network parameters of every agent at one point in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSnapshot {
    pub config: MechanismConfig,
    pub episodes_completed: u64,
    pub reputations: Vec<Units>,
    pub agents: Vec<AgentSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub models: Vec<ModelSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub ability: Ability,
    pub online: QNetwork,
    pub target: QNetwork,
}

/// Metrics table plus the final networks of one run.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub metrics: Vec<EpisodeMetrics>,
    pub snapshot: RunSnapshot,
}

/// A population of learning agents and the environment they live in.
pub struct Simulation {
    cfg: MechanismConfig,
    brains: Vec<AgentBrain>,
    reputations: Vec<Units>,
    rng: ChaCha8Rng,
    episode: u64,
    prev_log: Option<EpisodeLog>,
}

impl Simulation {
    pub fn new(cfg: MechanismConfig) -> Result<Self, SimError> {
        cfg.validate().map_err(SimError::Config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let layout = BrainLayout {
            population_size: cfg.population_size,
            hidden_dim: cfg.hidden_dim,
            selection: cfg.mode.has_selection(),
            punishment: cfg.mode.has_punishment(),
            encoding: cfg.encoding,
            horizon_episodes: cfg.episodes,
        };
        let brains = (0..cfg.population_size)
            .map(|i| {
                AgentBrain::new(&layout, &cfg.models, &mut rng).map_err(|e| SimError::Agent {
                    agent: AgentId(i),
                    source: e.into(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Simulation {
            reputations: vec![0; cfg.population_size],
            cfg,
            brains,
            rng,
            episode: 0,
            prev_log: None,
        })
    }

    pub fn config(&self) -> &MechanismConfig {
        &self.cfg
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn reputations(&self) -> &[Units] {
        &self.reputations
    }

    pub fn brains(&self) -> &[AgentBrain] {
        &self.brains
    }

    pub fn brains_mut(&mut self) -> &mut [AgentBrain] {
        &mut self.brains
    }

    pub fn is_finished(&self) -> bool {
        self.episode >= self.cfg.episodes
    }

    pub fn snapshot(&self) -> RunSnapshot {
        RunSnapshot {
            config: self.cfg.clone(),
            episodes_completed: self.episode,
            reputations: self.reputations.clone(),
            agents: self
                .brains
                .iter()
                .map(|b| AgentSnapshot {
                    models: b
                        .networks()
                        .into_iter()
                        .map(|(ability, online, target)| ModelSnapshot {
                            ability,
                            online: online.clone(),
                            target: target.clone(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Run one episode and return its metrics row.
    pub fn step(&mut self) -> Result<EpisodeMetrics, SimError> {
        let log = self.run_episode()?;
        let row = episode_metrics(&log, self.prev_log.as_ref(), self.cfg.mode);
        self.prev_log = Some(log);
        Ok(row)
    }

    /// Run every remaining episode.
    pub fn run(&mut self) -> Result<Vec<EpisodeMetrics>, SimError> {
        let mut rows = Vec::with_capacity((self.cfg.episodes - self.episode) as usize);
        while !self.is_finished() {
            rows.push(self.step()?);
        }
        Ok(rows)
    }

    /// Stage 1 once, then `rounds_per_episode` rounds of stages 2 and 3,
    /// then the selection transitions.
    pub fn run_episode(&mut self) -> Result<EpisodeLog, SimError> {
        let episode = self.episode;
        let n = self.cfg.population_size;
        let reputations_start = self.reputations.clone();
        let select_state = self.cfg.encoding.encode_select_state(&self.reputations, episode);
        let pairings = pair_agents(&self.cfg, &self.brains, &self.reputations, episode, &mut self.rng)?;

        let mut st = EpisodeState {
            prev_actions: vec![(Action::Cooperate, Action::Cooperate); pairings.len()],
            pairings,
            pending_punish: (0..n).map(|_| None).collect(),
            agent_rewards: vec![0; n],
            agent_rep_deltas: vec![0; n],
            rounds: Vec::with_capacity(n * self.cfg.rounds_per_episode),
        };
        for round in 0..self.cfg.rounds_per_episode {
            self.run_round(&mut st, episode, round)?;
        }

        // punish chains end with the episode
        for (i, pending) in st.pending_punish.iter_mut().enumerate() {
            if let Some(p) = pending.take() {
                let t = Transition::new(p.state, p.action, p.reward, None);
                self.remember(AgentId(i), Ability::Punish, t)?;
            }
        }

        if self.cfg.mode.has_selection() {
            let next_state = self.cfg.encoding.encode_select_state(&self.reputations, episode + 1);
            for p in &st.pairings {
                let t = Transition::new(
                    select_state.clone(),
                    p.partner.index(),
                    st.agent_rewards[p.selector.index()] as f64,
                    Some(next_state.clone()),
                );
                self.remember(p.selector, Ability::Select, t)?;
            }
            for i in 0..n {
                self.train(AgentId(i), Ability::Select)?;
            }
        }

        self.episode += 1;
        Ok(EpisodeLog {
            episode,
            pairings: st.pairings,
            rounds: st.rounds,
            reputations_start,
            reputations_end: self.reputations.clone(),
            agent_rewards: st.agent_rewards,
            agent_rep_deltas: st.agent_rep_deltas,
        })
    }

    fn run_round(&mut self, st: &mut EpisodeState, episode: u64, round: usize) -> Result<(), SimError> {
        let n = self.cfg.population_size;
        let enc = self.cfg.encoding;
        let reps = self.reputations.clone();
        let last_round = round + 1 == self.cfg.rounds_per_episode;
        let pairings = st.pairings.clone();

        // stage 2 decisions
        let mut play_states = Vec::with_capacity(pairings.len());
        let mut actions = Vec::with_capacity(pairings.len());
        for (k, p) in pairings.iter().enumerate() {
            let (prev_a, prev_b) = st.prev_actions[k];
            let (a, b) = (p.selector, p.partner);
            let s_a = enc.encode_play_state(prev_a, prev_b, reps[a.0], reps[b.0], episode);
            let s_b = enc.encode_play_state(prev_b, prev_a, reps[b.0], reps[a.0], episode);
            let act_a = self.decide_play(a, &s_a, episode)?;
            let act_b = self.decide_play(b, &s_b, episode)?;
            play_states.push((s_a, s_b));
            actions.push((act_a, act_b));
        }

        // stage 3 decisions
        let mut events: Vec<Vec<PunishmentEvent>> = Vec::with_capacity(pairings.len());
        let mut punish_states: Vec<Vec<Vec<f64>>> = Vec::with_capacity(pairings.len());
        let rules = self.cfg.scheme.rules();
        for (k, p) in pairings.iter().enumerate() {
            let assignments = assign_punishers(self.cfg.mode, n, *p, &mut self.rng)?;
            let mut evs = Vec::with_capacity(assignments.len());
            let mut states = Vec::with_capacity(assignments.len());
            for asg in assignments {
                let (target_action, other_action, other) = if asg.target == p.selector {
                    (actions[k].0, actions[k].1, p.partner)
                } else {
                    (actions[k].1, actions[k].0, p.selector)
                };
                let s = enc.encode_punish_state(
                    (target_action, other_action),
                    (reps[asg.target.0], reps[other.0]),
                    episode,
                );
                let choice = self.brains[asg.punisher.0]
                    .decide(Ability::Punish, &s, episode, asg.punisher, &mut self.rng)
                    .map_err(agent_err(asg.punisher))?;
                let decision = PunishDecision::from_index(choice).expect("binary punish head");
                evs.push(PunishmentEvent {
                    assignment: asg,
                    target_action,
                    decision,
                    justness: classify_punishment(target_action),
                    deltas: rules.deltas(decision, target_action),
                });
                states.push(s);
            }
            events.push(evs);
            punish_states.push(states);
        }

        // deltas
        let sources = enc.rep_sources;
        let mut payoffs = Vec::with_capacity(pairings.len());
        for (k, p) in pairings.iter().enumerate() {
            let (act_a, act_b) = actions[k];
            let pay = self.cfg.payoffs.payoff(act_a, act_b);
            payoffs.push(pay);
            st.agent_rewards[p.selector.0] += pay.0;
            st.agent_rewards[p.partner.0] += pay.1;
            if sources.counts_play() {
                self.add_rep(st, p.selector, play_reputation_delta(act_a));
                self.add_rep(st, p.partner, play_reputation_delta(act_b));
            }
            for ev in &events[k] {
                st.agent_rewards[ev.assignment.punisher.0] += ev.deltas.punisher_reward;
                st.agent_rewards[ev.assignment.target.0] += ev.deltas.punished_reward;
                if sources.counts_punish() {
                    self.add_rep(st, ev.assignment.punisher, ev.deltas.punisher_rep);
                }
            }
        }

        // transitions
        let mut played = vec![false; n];
        let mut punished = vec![false; n];
        for (k, p) in pairings.iter().enumerate() {
            let (act_a, act_b) = actions[k];
            let penalty = |target: AgentId| -> Units {
                events[k]
                    .iter()
                    .filter(|e| e.assignment.target == target)
                    .map(|e| e.deltas.punished_reward)
                    .sum()
            };
            let (s_a, s_b) = &play_states[k];
            let seats = [
                (p.selector, p.partner, s_a, act_a, act_b, payoffs[k].0),
                (p.partner, p.selector, s_b, act_b, act_a, payoffs[k].1),
            ];
            for (me, other, s, mine, theirs, pay) in seats {
                let next = (!last_round).then(|| {
                    enc.encode_play_state(mine, theirs, self.reputations[me.0], self.reputations[other.0], episode)
                });
                let reward = (pay + penalty(me)) as f64;
                let t = Transition::new(s.clone(), mine.index(), reward, next);
                self.remember(me, Ability::Play, t)?;
                played[me.0] = true;
            }
            for (ev, s) in events[k].iter().zip(&punish_states[k]) {
                let who = ev.assignment.punisher;
                if let Some(prev) = st.pending_punish[who.0].take() {
                    let t = Transition::new(prev.state, prev.action, prev.reward, Some(s.clone()));
                    self.remember(who, Ability::Punish, t)?;
                }
                st.pending_punish[who.0] = Some(PendingPunish {
                    state: s.clone(),
                    action: ev.decision.index(),
                    reward: ev.deltas.punisher_reward as f64,
                });
                punished[who.0] = true;
            }
        }

        // training
        for i in 0..n {
            if played[i] {
                self.train(AgentId(i), Ability::Play)?;
            }
            if punished[i] {
                self.train(AgentId(i), Ability::Punish)?;
            }
        }

        for (k, p) in pairings.iter().enumerate() {
            st.rounds.push(RoundLog {
                pairing_index: k,
                pairing: *p,
                round,
                actions: actions[k],
                payoffs: payoffs[k],
                punishments: std::mem::take(&mut events[k]),
            });
            st.prev_actions[k] = actions[k];
        }
        Ok(())
    }

    fn add_rep(&mut self, st: &mut EpisodeState, agent: AgentId, delta: Units) {
        self.reputations[agent.0] += delta;
        st.agent_rep_deltas[agent.0] += delta;
    }

    fn decide_play(&mut self, agent: AgentId, state: &[f64], episode: u64) -> Result<Action, SimError> {
        let idx = self.brains[agent.0]
            .decide(Ability::Play, state, episode, agent, &mut self.rng)
            .map_err(agent_err(agent))?;
        Ok(Action::from_index(idx).expect("binary play head"))
    }

    fn remember(&mut self, agent: AgentId, ability: Ability, t: Transition) -> Result<(), SimError> {
        let episode = self.episode;
        let model = self.brains[agent.0].require_mut(ability).map_err(agent_err(agent))?;
        model.remember(t).map_err(|source| SimError::Model {
            agent,
            ability,
            episode,
            source,
        })
    }

    fn train(&mut self, agent: AgentId, ability: Ability) -> Result<(), SimError> {
        let episode = self.episode;
        let model = self.brains[agent.0].require_mut(ability).map_err(agent_err(agent))?;
        model.train(&mut self.rng).map_err(|source| SimError::Model {
            agent,
            ability,
            episode,
            source,
        })?;
        Ok(())
    }
}

/// Run `cfg` start to finish.
pub fn run_simulation(cfg: MechanismConfig) -> Result<SimulationOutput, SimError> {
    let mut sim = Simulation::new(cfg)?;
    let metrics = sim.run()?;
    Ok(SimulationOutput {
        metrics,
        snapshot: sim.snapshot(),
    })
}
