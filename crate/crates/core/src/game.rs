//! Rules of the environment: dilemma payoffs, reputation deltas and
//! punishment accounting. Everything here is a pure function of its inputs.

use serde::{Deserialize, Serialize};

/// Reward and reputation are both counted in whole units.
pub type Units = i64;

/// A playing action in the Prisoner's Dilemma.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Cooperate,
    Defect,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Cooperate, Action::Defect];

    /// Stable numeric encoding: Cooperate = 0, Defect = 1.
    pub fn index(self) -> usize {
        match self {
            Action::Cooperate => 0,
            Action::Defect => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(Action::Cooperate),
            1 => Some(Action::Defect),
            _ => None,
        }
    }

    pub fn as_feature(self) -> f64 {
        self.index() as f64
    }

    pub fn is_cooperate(self) -> bool {
        self == Action::Cooperate
    }
}

/// Whether an assigned punisher chose to punish its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PunishDecision {
    NoPunish,
    Punish,
}

impl PunishDecision {
    /// Stable numeric encoding: NoPunish = 0, Punish = 1.
    pub fn index(self) -> usize {
        match self {
            PunishDecision::NoPunish => 0,
            PunishDecision::Punish => 1,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        match index {
            0 => Some(PunishDecision::NoPunish),
            1 => Some(PunishDecision::Punish),
            _ => None,
        }
    }
}

/// Punishing a defector is just, punishing a cooperator is unjust.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Justness {
    Just,
    Unjust,
}

/// Classify a punishment by the target's action in the game it just played.
pub fn classify_punishment(target_action: Action) -> Justness {
    match target_action {
        Action::Defect => Justness::Just,
        Action::Cooperate => Justness::Unjust,
    }
}

/// Two-player payoff table indexed by (row action, column action).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    /// Mutual cooperation.
    pub reward: Units,
    /// Cooperating against a defector.
    pub sucker: Units,
    /// Defecting against a cooperator.
    pub temptation: Units,
    /// Mutual defection.
    pub punishment: Units,
}

impl Default for PayoffMatrix {
    fn default() -> Self {
        PayoffMatrix {
            reward: 3,
            sucker: 0,
            temptation: 4,
            punishment: 1,
        }
    }
}

impl PayoffMatrix {
    /// Row-player and column-player payoffs.
    pub fn payoff(&self, a1: Action, a2: Action) -> (Units, Units) {
        use Action::*;
        match (a1, a2) {
            (Cooperate, Cooperate) => (self.reward, self.reward),
            (Cooperate, Defect) => (self.sucker, self.temptation),
            (Defect, Cooperate) => (self.temptation, self.sucker),
            (Defect, Defect) => (self.punishment, self.punishment),
        }
    }

    /// T > R > P > S.
    pub fn is_dilemma(&self) -> bool {
        self.temptation > self.reward && self.reward > self.punishment && self.punishment > self.sucker
    }
}

/// Payoffs under the default table.
pub fn payoff(a1: Action, a2: Action) -> (Units, Units) {
    PayoffMatrix::default().payoff(a1, a2)
}

/// Reputation change caused by a playing action.
pub fn play_reputation_delta(action: Action) -> Units {
    match action {
        Action::Cooperate => 1,
        Action::Defect => -1,
    }
}

/// How just punishment is rewarded.
///
/// Under `Scheme1` a just punisher recovers 7 of the 10 units it pays, under
/// `Scheme2` it recovers 12 and comes out ahead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardScheme {
    Scheme1,
    Scheme2,
}

impl RewardScheme {
    pub fn rules(self) -> PunishmentRules {
        let just_bonus = match self {
            RewardScheme::Scheme1 => 7,
            RewardScheme::Scheme2 => 12,
        };
        PunishmentRules {
            punisher_cost: 10,
            punished_penalty: 3,
            just_bonus,
            just_rep_delta: 2,
            unjust_rep_delta: -3,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            RewardScheme::Scheme1 => 1,
            RewardScheme::Scheme2 => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(RewardScheme::Scheme1),
            2 => Some(RewardScheme::Scheme2),
            _ => None,
        }
    }
}

/// Constants governing punishment costs, bonuses and reputation effects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PunishmentRules {
    pub punisher_cost: Units,
    pub punished_penalty: Units,
    pub just_bonus: Units,
    pub just_rep_delta: Units,
    pub unjust_rep_delta: Units,
}

/// Effects of one punishment decision. The target's reputation is never
/// touched; only the punisher's is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PunishmentDeltas {
    pub punisher_reward: Units,
    pub punished_reward: Units,
    pub punisher_rep: Units,
}

impl PunishmentRules {
    pub fn deltas(&self, decision: PunishDecision, target_action: Action) -> PunishmentDeltas {
        match decision {
            PunishDecision::NoPunish => PunishmentDeltas::default(),
            PunishDecision::Punish => match classify_punishment(target_action) {
                Justness::Just => PunishmentDeltas {
                    punisher_reward: self.just_bonus - self.punisher_cost,
                    punished_reward: -self.punished_penalty,
                    punisher_rep: self.just_rep_delta,
                },
                Justness::Unjust => PunishmentDeltas {
                    punisher_reward: -self.punisher_cost,
                    punished_reward: -self.punished_penalty,
                    punisher_rep: self.unjust_rep_delta,
                },
            },
        }
    }
}

pub fn punishment_deltas(
    scheme: RewardScheme,
    decision: PunishDecision,
    target_action: Action,
) -> PunishmentDeltas {
    scheme.rules().deltas(decision, target_action)
}
