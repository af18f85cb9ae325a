use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{ModelSet, StateEncodingConfig};
use crate::game::{PayoffMatrix, RewardScheme};

/// Which social mechanisms a population has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "DP")]
    Dp,
    #[serde(rename = "DP-S")]
    DpS,
    #[serde(rename = "TPP")]
    Tpp,
    #[serde(rename = "TPP-S")]
    TppS,
    #[serde(rename = "TPPDP")]
    Tppdp,
    #[serde(rename = "TPPDP-S")]
    TppdpS,
    /// No punishment and random pairing.
    #[serde(rename = "NONE")]
    None,
}

impl Mode {
    /// The six punishment combinations, in the order they are usually plotted.
    pub const MAIN_SIX: [Mode; 6] = [Mode::TppS, Mode::Tpp, Mode::DpS, Mode::Dp, Mode::TppdpS, Mode::Tppdp];

    pub fn has_selection(self) -> bool {
        matches!(self, Mode::DpS | Mode::TppS | Mode::TppdpS)
    }

    pub fn has_direct(self) -> bool {
        matches!(self, Mode::Dp | Mode::DpS | Mode::Tppdp | Mode::TppdpS)
    }

    pub fn has_third_party(self) -> bool {
        matches!(self, Mode::Tpp | Mode::TppS | Mode::Tppdp | Mode::TppdpS)
    }

    pub fn has_punishment(self) -> bool {
        self.has_direct() || self.has_third_party()
    }

    /// Punishment opportunities created by one pairing in one round.
    pub fn opportunities_per_pairing(self) -> usize {
        2 * usize::from(self.has_direct()) + 2 * usize::from(self.has_third_party())
    }

    /// Reputations are observed while playing unless punishment is purely direct.
    pub fn default_rep_in_play_state(self) -> bool {
        !matches!(self, Mode::Dp | Mode::DpS)
    }

    pub fn min_population(self) -> usize {
        if self.has_third_party() {
            4
        } else {
            2
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Dp => "DP",
            Mode::DpS => "DP-S",
            Mode::Tpp => "TPP",
            Mode::TppS => "TPP-S",
            Mode::Tppdp => "TPPDP",
            Mode::TppdpS => "TPPDP-S",
            Mode::None => "NONE",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        Ok(match norm.as_str() {
            "DP" => Mode::Dp,
            "DP-S" => Mode::DpS,
            "TPP" => Mode::Tpp,
            "TPP-S" => Mode::TppS,
            "TPPDP" => Mode::Tppdp,
            "TPPDP-S" => Mode::TppdpS,
            "NONE" => Mode::None,
            _ => return Err(format!("unknown mode '{s}'")),
        })
    }
}

/// Everything that determines one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub mode: Mode,
    pub scheme: RewardScheme,
    pub population_size: usize,
    pub episodes: u64,
    pub rounds_per_episode: usize,
    pub encoding: StateEncodingConfig,
    pub hidden_dim: usize,
    pub seed: u64,
    pub models: ModelSet,
    pub payoffs: PayoffMatrix,
}

impl MechanismConfig {
    /// Published defaults for `mode`: Scheme 2, five agents, 2000 episodes of
    /// ten rounds, 128 hidden units.
    pub fn new(mode: Mode) -> Self {
        MechanismConfig {
            mode,
            scheme: RewardScheme::Scheme2,
            population_size: 5,
            episodes: 2000,
            rounds_per_episode: 10,
            encoding: StateEncodingConfig::for_mode(mode.default_rep_in_play_state()),
            hidden_dim: 128,
            seed: 0,
            models: ModelSet::default(),
            payoffs: PayoffMatrix::default(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let min = self.mode.min_population();
        if self.population_size < min {
            return Err(format!(
                "mode {} needs at least {min} agents, got {}",
                self.mode, self.population_size
            ));
        }
        if self.episodes == 0 {
            return Err("episodes must be positive".into());
        }
        if self.rounds_per_episode == 0 {
            return Err("rounds_per_episode must be positive".into());
        }
        if self.hidden_dim == 0 {
            return Err("hidden_dim must be positive".into());
        }
        for (name, m) in [
            ("select", &self.models.select),
            ("play", &self.models.play),
            ("punish", &self.models.punish),
        ] {
            m.validate(self.episodes).map_err(|e| format!("{name} model: {e}"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_flags() {
        assert_eq!(Mode::Dp.opportunities_per_pairing(), 2);
        assert_eq!(Mode::TppS.opportunities_per_pairing(), 2);
        assert_eq!(Mode::Tppdp.opportunities_per_pairing(), 4);
        assert_eq!(Mode::None.opportunities_per_pairing(), 0);
        assert!(Mode::TppdpS.has_selection() && !Mode::Tppdp.has_selection());
        assert!(!Mode::None.has_selection() && !Mode::None.has_punishment());
        for m in Mode::MAIN_SIX.into_iter().chain([Mode::None]) {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
        assert_eq!("tppdp_s".parse::<Mode>().unwrap(), Mode::TppdpS);
        assert!("XYZ".parse::<Mode>().is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = MechanismConfig::new(Mode::Tpp);
        assert!(cfg.validate().is_ok());
        cfg.population_size = 3;
        assert!(cfg.validate().is_err());
        let mut cfg = MechanismConfig::new(Mode::Dp);
        cfg.population_size = 2;
        assert!(cfg.validate().is_ok());
        cfg.models.play.eps_min = 0.95;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn default_encodings() {
        assert!(!MechanismConfig::new(Mode::DpS).encoding.rep_in_play_state);
        assert!(MechanismConfig::new(Mode::Tppdp).encoding.rep_in_play_state);
        assert!(!MechanismConfig::new(Mode::TppS).encoding.rep_in_punish_state);
    }
}
