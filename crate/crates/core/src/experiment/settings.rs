use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::preset::{preset, Variant, DEFAULT_REPEATS};
use crate::agents::{RepScaling, RepSources};
use crate::dqn::ModelParams;
use crate::game::RewardScheme;
use crate::sim::{MechanismConfig, Mode};

/// Partial settings for one DQN model. Unset fields keep their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOverrides {
    pub buffer_capacity: Option<usize>,
    pub eps_max: Option<f64>,
    pub eps_min: Option<f64>,
    pub eps_decay: Option<f64>,
    pub learning_rate: Option<f64>,
    pub gamma: Option<f64>,
    pub batch_size: Option<usize>,
    pub target_update_interval: Option<u64>,
    /// `0` turns gradient clipping off.
    pub max_grad_norm: Option<f64>,
}

impl ModelOverrides {
    pub fn apply(&self, p: &mut ModelParams) {
        if let Some(v) = self.buffer_capacity {
            p.buffer_capacity = v;
        }
        if let Some(v) = self.eps_max {
            p.eps_max = v;
        }
        if let Some(v) = self.eps_min {
            p.eps_min = v;
        }
        if let Some(v) = self.eps_decay {
            p.eps_decay = v;
        }
        if let Some(v) = self.learning_rate {
            p.trainer.learning_rate = v;
        }
        if let Some(v) = self.gamma {
            p.trainer.gamma = v;
        }
        if let Some(v) = self.batch_size {
            p.trainer.batch_size = v;
        }
        if let Some(v) = self.target_update_interval {
            p.trainer.target_update_interval = v;
        }
        if let Some(v) = self.max_grad_norm {
            p.trainer.max_grad_norm = (v > 0.0).then_some(v);
        }
    }

    fn merge(self, over: ModelOverrides) -> ModelOverrides {
        ModelOverrides {
            buffer_capacity: over.buffer_capacity.or(self.buffer_capacity),
            eps_max: over.eps_max.or(self.eps_max),
            eps_min: over.eps_min.or(self.eps_min),
            eps_decay: over.eps_decay.or(self.eps_decay),
            learning_rate: over.learning_rate.or(self.learning_rate),
            gamma: over.gamma.or(self.gamma),
            batch_size: over.batch_size.or(self.batch_size),
            target_update_interval: over.target_update_interval.or(self.target_update_interval),
            max_grad_norm: over.max_grad_norm.or(self.max_grad_norm),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOverrideSet {
    pub select: Option<ModelOverrides>,
    pub play: Option<ModelOverrides>,
    pub punish: Option<ModelOverrides>,
}

/// Everything a user can set for a `run`, from a TOML file or from flags.
///
/// Every field is optional; [`merge`](Self::merge) layers one set over
/// another and the remaining gaps fall back to the published defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub preset: Option<String>,
    pub mode: Option<String>,
    pub scheme: Option<u8>,
    pub episodes: Option<u64>,
    pub rounds: Option<usize>,
    pub pop_size: Option<usize>,
    pub repeats: Option<usize>,
    pub seed: Option<u64>,
    pub hidden_dim: Option<usize>,
    pub rep_sources: Option<String>,
    pub rep_in_play_state: Option<bool>,
    pub rep_in_punish_state: Option<bool>,
    pub rep_scaling: Option<RepScaling>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub models: ModelOverrideSet,
}

fn merge_model(base: Option<ModelOverrides>, over: Option<ModelOverrides>) -> Option<ModelOverrides> {
    match (base, over) {
        (Some(b), Some(o)) => Some(b.merge(o)),
        (b, o) => o.or(b),
    }
}

impl Settings {
    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// `self` with every field that `over` sets replaced by `over`'s value.
    pub fn merge(self, over: Settings) -> Settings {
        Settings {
            preset: over.preset.or(self.preset),
            mode: over.mode.or(self.mode),
            scheme: over.scheme.or(self.scheme),
            episodes: over.episodes.or(self.episodes),
            rounds: over.rounds.or(self.rounds),
            pop_size: over.pop_size.or(self.pop_size),
            repeats: over.repeats.or(self.repeats),
            seed: over.seed.or(self.seed),
            hidden_dim: over.hidden_dim.or(self.hidden_dim),
            rep_sources: over.rep_sources.or(self.rep_sources),
            rep_in_play_state: over.rep_in_play_state.or(self.rep_in_play_state),
            rep_in_punish_state: over.rep_in_punish_state.or(self.rep_in_punish_state),
            rep_scaling: over.rep_scaling.or(self.rep_scaling),
            jobs: over.jobs.or(self.jobs),
            out: over.out.or(self.out),
            models: ModelOverrideSet {
                select: merge_model(self.models.select, over.models.select),
                play: merge_model(self.models.play, over.models.play),
                punish: merge_model(self.models.punish, over.models.punish),
            },
        }
    }

    pub fn parsed_mode(&self) -> Result<Option<Mode>, String> {
        self.mode.as_deref().map(str::parse).transpose()
    }

    /// Write every set per-run field into `cfg`.
    pub fn apply(&self, cfg: &mut MechanismConfig) -> Result<(), String> {
        if let Some(n) = self.scheme {
            cfg.scheme = RewardScheme::from_number(n).ok_or_else(|| format!("scheme must be 1 or 2, got {n}"))?;
        }
        if let Some(v) = self.episodes {
            cfg.episodes = v;
        }
        if let Some(v) = self.rounds {
            cfg.rounds_per_episode = v;
        }
        if let Some(v) = self.pop_size {
            cfg.population_size = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.hidden_dim {
            cfg.hidden_dim = v;
        }
        if let Some(s) = &self.rep_sources {
            cfg.encoding.rep_sources =
                RepSources::parse(s).ok_or_else(|| format!("rep_sources must be play, punish or both, got '{s}'"))?;
        }
        if let Some(v) = self.rep_in_play_state {
            cfg.encoding.rep_in_play_state = v;
        }
        if let Some(v) = self.rep_in_punish_state {
            cfg.encoding.rep_in_punish_state = v;
        }
        if let Some(v) = self.rep_scaling {
            cfg.encoding.rep_scaling = v;
        }
        for (over, params) in [
            (&self.models.select, &mut cfg.models.select),
            (&self.models.play, &mut cfg.models.play),
            (&self.models.punish, &mut cfg.models.punish),
        ] {
            if let Some(o) = over {
                o.apply(params);
            }
        }
        Ok(())
    }

    pub fn repeats_or(&self, default: usize) -> usize {
        self.repeats.unwrap_or(default)
    }

    /// The experiment these settings describe: a preset with every override
    /// applied to each variant, or a single mode.
    pub fn plan(&self) -> Result<ExperimentPlan, String> {
        let (name, mut variants) = match (&self.preset, self.parsed_mode()?) {
            (Some(_), Some(_)) => return Err("give either a preset or a mode, not both".into()),
            (None, None) => return Err("nothing to run: set a preset or a mode".into()),
            (Some(p), None) => {
                let preset = preset(p).ok_or_else(|| format!("unknown preset '{p}'"))?;
                (preset.name.to_string(), preset.variants)
            }
            (None, Some(mode)) => (
                mode.name().to_string(),
                vec![Variant::new(mode.name(), MechanismConfig::new(mode))],
            ),
        };
        for v in &mut variants {
            self.apply(&mut v.config)?;
            v.config
                .validate()
                .map_err(|e| format!("{}: {e}", v.label))?;
        }
        let repeats = self.repeats_or(DEFAULT_REPEATS);
        if repeats == 0 {
            return Err("repeats must be positive".into());
        }
        Ok(ExperimentPlan {
            name,
            master_seed: self.seed.unwrap_or(0),
            repeats,
            variants,
        })
    }
}

/// A fully resolved experiment: the variants to run and how often.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub name: String,
    pub master_seed: u64,
    pub repeats: usize,
    pub variants: Vec<Variant>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_override_order() {
        let file = Settings::from_toml_str(
            r#"
            preset = "main-six"
            episodes = 300
            scheme = 1
            [models.play]
            learning_rate = 0.05
            eps_min = 0.02
            "#,
        )
        .unwrap();
        let cli = Settings {
            episodes: Some(50),
            models: ModelOverrideSet {
                play: Some(ModelOverrides {
                    learning_rate: Some(0.2),
                    ..Default::default()
                }),
                ..Default::default()
            },
            ..Default::default()
        };
        let plan = file.merge(cli).plan().unwrap();
        assert_eq!(plan.variants.len(), 6);
        let cfg = &plan.variants[0].config;
        assert_eq!(cfg.episodes, 50);
        assert_eq!(cfg.scheme, RewardScheme::Scheme1);
        assert_eq!(cfg.models.play.trainer.learning_rate, 0.2);
        assert_eq!(cfg.models.play.eps_min, 0.02);
        assert_eq!(plan.repeats, DEFAULT_REPEATS);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(Settings::from_toml_str("episods = 3").is_err());
        let bad = Settings {
            mode: Some("DP".into()),
            scheme: Some(3),
            ..Default::default()
        };
        assert!(bad.plan().is_err());
        let both = Settings {
            mode: Some("DP".into()),
            preset: Some("main-six".into()),
            ..Default::default()
        };
        assert!(both.plan().is_err());
        assert!(Settings::default().plan().is_err());
        let small = Settings {
            mode: Some("TPP".into()),
            pop_size: Some(3),
            ..Default::default()
        };
        assert!(small.plan().is_err());
    }

    #[test]
    fn clipping_can_be_disabled() {
        let mut p = ModelParams::playing();
        ModelOverrides {
            max_grad_norm: Some(0.0),
            ..Default::default()
        }
        .apply(&mut p);
        assert_eq!(p.trainer.max_grad_norm, None);
    }

    #[test]
    fn single_mode_plan() {
        let s = Settings {
            mode: Some("tpp-s".into()),
            rep_sources: Some("punish".into()),
            seed: Some(9),
            repeats: Some(2),
            ..Default::default()
        };
        let plan = s.plan().unwrap();
        assert_eq!(plan.name, "TPP-S");
        assert_eq!(plan.master_seed, 9);
        assert_eq!(plan.variants[0].config.encoding.rep_sources, RepSources::PunishOnly);
    }
}
