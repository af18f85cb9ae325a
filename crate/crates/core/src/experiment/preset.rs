use serde::{Deserialize, Serialize};

use crate::agents::RepSources;
use crate::game::RewardScheme;
use crate::sim::{MechanismConfig, Mode};

/// One line in an experiment's plots: a labelled configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub label: String,
    pub config: MechanismConfig,
}

impl Variant {
    pub fn new(label: impl Into<String>, config: MechanismConfig) -> Self {
        Variant {
            label: label.into(),
            config,
        }
    }

    /// Label with every character outside `[A-Za-z0-9_-]` replaced, for file names.
    pub fn file_stem(&self) -> String {
        self.label
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: &'static str,
    pub description: &'static str,
    pub variants: Vec<Variant>,
    pub repeats: usize,
}

pub const DEFAULT_REPEATS: usize = 20;

pub const PRESET_NAMES: [&str; 7] = [
    "main-six",
    "scheme1",
    "baseline-none",
    "rep-sources",
    "rep-in-states",
    "pop-sizes",
    "hidden-64",
];

pub const POP_SIZES: [usize; 6] = [5, 10, 15, 20, 25, 30];

const SWEPT_MODES: [Mode; 2] = [Mode::TppS, Mode::DpS];

fn by_mode(modes: &[Mode], edit: impl Fn(&mut MechanismConfig)) -> Vec<Variant> {
    modes
        .iter()
        .map(|&m| {
            let mut cfg = MechanismConfig::new(m);
            edit(&mut cfg);
            Variant::new(m.name(), cfg)
        })
        .collect()
}

/// Look up a preset by name.
pub fn preset(name: &str) -> Option<ExperimentPreset> {
    let (name, description, variants) = match name {
        "main-six" => (
            "main-six",
            "the six punishment/selection combinations under the profitable just-punishment scheme",
            by_mode(&Mode::MAIN_SIX, |_| {}),
        ),
        "scheme1" => (
            "scheme1",
            "the six combinations when just punishment is a net loss",
            by_mode(&Mode::MAIN_SIX, |c| c.scheme = RewardScheme::Scheme1),
        ),
        "baseline-none" => (
            "baseline-none",
            "no punishment and random pairing",
            by_mode(&[Mode::None], |_| {}),
        ),
        "rep-sources" => {
            let mut v = Vec::new();
            for m in SWEPT_MODES {
                for src in [RepSources::PlayOnly, RepSources::PunishOnly, RepSources::Both] {
                    let mut cfg = MechanismConfig::new(m);
                    cfg.encoding.rep_sources = src;
                    v.push(Variant::new(format!("{m}_rep-{}", src.name()), cfg));
                }
            }
            ("rep-sources", "which behaviours count toward reputation", v)
        }
        "rep-in-states" => {
            let mut v = Vec::new();
            for m in SWEPT_MODES {
                for (tag, play, punish) in [
                    ("none", false, false),
                    ("play", true, false),
                    ("punish", false, true),
                    ("both", true, true),
                ] {
                    let mut cfg = MechanismConfig::new(m);
                    cfg.encoding.rep_in_play_state = play;
                    cfg.encoding.rep_in_punish_state = punish;
                    v.push(Variant::new(format!("{m}_state-{tag}"), cfg));
                }
            }
            ("rep-in-states", "which observations include reputations", v)
        }
        "pop-sizes" => {
            let mut v = Vec::new();
            for m in SWEPT_MODES {
                for n in POP_SIZES {
                    let mut cfg = MechanismConfig::new(m);
                    cfg.population_size = n;
                    v.push(Variant::new(format!("{m}_n{n}"), cfg));
                }
            }
            ("pop-sizes", "population sizes from 5 to 30", v)
        }
        "hidden-64" => (
            "hidden-64",
            "the six combinations with 64 hidden units",
            by_mode(&Mode::MAIN_SIX, |c| c.hidden_dim = 64),
        ),
        _ => return None,
    };
    Some(ExperimentPreset {
        name,
        description,
        variants,
        repeats: DEFAULT_REPEATS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            assert!(!p.variants.is_empty());
            for v in &p.variants {
                v.config.validate().unwrap();
            }
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn variant_counts() {
        let count = |n| preset(n).unwrap().variants.len();
        assert_eq!(count("main-six"), 6);
        assert_eq!(count("scheme1"), 6);
        assert_eq!(count("baseline-none"), 1);
        assert_eq!(count("rep-sources"), 6);
        assert_eq!(count("rep-in-states"), 8);
        assert_eq!(count("pop-sizes"), 12);
        assert_eq!(count("hidden-64"), 6);
    }

    #[test]
    fn presets_set_what_they_sweep() {
        let s1 = preset("scheme1").unwrap();
        assert!(s1.variants.iter().all(|v| v.config.scheme == RewardScheme::Scheme1));
        let h = preset("hidden-64").unwrap();
        assert!(h.variants.iter().all(|v| v.config.hidden_dim == 64));
        let labels: Vec<_> = preset("main-six").unwrap().variants.into_iter().map(|v| v.label).collect();
        assert_eq!(labels, ["TPP-S", "TPP", "DP-S", "DP", "TPPDP-S", "TPPDP"]);
        let pop = preset("pop-sizes").unwrap();
        assert_eq!(pop.variants[11].config.population_size, 30);
        assert_eq!(pop.variants[11].label, "DP-S_n30");
    }

    #[test]
    fn file_stems_are_safe() {
        let v = Variant::new("a/b c", MechanismConfig::new(Mode::Dp));
        assert_eq!(v.file_stem(), "a_b_c");
    }
}
