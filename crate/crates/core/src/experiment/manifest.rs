use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::preset::Variant;
use super::seeds::repeat_seeds;
use super::settings::ExperimentPlan;
use super::ExperimentError;
use crate::game::PunishmentRules;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to rerun an experiment bit for bit, plus where its
/// outputs went. Paths are relative to the directory holding the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    pub software_version: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub master_seed: u64,
    pub repeats: usize,
    pub seeds: Vec<u64>,
    pub variants: Vec<VariantRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantRecord {
    #[serde(flatten)]
    pub variant: Variant,
    /// The punishment constants implied by the configured scheme.
    pub scheme_rules: PunishmentRules,
    pub raw_paths: Vec<PathBuf>,
    pub aggregate_path: Option<PathBuf>,
}

pub fn raw_path(variant: &Variant, repeat: usize) -> PathBuf {
    PathBuf::from("raw").join(format!("{}_r{repeat}.csv", variant.file_stem()))
}

pub fn aggregate_path(variant: &Variant) -> PathBuf {
    PathBuf::from("aggregate").join(format!("{}.csv", variant.file_stem()))
}

impl RunManifest {
    pub fn new(plan: &ExperimentPlan, started_at: String) -> Self {
        let variants = plan
            .variants
            .iter()
            .map(|v| VariantRecord {
                variant: v.clone(),
                scheme_rules: v.config.scheme.rules(),
                raw_paths: (0..plan.repeats).map(|r| raw_path(v, r)).collect(),
                aggregate_path: (plan.repeats >= 2).then(|| aggregate_path(v)),
            })
            .collect();
        RunManifest {
            name: plan.name.clone(),
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at,
            finished_at: None,
            master_seed: plan.master_seed,
            repeats: plan.repeats,
            seeds: repeat_seeds(plan.master_seed, plan.repeats),
            variants,
        }
    }

    /// The plan this manifest was written for.
    pub fn plan(&self) -> ExperimentPlan {
        ExperimentPlan {
            name: self.name.clone(),
            master_seed: self.master_seed,
            repeats: self.repeats,
            variants: self.variants.iter().map(|v| v.variant.clone()).collect(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| ExperimentError::Json {
            path: path.clone(),
            source: e,
        })?;
        std::fs::write(&path, text + "\n").map_err(|e| ExperimentError::io(&path, e))
    }

    /// Read `manifest.json` from a run directory, or a manifest file directly.
    pub fn read(path: &Path) -> Result<Self, ExperimentError> {
        let path = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = std::fs::read_to_string(&path).map_err(|e| ExperimentError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| ExperimentError::Json { path, source: e })
    }
}
