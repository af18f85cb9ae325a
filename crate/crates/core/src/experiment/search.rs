//! Random search over DQN hyperparameters.
//!
//! Each trial draws one value per hyperparameter and per model (select,
//! play, punish) uniformly from a fixed grid, runs a few short repeats, and
//! is scored by the mean societal reward per episode averaged over repeats.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::seeds::repeat_seed;
use super::ExperimentError;
use crate::agents::ModelSet;
use crate::dqn::ModelParams;
use crate::sim::MechanismConfig;

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub buffer_capacities: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    pub target_update_intervals: Vec<u64>,
    /// Shared grid for both exploration endpoints.
    pub epsilons: Vec<f64>,
    pub eps_decays: Vec<f64>,
    pub gammas: Vec<f64>,
    pub learning_rates: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            buffer_capacities: (11..=20).map(|k| 1usize << k).collect(),
            batch_sizes: (10..=18).map(|k| 1usize << k).collect(),
            target_update_intervals: (1..=10).map(|k| 500 * k).collect(),
            epsilons: linspace(1e-4, 1.0, 10),
            eps_decays: linspace(1e-4, 0.9, 10),
            gammas: vec![0.8, 0.9, 0.99],
            learning_rates: vec![0.001, 0.01, 0.1],
        }
    }
}

impl SearchSpace {
    /// One model's parameters drawn from the grids. The two exploration
    /// endpoints are drawn independently and ordered so `eps_min <= eps_max`.
    pub fn sample_model<R: Rng + ?Sized>(&self, base: &ModelParams, rng: &mut R) -> ModelParams {
        let pick = |v: &[f64], rng: &mut R| *v.choose(rng).expect("non-empty grid");
        let mut p = *base;
        p.buffer_capacity = *self.buffer_capacities.choose(rng).expect("non-empty grid");
        p.trainer.batch_size = *self.batch_sizes.choose(rng).expect("non-empty grid");
        p.trainer.target_update_interval = *self.target_update_intervals.choose(rng).expect("non-empty grid");
        let (a, b) = (pick(&self.epsilons, rng), pick(&self.epsilons, rng));
        p.eps_min = a.min(b);
        p.eps_max = a.max(b);
        p.eps_decay = pick(&self.eps_decays, rng);
        p.trainer.gamma = pick(&self.gammas, rng);
        p.trainer.learning_rate = pick(&self.learning_rates, rng);
        p
    }

    pub fn sample<R: Rng + ?Sized>(&self, base: &ModelSet, rng: &mut R) -> ModelSet {
        ModelSet {
            select: self.sample_model(&base.select, rng),
            play: self.sample_model(&base.play, rng),
            punish: self.sample_model(&base.punish, rng),
        }
    }

    fn is_empty(&self) -> bool {
        self.buffer_capacities.is_empty()
            || self.batch_sizes.is_empty()
            || self.target_update_intervals.is_empty()
            || self.epsilons.is_empty()
            || self.eps_decays.is_empty()
            || self.gammas.is_empty()
            || self.learning_rates.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub trials: usize,
    pub repeats: usize,
    pub master_seed: u64,
    pub jobs: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            trials: 100,
            repeats: 3,
            master_seed: 0,
            jobs: super::runner::default_jobs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub models: ModelSet,
    /// Mean over repeats of each repeat's mean societal reward per episode.
    /// `None` when a repeat diverged.
    pub score: Option<f64>,
}

/// Best first; unscored trials last; equal scores keep trial order.
pub fn rank(results: &mut [TrialResult]) {
    results.sort_by(|a, b| {
        let key = |t: &TrialResult| t.score.unwrap_or(f64::NEG_INFINITY);
        key(b).total_cmp(&key(a)).then(a.trial.cmp(&b.trial))
    });
}

/// Sample `opts.trials` model sets, score each on `base`, and return them ranked.
pub fn hyper_search(space: &SearchSpace, base: &MechanismConfig, opts: &SearchOptions) -> Result<Vec<TrialResult>, ExperimentError> {
    if opts.trials == 0 || opts.repeats == 0 {
        return Err(ExperimentError::Config("search needs at least one trial and one repeat".into()));
    }
    if space.is_empty() {
        return Err(ExperimentError::Config("search space has an empty grid".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.master_seed);
    let candidates: Vec<ModelSet> = (0..opts.trials).map(|_| space.sample(&base.models, &mut rng)).collect();
    for (t, models) in candidates.iter().enumerate() {
        let mut cfg = base.clone();
        cfg.models = *models;
        cfg.validate()
            .map_err(|e| ExperimentError::Config(format!("trial {t}: {e}")))?;
    }

    let tasks: Vec<(usize, usize)> = (0..opts.trials)
        .flat_map(|t| (0..opts.repeats).map(move |r| (t, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| ExperimentError::Config(format!("thread pool: {e}")))?;
    let scores: Vec<Result<Option<f64>, ExperimentError>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(t, r)| {
                let mut cfg = base.clone();
                cfg.models = candidates[t];
                cfg.seed = repeat_seed(opts.master_seed, r);
                let mut sim = crate::sim::Simulation::new(cfg)?;
                let mut total = 0.0;
                let mut episodes = 0usize;
                while !sim.is_finished() {
                    match sim.step() {
                        Ok(row) => {
                            total += row.societal_reward;
                            episodes += 1;
                        }
                        Err(e) if e.is_numerical() => return Ok(None),
                        Err(e) => return Err(e.into()),
                    }
                }
                Ok(Some(total / episodes as f64))
            })
            .collect()
    });

    let mut per_trial: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(opts.repeats); opts.trials];
    for (&(t, _), s) in tasks.iter().zip(scores) {
        per_trial[t].push(s?);
    }
    let mut results: Vec<TrialResult> = per_trial
        .into_iter()
        .zip(candidates)
        .enumerate()
        .map(|(trial, (s, models))| TrialResult {
            trial,
            models,
            score: s
                .iter()
                .copied()
                .collect::<Option<Vec<f64>>>()
                .map(|v| v.iter().sum::<f64>() / v.len() as f64),
        })
        .collect();
    rank(&mut results);
    Ok(results)
}

const MODEL_COLUMNS: [&str; 8] = [
    "buffer_capacity",
    "batch_size",
    "target_update_interval",
    "eps_max",
    "eps_min",
    "eps_decay",
    "gamma",
    "learning_rate",
];

pub fn search_header() -> Vec<String> {
    let mut h = vec!["rank".to_string(), "trial".into(), "score".into()];
    for model in ["select", "play", "punish"] {
        h.extend(MODEL_COLUMNS.iter().map(|c| format!("{model}_{c}")));
    }
    h
}

fn model_fields(p: &ModelParams) -> [String; 8] {
    [
        p.buffer_capacity.to_string(),
        p.trainer.batch_size.to_string(),
        p.trainer.target_update_interval.to_string(),
        p.eps_max.to_string(),
        p.eps_min.to_string(),
        p.eps_decay.to_string(),
        p.trainer.gamma.to_string(),
        p.trainer.learning_rate.to_string(),
    ]
}

/// Ranked trials, one row each, in the order given.
pub fn write_search_csv(path: &Path, results: &[TrialResult]) -> Result<(), ExperimentError> {
    let csv_err = |e| ExperimentError::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(search_header()).map_err(csv_err)?;
    for (rank, t) in results.iter().enumerate() {
        let mut rec = vec![rank.to_string(), t.trial.to_string(), t.score.map(|s| s.to_string()).unwrap_or_default()];
        for p in [&t.models.select, &t.models.play, &t.models.punish] {
            rec.extend(model_fields(p));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| ExperimentError::io(path, e))
}
