use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::io::{aggregate_runs, read_raw_csv, write_aggregate_csv, write_raw_csv};
use super::manifest::{aggregate_path, RunManifest};
use super::preset::Variant;
use super::settings::ExperimentPlan;
use super::ExperimentError;
use crate::metrics::EpisodeMetrics;
use crate::sim::{MechanismConfig, SimError, Simulation};

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Called after each finished repeat with the variant and repeat index.
pub type Progress<'a> = &'a (dyn Fn(&Variant, usize) + Sync);

pub struct RunOptions<'a> {
    /// Upper bound on repeats simulated at once.
    pub jobs: usize,
    pub window: usize,
    pub progress: Option<Progress<'a>>,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        RunOptions {
            jobs: default_jobs(),
            window: super::io::ROLLING_WINDOW,
            progress: None,
        }
    }
}

pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, usize::from)
}

#[derive(Debug, Clone)]
pub struct VariantResult {
    pub variant: Variant,
    /// Metrics tables indexed by repeat.
    pub runs: Vec<Vec<EpisodeMetrics>>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub results: Vec<VariantResult>,
}

/// Run `cfg` to completion; on a numerical failure the networks as they
/// stood are written to `snapshot_path`.
pub fn simulate(cfg: MechanismConfig, label: &str, repeat: usize, snapshot_path: &Path) -> Result<Vec<EpisodeMetrics>, ExperimentError> {
    let mut sim = Simulation::new(cfg).map_err(ExperimentError::from)?;
    let mut rows = Vec::with_capacity(sim.config().episodes as usize);
    while !sim.is_finished() {
        match sim.step() {
            Ok(row) => rows.push(row),
            Err(e) if e.is_numerical() => return Err(write_failure(&sim, e, label, repeat, snapshot_path)),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(rows)
}

fn write_failure(sim: &Simulation, err: SimError, label: &str, repeat: usize, path: &Path) -> ExperimentError {
    let written = path
        .parent()
        .map_or(Ok(()), std::fs::create_dir_all)
        .map_err(|e| ExperimentError::io(path, e))
        .and_then(|_| {
            let text = serde_json::to_string(&sim.snapshot()).map_err(|e| ExperimentError::Json {
                path: path.to_path_buf(),
                source: e,
            })?;
            std::fs::write(path, text).map_err(|e| ExperimentError::io(path, e))
        });
    if let Err(e) = written {
        return e;
    }
    ExperimentError::Numerical {
        label: label.to_string(),
        repeat,
        snapshot: path.to_path_buf(),
        source: err,
    }
}

/// Run every (variant, repeat) pair of `plan` into `dir`: raw CSVs under
/// `raw/`, aggregates under `aggregate/` (two or more repeats only) and
/// `manifest.json`, which is written before the first simulation starts.
pub fn run_plan(plan: &ExperimentPlan, dir: &Path, opts: &RunOptions<'_>) -> Result<RunReport, ExperimentError> {
    let mut manifest = RunManifest::new(plan, timestamp());
    for sub in ["raw", "aggregate"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| ExperimentError::io(&p, e))?;
    }
    manifest.write(dir)?;

    let tasks: Vec<(usize, usize)> = (0..plan.variants.len())
        .flat_map(|v| (0..plan.repeats).map(move |r| (v, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| ExperimentError::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<Vec<EpisodeMetrics>, ExperimentError>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(v, r)| {
                let record = &manifest.variants[v];
                let variant = &record.variant;
                let mut cfg = variant.config.clone();
                cfg.seed = manifest.seeds[r];
                let snapshot = dir.join("failures").join(format!("{}_r{r}.snapshot.json", variant.file_stem()));
                let rows = simulate(cfg.clone(), &variant.label, r, &snapshot)?;
                write_raw_csv(&dir.join(&record.raw_paths[r]), &cfg, r, &rows)?;
                if let Some(progress) = opts.progress {
                    progress(variant, r);
                }
                Ok(rows)
            })
            .collect()
    });

    let mut results: Vec<VariantResult> = plan
        .variants
        .iter()
        .map(|v| VariantResult {
            variant: v.clone(),
            runs: Vec::with_capacity(plan.repeats),
        })
        .collect();
    let mut first_err = None;
    for (&(v, _), outcome) in tasks.iter().zip(outcomes) {
        match outcome {
            Ok(rows) => results[v].runs.push(rows),
            Err(e) => {
                // a numerical failure is the most useful one to report
                let replace = match &first_err {
                    None => true,
                    Some(prev) => !matches!(prev, ExperimentError::Numerical { .. }) && matches!(e, ExperimentError::Numerical { .. }),
                };
                if replace {
                    first_err = Some(e);
                }
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }

    for (res, record) in results.iter().zip(&manifest.variants) {
        if let Some(rel) = &record.aggregate_path {
            let rows = aggregate_runs(&res.variant.label, &res.runs, opts.window)?;
            write_aggregate_csv(&dir.join(rel), &rows)?;
        }
    }
    manifest.finished_at = Some(timestamp());
    manifest.write(dir)?;
    Ok(RunReport {
        dir: dir.to_path_buf(),
        manifest,
        results,
    })
}

/// Rebuild every aggregate CSV of a finished run directory from its raw
/// files. Returns the files written.
pub fn aggregate_dir(dir: &Path, window: usize) -> Result<Vec<PathBuf>, ExperimentError> {
    let manifest = RunManifest::read(dir)?;
    let base = if dir.is_dir() {
        dir.to_path_buf()
    } else {
        dir.parent().map(Path::to_path_buf).unwrap_or_default()
    };
    let missing: Vec<PathBuf> = manifest
        .variants
        .iter()
        .flat_map(|v| v.raw_paths.iter().map(|p| base.join(p)))
        .filter(|p| !p.is_file())
        .collect();
    if !missing.is_empty() {
        return Err(ExperimentError::MissingRaw(missing));
    }
    let mut written = Vec::new();
    for record in &manifest.variants {
        if record.raw_paths.len() < 2 {
            return Err(ExperimentError::Config(format!(
                "{}: aggregation needs at least 2 repeats, found {}",
                record.variant.label,
                record.raw_paths.len()
            )));
        }
        let runs = record
            .raw_paths
            .iter()
            .map(|p| read_raw_csv(&base.join(p)).map(|r| r.rows))
            .collect::<Result<Vec<_>, _>>()?;
        let rel = record.aggregate_path.clone().unwrap_or_else(|| aggregate_path(&record.variant));
        let path = base.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| ExperimentError::io(parent, e))?;
        }
        let rows = aggregate_runs(&record.variant.label, &runs, window)?;
        write_aggregate_csv(&path, &rows)?;
        written.push(path);
    }
    Ok(written)
}
