use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ipdsim::experiment::io::ROLLING_WINDOW;
use ipdsim::experiment::runner::{default_jobs, timestamp};
use ipdsim::experiment::search::write_search_csv;
use ipdsim::experiment::settings::{ModelOverrideSet, Settings};
use ipdsim::experiment::{
    aggregate_dir, hyper_search, preset, run_plan, ExperimentError, RunManifest, RunOptions, SearchOptions, SearchSpace,
    Variant, PRESET_NAMES,
};
use ipdsim::sim::{MechanismConfig, Mode};

/// Environment variable naming the directory under which runs are written
/// when `--out` is not given.
const OUT_ENV: &str = "IPDSIM_OUT";
const DEFAULT_OUT_ROOT: &str = "runs";

#[derive(Parser)]
#[command(name = "ipdsim", version, about = "Learning agents in the iterated prisoner's dilemma with punishment, partner selection and reputation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset, a config file or a single mode
    Run(RunArgs),
    /// Random search over DQN hyperparameters
    Search(SearchArgs),
    /// Rebuild aggregate CSVs of a run directory from its raw files
    Aggregate(AggregateArgs),
    /// Inspect the built-in experiment presets
    Presets {
        #[command(subcommand)]
        command: PresetsCommand,
    },
}

#[derive(Subcommand)]
enum PresetsCommand {
    /// Name, variants and description of every preset
    List,
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// TOML settings file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// DP, DP-S, TPP, TPP-S, TPPDP, TPPDP-S or NONE
    #[arg(long)]
    mode: Option<String>,
    /// Just-punishment reward scheme (1 or 2)
    #[arg(long)]
    scheme: Option<u8>,
    #[arg(long)]
    episodes: Option<u64>,
    /// Rounds per episode
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    pop_size: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Master seed; repeat seeds are derived from it
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    /// play, punish or both
    #[arg(long)]
    rep_sources: Option<String>,
    #[arg(long)]
    rep_in_play_state: Option<bool>,
    #[arg(long)]
    rep_in_punish_state: Option<bool>,
    /// Maximum number of repeats simulated at once
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory [default: $IPDSIM_OUT/<name>, or runs/<name>]
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn settings(&self) -> Result<Settings, ExperimentError> {
        let file = match &self.config {
            Some(p) => Settings::from_file(p).map_err(ExperimentError::Config)?,
            None => Settings::default(),
        };
        let flags = Settings {
            preset: None,
            mode: self.mode.clone(),
            scheme: self.scheme,
            episodes: self.episodes,
            rounds: self.rounds,
            pop_size: self.pop_size,
            repeats: self.repeats,
            seed: self.seed,
            hidden_dim: self.hidden_dim,
            rep_sources: self.rep_sources.clone(),
            rep_in_play_state: self.rep_in_play_state,
            rep_in_punish_state: self.rep_in_punish_state,
            rep_scaling: None,
            jobs: self.jobs,
            out: self.out.clone(),
            models: ModelOverrideSet::default(),
        };
        Ok(file.merge(flags))
    }
}

#[derive(Args)]
struct RunArgs {
    /// Built-in experiment (see `presets list`)
    #[arg(long, conflicts_with = "manifest")]
    preset: Option<String>,
    /// Repeat the exact experiment recorded in a manifest
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Args)]
struct AggregateArgs {
    /// Run directory containing manifest.json
    dir: PathBuf,
    /// Rolling-mean window in episodes
    #[arg(long, default_value_t = ROLLING_WINDOW)]
    window: usize,
}

fn out_dir(explicit: Option<PathBuf>, name: &str) -> PathBuf {
    explicit.unwrap_or_else(|| {
        let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT), PathBuf::from);
        root.join(name)
    })
}

fn report_progress(v: &Variant, repeat: usize) {
    eprintln!("finished {} repeat {repeat}", v.label);
}

fn run(args: RunArgs) -> Result<(), ExperimentError> {
    let (plan, settings) = match &args.manifest {
        Some(path) => {
            let a = &args.cfg;
            let changes_plan = a.config.is_some()
                || a.mode.is_some()
                || a.scheme.is_some()
                || a.episodes.is_some()
                || a.rounds.is_some()
                || a.pop_size.is_some()
                || a.repeats.is_some()
                || a.seed.is_some()
                || a.hidden_dim.is_some()
                || a.rep_sources.is_some()
                || a.rep_in_play_state.is_some()
                || a.rep_in_punish_state.is_some();
            if changes_plan {
                return Err(ExperimentError::Config(
                    "--manifest reruns a recorded experiment; only --jobs and --out may be given".into(),
                ));
            }
            (RunManifest::read(path)?.plan(), args.cfg.settings()?)
        }
        None => {
            let mut settings = args.cfg.settings()?;
            if args.preset.is_some() {
                settings.preset = args.preset.clone();
            }
            (settings.plan().map_err(ExperimentError::Config)?, settings)
        }
    };
    let dir = out_dir(settings.out.clone(), &plan.name);
    let opts = RunOptions {
        jobs: settings.jobs.unwrap_or_else(default_jobs),
        window: ROLLING_WINDOW,
        progress: Some(&report_progress),
    };
    eprintln!(
        "running {} ({} variants x {} repeats) into {}",
        plan.name,
        plan.variants.len(),
        plan.repeats,
        dir.display()
    );
    let report = run_plan(&plan, &dir, &opts)?;
    println!("{}", report.dir.join(ipdsim::experiment::manifest::MANIFEST_FILE).display());
    Ok(())
}

fn search(args: SearchArgs) -> Result<(), ExperimentError> {
    let settings = args.cfg.settings()?;
    if settings.preset.is_some() {
        return Err(ExperimentError::Config("search tunes a single mode, not a preset".into()));
    }
    let mode = settings.parsed_mode().map_err(ExperimentError::Config)?.unwrap_or(Mode::TppdpS);
    let mut base = MechanismConfig::new(mode);
    base.episodes = 500;
    settings.apply(&mut base).map_err(ExperimentError::Config)?;
    base.validate().map_err(ExperimentError::Config)?;
    let opts = SearchOptions {
        trials: args.trials,
        repeats: settings.repeats_or(3),
        master_seed: settings.seed.unwrap_or(0),
        jobs: settings.jobs.unwrap_or_else(default_jobs),
    };
    let dir = out_dir(settings.out.clone(), &format!("search-{mode}"));
    std::fs::create_dir_all(&dir).map_err(|e| ExperimentError::Io {
        path: dir.clone(),
        source: e,
    })?;
    let space = SearchSpace::default();
    write_search_info(&dir, &space, &base, &opts, None)?;
    eprintln!("searching {} trials x {} repeats of {mode} into {}", opts.trials, opts.repeats, dir.display());
    let results = hyper_search(&space, &base, &opts)?;
    let csv_path = dir.join("search.csv");
    write_search_csv(&csv_path, &results)?;
    write_search_info(&dir, &space, &base, &opts, Some(timestamp()))?;
    println!("{}", csv_path.display());
    Ok(())
}

fn write_search_info(
    dir: &Path,
    space: &SearchSpace,
    base: &MechanismConfig,
    opts: &SearchOptions,
    finished_at: Option<String>,
) -> Result<(), ExperimentError> {
    let path = dir.join("search.json");
    let info = serde_json::json!({
        "software_version": env!("CARGO_PKG_VERSION"),
        "finished_at": finished_at,
        "trials": opts.trials,
        "repeats": opts.repeats,
        "master_seed": opts.master_seed,
        "base_config": base,
        "space": space,
    });
    let text = serde_json::to_string_pretty(&info).map_err(|e| ExperimentError::Json {
        path: path.clone(),
        source: e,
    })?;
    std::fs::write(&path, text + "\n").map_err(|e| ExperimentError::Io { path, source: e })
}

fn list_presets() {
    for name in PRESET_NAMES {
        let p = preset(name).expect("listed presets exist");
        let labels: Vec<&str> = p.variants.iter().map(|v| v.label.as_str()).collect();
        println!("{:<14} {}", p.name, p.description);
        println!("{:<14} variants: {}", "", labels.join(", "));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Search(args) => search(args),
        Command::Aggregate(args) => aggregate_dir(&args.dir, args.window).map(|written| {
            for p in written {
                println!("{}", p.display());
            }
        }),
        Command::Presets {
            command: PresetsCommand::List,
        } => {
            list_presets();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
