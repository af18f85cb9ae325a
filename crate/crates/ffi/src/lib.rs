//! C interface to the `ipdsim` simulation engine.
//!
//! A simulation lives behind an opaque `IpdSimulation` pointer created by
//! `ipd_simulation_new` or `ipd_simulation_from_toml` and released with
//! `ipd_simulation_free`. Every fallible function returns an `IpdStatus`;
//! on failure `ipd_last_error_message` describes what went wrong.
//! Missing metric values (undefined ratios) are reported as NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ipdsim::experiment::settings::Settings;
use ipdsim::game::{self, Action, PunishDecision, RewardScheme};
use ipdsim::metrics::EpisodeMetrics;
use ipdsim::sim::{MechanismConfig, Mode, SimError, Simulation};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    /// Training produced a non-finite loss. The simulation cannot continue.
    Numerical = 4,
    /// Every configured episode has already run.
    Finished = 5,
    Internal = 6,
}

/// Action codes accepted where a function takes an `int32_t` action.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpdAction {
    Cooperate = 0,
    Defect = 1,
}

fn action(code: i32, what: &str) -> Result<Action, IpdStatus> {
    usize::try_from(code)
        .ok()
        .and_then(Action::from_index)
        .ok_or_else(|| fail(IpdStatus::InvalidArgument, format!("{what} must be 0 or 1, got {code}")))
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpdEpisodeMetrics {
    pub episode: u64,
    pub cooperation_pct: f64,
    pub cooperator_selection_pct: f64,
    pub punishment_pct: f64,
    pub selected_punisher_pct: f64,
    pub just_ratio_pct: f64,
    pub just_punisher_selection_pct: f64,
    pub societal_reward: f64,
    pub societal_reputation: f64,
}

impl From<&EpisodeMetrics> for IpdEpisodeMetrics {
    fn from(m: &EpisodeMetrics) -> Self {
        let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
        IpdEpisodeMetrics {
            episode: m.episode,
            cooperation_pct: m.cooperation_pct,
            cooperator_selection_pct: nan(m.cooperator_selection_pct),
            punishment_pct: nan(m.punishment_pct),
            selected_punisher_pct: nan(m.selected_punisher_pct),
            just_ratio_pct: nan(m.just_ratio_pct),
            just_punisher_selection_pct: nan(m.just_punisher_selection_pct),
            societal_reward: m.societal_reward,
            societal_reputation: m.societal_reputation,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IpdPunishmentDeltas {
    pub punisher_reward: i64,
    pub punished_reward: i64,
    pub punisher_rep: i64,
}

/// Opaque simulation handle.
pub struct IpdSimulation {
    sim: Simulation,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: IpdStatus, msg: impl Into<String>) -> IpdStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> IpdStatus) -> IpdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(IpdStatus::Internal, "internal panic"),
    }
}

fn sim_status(e: &SimError) -> IpdStatus {
    match e {
        SimError::Config(_) => IpdStatus::InvalidConfig,
        e if e.is_numerical() => IpdStatus::Numerical,
        _ => IpdStatus::Internal,
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, IpdStatus> {
    if p.is_null() {
        return Err(fail(IpdStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(IpdStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn boxed(cfg: MechanismConfig, out: *mut *mut IpdSimulation) -> IpdStatus {
    match Simulation::new(cfg) {
        Ok(sim) => {
            // SAFETY: callers check `out` for null before building the config
            unsafe { *out = Box::into_raw(Box::new(IpdSimulation { sim })) };
            IpdStatus::Ok
        }
        Err(e) => fail(sim_status(&e), e.to_string()),
    }
}

/// Message for the last failure on the calling thread, or null. The string
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ipd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ipd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Create a simulation with the published defaults for `mode` ("DP",
/// "TPP-S", ..., "NONE") and the given scheme (1 or 2), population size,
/// episode count, rounds per episode and seed.
///
/// # Safety
/// `mode` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ipd_simulation_new(
    mode: *const c_char,
    scheme: u8,
    population_size: u32,
    episodes: u64,
    rounds_per_episode: u32,
    seed: u64,
    out: *mut *mut IpdSimulation,
) -> IpdStatus {
    guard(|| {
        if out.is_null() {
            return fail(IpdStatus::NullPointer, "out is null");
        }
        let mode: Mode = match read_str(mode, "mode") {
            Ok(s) => match s.parse() {
                Ok(m) => m,
                Err(e) => return fail(IpdStatus::InvalidArgument, e),
            },
            Err(s) => return s,
        };
        let Some(scheme) = RewardScheme::from_number(scheme) else {
            return fail(IpdStatus::InvalidArgument, format!("scheme must be 1 or 2, got {scheme}"));
        };
        let mut cfg = MechanismConfig::new(mode);
        cfg.scheme = scheme;
        cfg.population_size = population_size as usize;
        cfg.episodes = episodes;
        cfg.rounds_per_episode = rounds_per_episode as usize;
        cfg.seed = seed;
        boxed(cfg, out)
    })
}

/// Create a simulation from a TOML settings document naming a `mode`
/// (same keys as the command-line config file; `preset`, `repeats`, `jobs`
/// and `out` are ignored). `seed` in the document is used directly.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ipd_simulation_from_toml(toml: *const c_char, out: *mut *mut IpdSimulation) -> IpdStatus {
    guard(|| {
        if out.is_null() {
            return fail(IpdStatus::NullPointer, "out is null");
        }
        let text = match read_str(toml, "toml") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let settings = match Settings::from_toml_str(text) {
            Ok(s) => s,
            Err(e) => return fail(IpdStatus::InvalidConfig, e),
        };
        let mode = match settings.parsed_mode() {
            Ok(Some(m)) => m,
            Ok(None) => return fail(IpdStatus::InvalidConfig, "settings must name a mode"),
            Err(e) => return fail(IpdStatus::InvalidConfig, e),
        };
        let mut cfg = MechanismConfig::new(mode);
        if let Err(e) = settings.apply(&mut cfg) {
            return fail(IpdStatus::InvalidConfig, e);
        }
        boxed(cfg, out)
    })
}

/// Release a simulation. Null is ignored.
///
/// # Safety
/// `sim` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ipd_simulation_free(sim: *mut IpdSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Run the next episode and write its metrics to `out`.
/// Returns `IPD_STATUS_FINISHED` once every configured episode has run.
///
/// # Safety
/// `sim` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ipd_simulation_step(sim: *mut IpdSimulation, out: *mut IpdEpisodeMetrics) -> IpdStatus {
    guard(|| {
        if sim.is_null() || out.is_null() {
            return fail(IpdStatus::NullPointer, "sim or out is null");
        }
        let sim = &mut (*sim).sim;
        if sim.is_finished() {
            return fail(IpdStatus::Finished, "all episodes have run");
        }
        match sim.step() {
            Ok(m) => {
                *out = IpdEpisodeMetrics::from(&m);
                IpdStatus::Ok
            }
            Err(e) => fail(sim_status(&e), e.to_string()),
        }
    })
}

/// Episodes completed so far.
///
/// # Safety
/// `sim` must be a valid pointer or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn ipd_simulation_episode(sim: *const IpdSimulation) -> u64 {
    sim.as_ref().map_or(0, |s| s.sim.episode())
}

/// Number of agents, or 0 for null.
///
/// # Safety
/// `sim` must be a valid pointer or null.
#[no_mangle]
pub unsafe extern "C" fn ipd_simulation_population_size(sim: *const IpdSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.sim.config().population_size)
}

/// Copy the current reputations into `buf`, which must hold `len` values.
///
/// # Safety
/// `sim` must be valid and `buf` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn ipd_simulation_reputations(sim: *const IpdSimulation, buf: *mut i64, len: usize) -> IpdStatus {
    guard(|| {
        if sim.is_null() || buf.is_null() {
            return fail(IpdStatus::NullPointer, "sim or buf is null");
        }
        let reps = (*sim).sim.reputations();
        if len < reps.len() {
            return fail(IpdStatus::InvalidArgument, format!("buffer holds {len} values, need {}", reps.len()));
        }
        std::slice::from_raw_parts_mut(buf, reps.len()).copy_from_slice(reps);
        IpdStatus::Ok
    })
}

/// Row and column player payoffs when the row player plays `a` and the
/// column player `b` (see `IpdAction`).
///
/// # Safety
/// `row` and `col` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ipd_payoff(a: i32, b: i32, row: *mut i64, col: *mut i64) -> IpdStatus {
    if row.is_null() || col.is_null() {
        return fail(IpdStatus::NullPointer, "row or col is null");
    }
    let (a, b) = match (action(a, "a"), action(b, "b")) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(s), _) | (_, Err(s)) => return s,
    };
    let (x, y) = game::payoff(a, b);
    *row = x;
    *col = y;
    IpdStatus::Ok
}

/// Reward and reputation effects of one punishment decision (`punish` is
/// 0 or 1) on a target that played `target_action`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ipd_punishment_deltas(
    scheme: u8,
    punish: u8,
    target_action: i32,
    out: *mut IpdPunishmentDeltas,
) -> IpdStatus {
    if out.is_null() {
        return fail(IpdStatus::NullPointer, "out is null");
    }
    let Some(scheme) = RewardScheme::from_number(scheme) else {
        return fail(IpdStatus::InvalidArgument, format!("scheme must be 1 or 2, got {scheme}"));
    };
    let decision = match punish {
        0 => PunishDecision::NoPunish,
        1 => PunishDecision::Punish,
        other => return fail(IpdStatus::InvalidArgument, format!("punish must be 0 or 1, got {other}")),
    };
    let target_action = match action(target_action, "target_action") {
        Ok(a) => a,
        Err(s) => return s,
    };
    let d = game::punishment_deltas(scheme, decision, target_action);
    *out = IpdPunishmentDeltas {
        punisher_reward: d.punisher_reward,
        punished_reward: d.punished_reward,
        punisher_rep: d.punisher_rep,
    };
    IpdStatus::Ok
}
