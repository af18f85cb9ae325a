use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ipdsim::sim::{MechanismConfig, Mode, Simulation};
use ipdsim_ffi::*;

fn last_error() -> String {
    let p = ipd_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn new_sim(mode: &str, pop: u32, episodes: u64, seed: u64) -> Result<*mut IpdSimulation, IpdStatus> {
    let mode = CString::new(mode).unwrap();
    let mut out = ptr::null_mut();
    let s = unsafe { ipd_simulation_new(mode.as_ptr(), 2, pop, episodes, 10, seed, &mut out) };
    if s == IpdStatus::Ok {
        Ok(out)
    } else {
        Err(s)
    }
}

fn zero_metrics() -> IpdEpisodeMetrics {
    IpdEpisodeMetrics {
        episode: 0,
        cooperation_pct: 0.0,
        cooperator_selection_pct: 0.0,
        punishment_pct: 0.0,
        selected_punisher_pct: 0.0,
        just_ratio_pct: 0.0,
        just_punisher_selection_pct: 0.0,
        societal_reward: 0.0,
        societal_reputation: 0.0,
    }
}

#[test]
fn payoff_table() {
    let (mut r, mut c) = (0i64, 0i64);
    let cases = [(0, 0, 3, 3), (0, 1, 0, 4), (1, 0, 4, 0), (1, 1, 1, 1)];
    for (a, b, er, ec) in cases {
        assert_eq!(unsafe { ipd_payoff(a, b, &mut r, &mut c) }, IpdStatus::Ok);
        assert_eq!((r, c), (er, ec));
    }
    assert_eq!(unsafe { ipd_payoff(2, 0, &mut r, &mut c) }, IpdStatus::InvalidArgument);
    assert!(last_error().contains("must be 0 or 1"));
    assert_eq!(unsafe { ipd_payoff(0, 0, ptr::null_mut(), &mut c) }, IpdStatus::NullPointer);
}

#[test]
fn punishment_constants() {
    let mut d = IpdPunishmentDeltas::default();
    let defect = IpdAction::Defect as i32;
    let cooperate = IpdAction::Cooperate as i32;
    unsafe { ipd_punishment_deltas(1, 1, defect, &mut d) };
    assert_eq!(d.punisher_reward, -3);
    assert_eq!((d.punished_reward, d.punisher_rep), (-3, 2));
    unsafe { ipd_punishment_deltas(2, 1, defect, &mut d) };
    assert_eq!(d.punisher_reward, 2);
    unsafe { ipd_punishment_deltas(2, 1, cooperate, &mut d) };
    assert_eq!((d.punisher_reward, d.punished_reward, d.punisher_rep), (-10, -3, -3));
    unsafe { ipd_punishment_deltas(2, 0, defect, &mut d) };
    assert_eq!(d, IpdPunishmentDeltas::default());
    assert_eq!(unsafe { ipd_punishment_deltas(3, 1, defect, &mut d) }, IpdStatus::InvalidArgument);
    assert_eq!(unsafe { ipd_punishment_deltas(2, 7, defect, &mut d) }, IpdStatus::InvalidArgument);
}

#[test]
fn stepping_matches_the_rust_engine() {
    let sim = new_sim("TPPDP-S", 5, 4, 21).unwrap();
    let mut cfg = MechanismConfig::new(Mode::TppdpS);
    cfg.episodes = 4;
    cfg.seed = 21;
    let expected = Simulation::new(cfg).unwrap().run().unwrap();
    let mut m = zero_metrics();
    for row in &expected {
        assert_eq!(unsafe { ipd_simulation_step(sim, &mut m) }, IpdStatus::Ok);
        assert_eq!(m.episode, row.episode);
        assert_eq!(m.cooperation_pct, row.cooperation_pct);
        assert_eq!(m.societal_reward, row.societal_reward);
        assert_eq!(m.just_ratio_pct.is_nan(), row.just_ratio_pct.is_none());
    }
    assert_eq!(unsafe { ipd_simulation_episode(sim) }, 4);
    assert_eq!(unsafe { ipd_simulation_step(sim, &mut m) }, IpdStatus::Finished);

    let mut reps = [0i64; 5];
    assert_eq!(unsafe { ipd_simulation_reputations(sim, reps.as_mut_ptr(), 5) }, IpdStatus::Ok);
    assert_eq!(reps.iter().sum::<i64>() as f64, m.societal_reputation);
    assert_eq!(unsafe { ipd_simulation_reputations(sim, reps.as_mut_ptr(), 4) }, IpdStatus::InvalidArgument);
    unsafe { ipd_simulation_free(sim) };
}

#[test]
fn first_episode_has_no_selection_metrics() {
    let sim = new_sim("DP-S", 5, 2, 0).unwrap();
    let mut m = zero_metrics();
    unsafe { ipd_simulation_step(sim, &mut m) };
    assert!(m.cooperator_selection_pct.is_nan());
    assert!(m.cooperation_pct >= 0.0 && m.cooperation_pct <= 100.0);
    unsafe { ipd_simulation_free(sim) };
}

#[test]
fn bad_configs_report_errors() {
    assert_eq!(new_sim("TPP", 3, 10, 0).unwrap_err(), IpdStatus::InvalidConfig);
    assert!(last_error().contains("at least 4 agents"));
    assert_eq!(new_sim("XYZ", 5, 10, 0).unwrap_err(), IpdStatus::InvalidArgument);
    let mode = CString::new("DP").unwrap();
    let s = unsafe { ipd_simulation_new(mode.as_ptr(), 2, 5, 10, 10, 0, ptr::null_mut()) };
    assert_eq!(s, IpdStatus::NullPointer);
    unsafe { ipd_simulation_free(ptr::null_mut()) };
    assert_eq!(unsafe { ipd_simulation_episode(ptr::null()) }, 0);
}

#[test]
fn toml_constructor() {
    let text = CString::new("mode = \"TPP\"\nscheme = 1\nepisodes = 3\npop_size = 6\nseed = 4\n").unwrap();
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { ipd_simulation_from_toml(text.as_ptr(), &mut sim) }, IpdStatus::Ok);
    assert_eq!(unsafe { ipd_simulation_population_size(sim) }, 6);
    let mut m = zero_metrics();
    let mut steps = 0;
    while unsafe { ipd_simulation_step(sim, &mut m) } == IpdStatus::Ok {
        steps += 1;
    }
    assert_eq!(steps, 3);
    unsafe { ipd_simulation_free(sim) };

    let bad = CString::new("episodes = 3\n").unwrap();
    assert_eq!(unsafe { ipd_simulation_from_toml(bad.as_ptr(), &mut sim) }, IpdStatus::InvalidConfig);
    let typo = CString::new("mode = \"DP\"\nepisods = 3\n").unwrap();
    assert_eq!(unsafe { ipd_simulation_from_toml(typo.as_ptr(), &mut sim) }, IpdStatus::InvalidConfig);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(ipd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles_as_c() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/ipdsim.h")).unwrap();
    for name in [
        "ipd_simulation_new",
        "ipd_simulation_from_toml",
        "ipd_simulation_step",
        "ipd_simulation_free",
        "ipd_last_error_message",
        "ipd_payoff",
        "ipd_punishment_deltas",
        "typedef struct IpdSimulation IpdSimulation",
        "IPD_STATUS_NUMERICAL = 4",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
    let Ok(cc) = which_cc() else { return };
    let src = std::env::temp_dir().join(format!("ipdsim_header_check_{}.c", std::process::id()));
    std::fs::write(
        &src,
        "#include \"ipdsim.h\"\nint main(void) { IpdSimulation *s = 0; IpdEpisodeMetrics m;\n\
         if (ipd_simulation_new(\"DP\", 2, 5, 1, 10, 0, &s) != IPD_STATUS_OK) return 1;\n\
         ipd_simulation_step(s, &m); ipd_simulation_free(s); return 0; }\n",
    )
    .unwrap();
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .status()
        .unwrap();
    let _ = std::fs::remove_file(&src);
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc);
        }
    }
    Err(())
}
