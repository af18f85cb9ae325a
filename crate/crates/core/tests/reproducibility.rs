//! Same seed, same bytes; different seed, different run.

use std::fs;
use std::path::Path;

use ipdsim::experiment::io::write_raw_csv;
use ipdsim::sim::{MechanismConfig, Mode, Simulation};

fn raw_bytes(cfg: &MechanismConfig, dir: &Path, name: &str) -> Vec<u8> {
    let rows = Simulation::new(cfg.clone()).unwrap().run().unwrap();
    let path = dir.join(name);
    write_raw_csv(&path, cfg, 0, &rows).unwrap();
    fs::read(path).unwrap()
}

#[test]
fn identical_seeds_give_identical_raw_files() {
    let tmp = tempfile::tempdir().unwrap();
    for mode in [Mode::DpS, Mode::Tppdp, Mode::None] {
        let mut cfg = MechanismConfig::new(mode);
        cfg.episodes = 200;
        cfg.seed = 11;
        let a = raw_bytes(&cfg, tmp.path(), "a.csv");
        let b = raw_bytes(&cfg, tmp.path(), "b.csv");
        assert_eq!(a, b, "{mode}");
        cfg.seed = 12;
        let c = raw_bytes(&cfg, tmp.path(), "c.csv");
        assert_ne!(a, c, "{mode}");
    }
}

#[test]
fn stepping_matches_a_full_run() {
    let mut cfg = MechanismConfig::new(Mode::TppS);
    cfg.episodes = 30;
    cfg.seed = 4;
    let full = Simulation::new(cfg.clone()).unwrap().run().unwrap();
    let mut sim = Simulation::new(cfg).unwrap();
    let mut stepped = Vec::new();
    while !sim.is_finished() {
        stepped.push(sim.step().unwrap());
    }
    assert_eq!(full, stepped);
}
