//! End-to-end runs of the `ipdsim` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ipdsim::experiment::io::{AGGREGATE_HEADER, RAW_HEADER};
use ipdsim::experiment::PRESET_NAMES;

fn ipdsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ipdsim"))
        .args(args)
        .env_remove("IPDSIM_OUT")
        .output()
        .expect("running ipdsim")
}

fn files_in(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn presets_list_names_every_preset() {
    let out = ipdsim(&["presets", "list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in PRESET_NAMES {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn every_preset_runs_at_reduced_scale() {
    let tmp = tempfile::tempdir().unwrap();
    for name in PRESET_NAMES {
        let dir = tmp.path().join(name);
        let out = ipdsim(&[
            "run", "--preset", name, "--episodes", "2", "--rounds", "2", "--repeats", "2", "--jobs", "1", "--out",
            path_str(&dir),
        ]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let raw = files_in(&dir.join("raw"));
        let agg = files_in(&dir.join("aggregate"));
        assert_eq!(raw.len(), 2 * agg.len(), "{name}");
        assert!(dir.join("manifest.json").is_file());
    }
}

#[test]
fn main_six_output_tree() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("m6");
    let out = ipdsim(&["run", "--preset", "main-six", "--episodes", "200", "--repeats", "3", "--seed", "7", "--out", path_str(&dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let raw = files_in(&dir.join("raw"));
    let agg = files_in(&dir.join("aggregate"));
    assert_eq!(raw.len(), 18);
    assert_eq!(agg.len(), 6);
    for f in &raw {
        let text = fs::read_to_string(f).unwrap();
        assert_eq!(text.lines().next().unwrap(), RAW_HEADER);
        assert_eq!(text.lines().count(), 201);
    }
    for f in &agg {
        let text = fs::read_to_string(f).unwrap();
        assert_eq!(text.lines().next().unwrap(), AGGREGATE_HEADER);
        assert_eq!(text.lines().count(), 1 + 200 * 8);
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 7);
    assert_eq!(manifest["seeds"].as_array().unwrap().len(), 3);
    assert!(manifest["finished_at"].is_string());

    // rebuilding aggregates from the raw files reproduces them exactly
    let before: Vec<Vec<u8>> = agg.iter().map(|f| fs::read(f).unwrap()).collect();
    for f in &agg {
        fs::remove_file(f).unwrap();
    }
    let out = ipdsim(&["aggregate", path_str(&dir)]);
    assert!(out.status.success());
    let after: Vec<Vec<u8>> = agg.iter().map(|f| fs::read(f).unwrap()).collect();
    assert_eq!(before, after);

    // a missing repeat is reported with exit code 4
    fs::remove_file(&raw[4]).unwrap();
    let out = ipdsim(&["aggregate", path_str(&dir)]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(raw[4].file_name().unwrap().to_str().unwrap()), "{err}");
}

#[test]
fn manifest_echoes_the_chosen_scheme() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("dp");
    let out = ipdsim(&["run", "--mode", "DP", "--scheme", "1", "--episodes", "3", "--repeats", "1", "--out", path_str(&dir)]);
    assert!(out.status.success());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let v = &manifest["variants"][0];
    assert_eq!(v["config"]["scheme"], "Scheme1");
    assert_eq!(v["scheme_rules"]["just_bonus"], 7);
    assert_eq!(v["scheme_rules"]["punisher_cost"], 10);
    assert_eq!(v["scheme_rules"]["punished_penalty"], 3);
    // one repeat cannot carry a confidence band, so no aggregate is written
    assert!(files_in(&dir.join("aggregate")).is_empty());
}

#[test]
fn rerun_from_manifest_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("a");
    let out = ipdsim(&["run", "--mode", "TPPDP-S", "--episodes", "50", "--repeats", "2", "--seed", "3", "--out", path_str(&first)]);
    assert!(out.status.success());
    let second = tmp.path().join("b");
    let manifest = first.join("manifest.json");
    let out = ipdsim(&["run", "--manifest", path_str(&manifest), "--out", path_str(&second)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for sub in ["raw", "aggregate"] {
        let a = files_in(&first.join(sub));
        let b = files_in(&second.join(sub));
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
        }
    }
    let out = ipdsim(&["run", "--manifest", path_str(&manifest), "--episodes", "9", "--out", path_str(&second)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.toml");
    fs::write(&cfg, "mode = \"TPP\"\nepisodes = 40\nrepeats = 2\npop_size = 6\n[models.punish]\nlearning_rate = 0.01\n").unwrap();
    let dir = tmp.path().join("out");
    let out = ipdsim(&["run", "--config", path_str(&cfg), "--episodes", "4", "--out", path_str(&dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let c = &manifest["variants"][0]["config"];
    assert_eq!(c["episodes"], 4);
    assert_eq!(c["population_size"], 6);
    assert_eq!(c["models"]["punish"]["trainer"]["learning_rate"], 0.01);
    let raw = fs::read_to_string(dir.join("raw/TPP_r1.csv")).unwrap();
    assert_eq!(raw.lines().count(), 5);
    assert!(raw.lines().nth(1).unwrap().starts_with("0,1,TPP,2,6,"));
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ipdsim"))
        .args(["run", "--mode", "NONE", "--episodes", "2", "--repeats", "1"])
        .env("IPDSIM_OUT", tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("NONE/manifest.json").is_file());
}

#[test]
fn invalid_configurations_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = path_str(tmp.path());
    for args in [
        vec!["run", "--mode", "TPP", "--pop-size", "3", "--out", o],
        vec!["run", "--mode", "DP", "--scheme", "3", "--out", o],
        vec!["run", "--mode", "XYZ", "--out", o],
        vec!["run", "--preset", "nope", "--out", o],
        vec!["run", "--preset", "main-six", "--mode", "DP", "--out", o],
        vec!["run", "--out", o],
        vec!["run", "--mode", "DP", "--rep-sources", "gossip", "--out", o],
    ] {
        let out = ipdsim(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "mode = \"DP\"\nepisods = 3\n").unwrap();
    let out = ipdsim(&["run", "--config", path_str(&bad), "--out", o]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diverging_run_exits_with_code_3_and_leaves_a_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("blowup.toml");
    fs::write(
        &cfg,
        "mode = \"DP\"\nepisodes = 20\nrepeats = 1\n[models.play]\nlearning_rate = 1e300\nmax_grad_norm = 0\nbatch_size = 4\n",
    )
    .unwrap();
    let dir = tmp.path().join("out");
    let out = ipdsim(&["run", "--config", path_str(&cfg), "--out", path_str(&dir)]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    let snapshot = dir.join("failures/DP_r0.snapshot.json");
    assert!(err.contains(path_str(&snapshot)), "{err}");
    let snap: serde_json::Value = serde_json::from_str(&fs::read_to_string(&snapshot).unwrap()).unwrap();
    assert_eq!(snap["agents"].as_array().unwrap().len(), 5);
}

#[test]
fn search_smoke_test_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let dir = tmp.path().join(name);
        let out = ipdsim(&[
            "search", "--trials", "2", "--episodes", "10", "--repeats", "2", "--seed", "5", "--out", path_str(&dir),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(dir.join("search.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    let mut rdr = csv::Reader::from_reader(a.as_bytes());
    let header = rdr.headers().unwrap().clone();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let scores: Vec<f64> = rows.iter().map(|r| r[col("score")].parse().unwrap()).collect();
    assert!(scores[0] >= scores[1]);
    assert_eq!(&rows[0][col("rank")], "0");
    for r in &rows {
        for m in ["select", "play", "punish"] {
            let g: f64 = r[col(&format!("{m}_gamma"))].parse().unwrap();
            assert!([0.8, 0.9, 0.99].contains(&g));
        }
    }
}
