use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mfc_lbm::config::SimulationConfig;
use mfc_lbm::output::{load_geometry, RunManifest, TIMESERIES_HEADER};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfc-lbm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = "[lattice]\nLx = 20\nLy = 16\n[biofilm]\nk_ata = 8\n[run]\nseed = 3\n";

#[test]
fn out_of_range_value_exits_2_with_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[lattice]\nporosity = 1.5\n");
    for cmd in [&["validate", "--config", &cfg][..], &["run", "--config", &cfg, "--out-dir", tmp.path().to_str().unwrap()]] {
        let out = cli(cmd);
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains("lattice.porosity"));
    }
}

#[test]
fn unknown_key_exits_2_with_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[electro]\nR_extern = 100\n");
    let out = cli(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("electro"));
}

#[test]
fn validate_echo_parses_back() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let out = cli(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let echoed = SimulationConfig::from_toml_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(echoed.lattice.lx, 20);
    assert_eq!(echoed.biofilm.k_ata, 8);
    assert_eq!(echoed, SimulationConfig::from_toml_str(SMALL).unwrap());
}

#[test]
fn one_hour_run_writes_listed_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let out_dir = tmp.path().join("out");
    let out = cli(&["run", "--quiet", "--config", &cfg, "--hours", "1", "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = fs::read_to_string(out_dir.join("outputs.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], TIMESERIES_HEADER);
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0,"));

    for name in ["ux_h0.csv", "uy_h0.csv", "rho_h0.csv", "conc_h0.csv", "cbio_h0.csv", "geom_h0.txt"] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
    let conc = fs::read_to_string(out_dir.join("conc_h0.csv")).unwrap();
    assert_eq!(conc.lines().count(), 16);
    assert!(conc.lines().all(|l| l.split(',').count() == 20));

    let manifest: RunManifest =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    let listed: BTreeSet<String> = manifest.artifacts.iter().cloned().collect();
    let on_disk: BTreeSet<String> = fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json")
        .collect();
    assert_eq!(listed, on_disk);
    assert_eq!(manifest.hours_completed, 1);
    assert_eq!(manifest.seed, 3);
    assert!(manifest.error.is_none());
}

#[test]
fn exported_mask_round_trips_and_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let first = tmp.path().join("first");
    let out = cli(&["run", "--quiet", "--config", &cfg, "--hours", "2", "--out-dir", first.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let mask_path = first.join("geom_h1.txt");
    let text = fs::read_to_string(&mask_path).unwrap();
    let lattice = load_geometry(&mask_path).unwrap();
    assert_eq!(lattice.to_mask(), text);
    assert!(text.contains('B'));

    let second = tmp.path().join("second");
    let out = cli(&[
        "run",
        "--quiet",
        "--config",
        &cfg,
        "--hours",
        "1",
        "--geometry",
        mask_path.to_str().unwrap(),
        "--out-dir",
        second.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn blocked_geometry_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let mask = write(tmp.path(), "blocked.txt", "WWWWWW\nI.#..O\nI.#..O\nWWWWWW\n");
    let cfg = write(tmp.path(), "g.toml", "[lattice]\nLx = 6\nLy = 4\n");
    let out = cli(&["run", "--quiet", "--config", &cfg, "--geometry", &mask, "--out-dir", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_mask_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let mask = write(tmp.path(), "bad.txt", "WWWW\nI.xO\nWWWW\n");
    let out = cli(&["run", "--quiet", "--geometry", &mask, "--out-dir", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
