use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shapeopt"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .output()
        .unwrap()
}

fn artifact(dir: &Path, ext: &str) -> PathBuf {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == ext))
        .unwrap_or_else(|| panic!("no .{ext} in {}", dir.display()))
}

fn json(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(artifact(dir, "json")).unwrap()).unwrap()
}

#[test]
fn missing_config_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["solve", "--config", "no-such-file.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-such-file.toml"));
}

#[test]
fn unknown_flag_rejected() {
    let out = bin().args(["stability", "--frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_config_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[grid]\nn = \"many\"\n").unwrap();
    let out = run(&["solve", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml"));
}

#[test]
fn help_exits_cleanly() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn ball_with_unit_source_is_marginal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("ball_g1.toml");
    let out = run(&["stability", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(dir.path());
    assert_eq!(v["result"]["verdict"], "marginally-stable");
    assert!(v["result"]["omega"][0].as_f64().unwrap().abs() < 1e-6);
    let spectrum = fs::read_to_string(artifact(dir.path(), "csv")).unwrap();
    assert_eq!(spectrum.lines().count(), 1 + 20);
}

#[test]
fn cone_source_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("stable_cone.toml");
    let out = run(
        &["stability", "--config", cfg.to_str().unwrap(), "--modes", "10"],
        dir.path(),
    );
    assert!(out.status.success());
    let v = json(dir.path());
    assert_eq!(v["result"]["verdict"], "stable");
    assert_eq!(v["config"]["radial"]["modes"], 10);
    let w1 = v["result"]["omega"][0].as_f64().unwrap();
    assert!((w1 - 2.0 * std::f64::consts::PI / 9.0).abs() < 1e-3);
}

#[test]
fn every_artifact_is_stamped() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("solve_disk.toml");
    for cmd in ["solve", "instability-demo"] {
        let sub = dir.path().join(cmd);
        let out = run(&[cmd, "--config", cfg.to_str().unwrap(), "--grid", "32"], &sub);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let v = json(&sub);
        assert_eq!(v["tool_version"], env!("CARGO_PKG_VERSION"));
        let hash = v["config_hash"].as_str().unwrap();
        assert_eq!(hash.len(), 16);
        let name = artifact(&sub, "json");
        assert!(name.to_str().unwrap().contains(hash));
    }
}

#[test]
fn same_seed_same_bytes() {
    let cfg = config("optimize_radial.toml");
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for d in &dirs {
        let out = run(
            &["optimize", "--config", cfg.to_str().unwrap(), "--seed", "11", "--grid", "32"],
            d.path(),
        );
        assert!(out.status.success());
    }
    for ext in ["json", "csv", "dat"] {
        let a = fs::read(artifact(dirs[0].path(), ext)).unwrap();
        let b = fs::read(artifact(dirs[1].path(), ext)).unwrap();
        assert_eq!(a, b, ".{ext} differs");
    }
}

#[test]
fn overrides_change_the_hash() {
    let cfg = config("ball_g1.toml");
    let hashes: Vec<String> = ["4", "6"]
        .iter()
        .map(|k| {
            let d = tempfile::tempdir().unwrap();
            let out = run(
                &["stability", "--config", cfg.to_str().unwrap(), "--modes", "8", "--seed", k],
                d.path(),
            );
            assert!(out.status.success());
            json(d.path())["config_hash"].as_str().unwrap().to_string()
        })
        .collect();
    assert_ne!(hashes[0], hashes[1]);
}
