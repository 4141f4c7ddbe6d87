//! End-to-end behaviour of the dirac-lab binary.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dirac-lab"))
}

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

#[test]
fn unknown_experiment_is_usage_error() {
    let out = bin().arg("no-such-experiment").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_2_and_names_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "dirac.cutoff = 2\nconnection.modes = [[3, 0, 0.1, 0.0, 0.0, 0.0]]\n").unwrap();
    let out = bin().args(["kannai", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("dirac.cutoff") && err.contains("connection.modes"), "{err}");
}

#[test]
fn strict_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.toml");
    std::fs::write(&cfg, "[fractional]\nalpah = 0.3\n").unwrap();
    let lenient = bin().args(["clifford-axioms", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("a")).output().unwrap();
    assert_eq!(lenient.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&lenient.stderr).contains("fractional.alpah"));
    let strict = bin().args(["clifford-axioms", "--strict", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(strict.status.code(), Some(2));
}

fn run(experiment: &str, out: &Path, seed: &str) {
    let status = bin()
        .arg(experiment)
        .arg("--config")
        .arg(configs().join(format!("{experiment}.toml")))
        .args(["--strict", "--seed", seed, "--out"])
        .arg(out)
        .status()
        .unwrap();
    assert!(status.success(), "{experiment} failed");
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn same_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    for experiment in ["fractional-roundtrip", "wave-engine"] {
        let (a, b) = (dir.path().join(format!("{experiment}-a")), dir.path().join(format!("{experiment}-b")));
        run(experiment, &a, "7");
        run(experiment, &b, "7");
        assert_eq!(files(&a), files(&b), "{experiment}");
    }
}

#[test]
fn verdict_json_has_stable_fields() {
    let dir = tempfile::tempdir().unwrap();
    run("kannai", dir.path(), "1");
    let text = std::fs::read_to_string(dir.path().join("verdict.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let records = v.as_array().unwrap();
    assert!(!records.is_empty());
    for rec in records {
        assert!(!rec["anchor"].as_str().unwrap().is_empty());
    }
    // Field order as written in each record.
    let fields = ["experiment", "check", "tolerance", "measured", "pass", "comparison", "anchor"];
    for chunk in text.split("\"experiment\"").skip(1) {
        let pos: Vec<usize> = fields[1..].iter().map(|f| chunk.find(&format!("\"{f}\"")).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{chunk}");
    }
}
