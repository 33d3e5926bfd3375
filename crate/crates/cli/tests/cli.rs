use std::path::Path;
use std::process::{Command, Output};

use textile_core::pipeline::{files, RunManifest};

fn textile(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_textile"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn chained_subcommands_match_the_pipeline() {
    let chain = tempfile::tempdir().unwrap();
    let whole = tempfile::tempdir().unwrap();
    for cmd in [
        "generate",
        "voxelize",
        "render",
        "segment",
        "degrade",
        "reconstruct",
        "validate",
    ] {
        let o = textile(chain.path(), &[cmd, "--seed", "3"]);
        assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
    }
    let o = textile(whole.path(), &["pipeline", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for name in [
        files::MODEL,
        files::LABELS,
        files::PSEUDO_CT,
        files::DEGRADED,
        files::YARNS,
        files::VOLUME,
        files::SURFACE,
        files::REPORT,
        files::HISTOGRAM,
    ] {
        let a = std::fs::read(chain.path().join(name)).unwrap();
        let b = std::fs::read(whole.path().join(name)).unwrap();
        assert!(a == b, "{name} differs between chained and full runs");
    }
    let text = std::fs::read_to_string(whole.path().join(files::MANIFEST)).unwrap();
    let m = RunManifest::from_json(&text, "manifest.json").unwrap();
    assert_eq!(m.config.seed, 3);
    assert!(m.verify(whole.path()).unwrap().is_empty());
    assert!(!m.files.iter().any(|f| f.path == files::MANIFEST));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[voxelize]\nvoxel_size_um = 0.0\n").unwrap();
    let o = textile(dir.path(), &["generate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("voxel_size_um"));

    std::fs::write(&cfg, "no_such_key = true\n").unwrap();
    let o = textile(dir.path(), &["generate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bad.toml"));

    let o = textile(dir.path(), &["compact"]);
    assert_eq!(code(&o), 2, "compact without a final thickness");
}

#[test]
fn missing_and_malformed_inputs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = textile(dir.path(), &["voxelize"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("model.json"));

    std::fs::write(dir.path().join(files::MODEL), "{\"schema\": 1}").unwrap();
    let o = textile(dir.path(), &["voxelize"]);
    assert_eq!(code(&o), 3);
    let msg = stderr(&o);
    assert!(
        msg.contains("model.json") && msg.contains("unit_um"),
        "{msg}"
    );
}

#[test]
fn stage_failures_exit_10_plus_stage() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&textile(dir.path(), &["generate"])), 0);
    let o = textile(dir.path(), &["compact", "--h-final", "1000"]);
    assert_eq!(code(&o), 12, "{}", stderr(&o));

    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, "[voxelize]\nbudget = 1000\n").unwrap();
    let o = textile(dir.path(), &["voxelize", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 13, "{}", stderr(&o));
}

#[test]
fn compaction_writes_one_model_per_step() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&textile(dir.path(), &["generate"])), 0);
    let o = textile(dir.path(), &["compact", "--h-final", "8", "--steps", "12"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for k in 1..=12 {
        assert!(dir.path().join(format!("model_{k:02}.json")).exists());
    }
}

#[test]
fn dimension_check_writes_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&textile(dir.path(), &["generate"])), 0);
    let o = textile(dir.path(), &["voxelize", "--dimension-check"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(!dir.path().join(files::LABELS).exists());
    let header: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("labels.json")).unwrap())
            .unwrap();
    let dims: Vec<u64> = header["dims"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(dims.len(), 3);
    assert!(dims.iter().all(|&d| d > 0));
}
