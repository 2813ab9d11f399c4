use std::path::Path;
use std::process::Command;

fn cobras(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_cobras"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .output()
        .expect("binary runs");
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().expect("exit code"), text)
}

#[test]
fn reproduce_toy_succeeds_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = cobras(dir.path(), &["reproduce-toy", "--preset", "toy"]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("cobras"));
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("config.toml").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "dt = -1.0\n").unwrap();
    let (code, _) = cobras(dir.path(), &["reproduce-toy", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    let missing = dir.path().join("missing.toml");
    let (code, _) = cobras(dir.path(), &["sample", "--config", missing.to_str().unwrap()]);
    assert_eq!(code, 2);
    // The toy preset has no learned-model section.
    let (code, _) = cobras(dir.path(), &["learn", "--preset", "toy"]);
    assert_eq!(code, 2);
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = cobras_bench::ExperimentConfig { ranks: vec![5], ..cobras_bench::ExperimentConfig::toy_default() };
    let path = dir.path().join("rank.toml");
    std::fs::write(&path, cfg.to_toml_string()).unwrap();
    let (code, text) = cobras(dir.path(), &["pod", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 3, "{text}");
}

#[test]
fn staged_commands_chain_through_saved_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    for stage in ["simulate", "sample", "cobras", "pod", "bpod", "rom", "evaluate"] {
        let (code, text) = cobras(dir.path(), &[stage, "--preset", "toy", "--test-seed", "5"]);
        assert_eq!(code, 0, "{stage}: {text}");
    }
    assert!(dir.path().join("samples").join("gradients.csv").exists());
    assert!(dir.path().join("evaluation").join("manifest.json").exists());
}
