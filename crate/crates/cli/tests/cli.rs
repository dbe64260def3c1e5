use std::collections::BTreeMap;
use std::path::Path;

use achronal_cli::{main_with_args, Outcome};

fn run(cmd: &str, out: &Path, extra: &[&str]) -> Outcome {
    let mut args = vec!["achronal", cmd, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    main_with_args(args)
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.file_name().unwrap() != "timings.json" && p.extension().is_none_or(|e| e != "toml"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn unknown_keys_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mass = 1.0\nkernal = \"basic:r=1.5\"\n");
    assert_eq!(run("kernel-pd", dir.path(), &["--config", &cfg]), Outcome::ConfigError);
}

#[test]
fn invalid_values_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "kernel = \"basic:r=-1\"\n");
    assert_eq!(run("kernel-pd", dir.path(), &["--config", &cfg]), Outcome::ConfigError);
    let missing = dir.path().join("absent.toml");
    assert_eq!(run("kernel-pd", dir.path(), &["--config", missing.to_str().unwrap()]), Outcome::ConfigError);
    assert_eq!(run("kernel-pd", dir.path(), &["--tolerance-scale=-1"]), Outcome::ConfigError);
    assert_eq!(main_with_args(["achronal", "no-such-command"]), Outcome::ConfigError);
}

#[test]
fn zero_packet_is_rejected_by_normalize() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "packet = { kind = \"zero\" }\n");
    assert_eq!(run("normalize", dir.path(), &["--config", &cfg]), Outcome::ConfigError);
}

#[test]
fn zero_packet_dumps_a_zero_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "packet = { kind = \"zero\" }\n[dump]\ntimes = [0.0, 0.5]\nn = 4\n");
    assert_eq!(run("field-dump", dir.path(), &["--config", &cfg]), Outcome::Passed);
    for i in 0..2 {
        let slice = achronal::io::load_slice(&dir.path().join(format!("field_{i}.achr"))).unwrap();
        assert_eq!(slice.window.len(), 64);
        assert!(slice.values.iter().all(|v| *v == [0.0; 4]));
    }
}

#[test]
fn repeated_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("kernel-pd", dir.path(), &["--seed", "3"]), Outcome::Passed);
    let first = snapshot(dir.path());
    assert!(first.contains_key("kernel-pd.json") && first.contains_key("kernel-pd.csv"));
    assert_eq!(run("kernel-pd", dir.path(), &["--seed", "3"]), Outcome::Passed);
    assert_eq!(snapshot(dir.path()), first);
    assert!(dir.path().join("timings.json").exists());
}

#[test]
fn manifest_records_hash_and_files() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("kernel-pd", dir.path(), &[]), Outcome::Passed);
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("kernel-pd.json")).unwrap()).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert_eq!(report["config_hash"].as_str().unwrap(), hash);
    let entry = &manifest["commands"]["kernel-pd"];
    assert_eq!(entry["passed"], true);
    let files: Vec<&str> = entry["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap()).collect();
    assert!(files.contains(&"kernel-pd.json"));
    let resolved = std::fs::read_to_string(dir.path().join("resolved_config.json")).unwrap();
    assert!(resolved.contains("\"kernel\": \"basic:r=1.5\""));
}

#[test]
fn tiny_tolerances_fail_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // Direct and fast currents differ at ~1e-10, far above the scaled bound.
    let cfg = write_config(dir.path(), "[dump]\nn = 4\n");
    assert_eq!(run("field-dump", dir.path(), &["--config", &cfg, "--tolerance-scale", "1e-30"]), Outcome::Failed);
}

#[test]
fn example_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example.toml");
    let cfg = achronal_cli::ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.surfaces.len(), 2);
    assert_eq!(cfg.group_elements().len(), 2);
    assert_eq!(cfg.packet, achronal_cli::ExperimentConfig::default().packet);
}
