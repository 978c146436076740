use std::path::Path;
use std::process::{Command, Output};

fn stare(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_stare"));
    cmd.current_dir(dir).args(args).env("RUST_LOG", "warn");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(dir: &Path) {
    let o = stare(dir, &["fixture-gen", "--out", ".", "--train", "60", "--dev", "10", "--large", "0"], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

const SMALL_ENV: [(&str, &str); 5] = [
    ("STARE_ENCODER_D", "16"),
    ("STARE_ENCODER_LAYERS", "2"),
    ("STARE_ENCODER_HEADS", "2"),
    ("STARE_ENCODER_FFN", "32"),
    ("STARE_TRAINING_EPOCHS", "1"),
];

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&stare(dir.path(), &[], &[])), 1);
    assert_eq!(code(&stare(dir.path(), &["frobnicate"], &[])), 1);
    fixture(dir.path());
    let o = stare(dir.path(), &["retrieve", "-c", "config.toml", "--query", "hi", "--format", "xml"], &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unknown format"), "{}", stderr(&o));
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = stare(dir.path(), &["bucket", "-c", "absent.toml"], &[]);
    assert_eq!(code(&o), 2);
    fixture(dir.path());
    let o = stare(dir.path(), &["train", "-c", "config.toml"], &[("STARE_TRAINING_EPOCHS", "5")]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("training.epochs"), "{}", stderr(&o));
    let o = stare(dir.path(), &["bucket", "-c", "config.toml"], &[("STARE_BUCKETING_TAU", "1.5")]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bucketing.tau"), "{}", stderr(&o));
}

#[test]
fn missing_artifacts_and_empty_corpus_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let o = stare(dir.path(), &["retrieve", "-c", "config.toml", "--query", "wake me up"], &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("run `train` first"), "{}", stderr(&o));
    std::fs::write(dir.path().join("train.jsonl"), "").unwrap();
    let o = stare(dir.path(), &["bucket", "-c", "config.toml"], &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("empty corpus"), "{}", stderr(&o));
}

#[test]
fn divergent_training_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    for stage in ["bucket", "mine"] {
        assert_eq!(code(&stare(dir.path(), &[stage, "-c", "config.toml"], &SMALL_ENV)), 0);
    }
    let mut env = SMALL_ENV.to_vec();
    env.push(("STARE_TRAINING_LR", "1e300"));
    let o = stare(dir.path(), &["train", "-c", "config.toml"], &env);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("non-finite loss"));
}

#[test]
fn held_lock_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    std::fs::create_dir_all(dir.path().join("run")).unwrap();
    std::fs::write(dir.path().join("run/.stare.lock"), "1\n").unwrap();
    let o = stare(dir.path(), &["bucket", "-c", "config.toml"], &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("locked"), "{}", stderr(&o));
}

#[test]
fn ted_reports_distance_and_similarity() {
    let dir = tempfile::tempdir().unwrap();
    let o = stare(dir.path(), &["ted", "[IN:A [SL:X a ] ]", "[IN:A ]"], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["ted"], 2.0);
    assert!((v["sim_struct"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    let o = stare(dir.path(), &["ted", "--anonymize", "[IN:A [SL:X a ] ]", "[IN:A [SL:X b ] ]"], &[]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["ted"], 0.0);
    let o = stare(dir.path(), &["ted", "[IN:A", "[IN:A ]"], &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn full_run_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let env = [SMALL_ENV.as_slice(), &[("STARE_MLI_LAMBDAS", "[1.0]"), ("STARE_MLI_PROPERTIES", "[\"PT\"]")]].concat();
    for stage in ["bucket", "mine", "train", "mli", "eval"] {
        let o = stare(dir.path(), &[stage, "-c", "config.toml", "--out", "alt"], &env);
        assert_eq!(code(&o), 0, "{stage}: {}", stderr(&o));
    }
    let eval: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("alt/eval.json")).unwrap()).unwrap();
    assert_eq!(eval["dev_queries"], 10);
    let o = stare(dir.path(), &["retrieve", "-c", "config.toml", "--out", "alt", "--query", "wake me up", "--k", "2", "--format", "prompt"], &env);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("Below are examples"));
    assert_eq!(text.matches("\nParse: ").count(), 2);
    assert!(text.trim_end().ends_with("User: wake me up\nParse:"));
}
