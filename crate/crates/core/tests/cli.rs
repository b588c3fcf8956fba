//! Black-box checks of the command-line interface: exit codes, diagnostics,
//! config-file handling, and output-directory locking.

use std::path::Path;
use std::process::{Command, Output};

fn adlens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adlens")).args(args).output().unwrap()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn synth_corpus(dir: &Path) -> String {
    let out = adlens(&[
        "synth",
        "--out",
        dir.to_str().unwrap(),
        "--n",
        "20",
        "--ad-fraction",
        "0.5",
        "--seed",
        "1",
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    dir.join("synth").to_str().unwrap().to_string()
}

#[test]
fn missing_required_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path());
    let out = adlens(&["train", "--corpus", &corpus, "--out", dir.path().join("t").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("arch"));
}

#[test]
fn unknown_config_key_is_rejected_with_exit_code_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "n=5\nad_fractoin=0.5\n").unwrap();
    let out = adlens(&[
        "synth",
        "--out",
        dir.path().to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("ad_fractoin"));
}

#[test]
fn config_file_values_apply_and_flags_override_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "n=7\nseed=9\n").unwrap();
    let out = adlens(&[
        "synth",
        "--out",
        dir.path().to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--n",
        "4",
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let n_files = std::fs::read_dir(dir.path().join("synth"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "cha"))
        .count();
    assert_eq!(n_files, 4);
    let resolved =
        std::fs::read_to_string(dir.path().join("synth").join("config.resolved")).unwrap();
    assert!(resolved.contains("n=4\n"));
    assert!(resolved.contains("seed=9\n"));
}

#[test]
fn malformed_config_line_reports_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "# comment\nnot a pair\n").unwrap();
    let out = adlens(&[
        "synth",
        "--out",
        dir.path().to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_of(&out);
    assert!(err.contains("bad.cfg:2"), "{err}");
}

#[test]
fn locked_output_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let synth_dir = dir.path().join("synth");
    std::fs::create_dir_all(&synth_dir).unwrap();
    std::fs::write(synth_dir.join(".lock"), "").unwrap();
    let out = adlens(&["synth", "--out", dir.path().to_str().unwrap(), "--n", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("locked"));
}

#[test]
fn missing_corpus_directory_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = adlens(&["ingest", "--corpus", dir.path().join("nope").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_architecture_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path());
    let out = adlens(&[
        "train",
        "--corpus",
        &corpus,
        "--out",
        dir.path().join("t").to_str().unwrap(),
        "--arch",
        "transformer",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("transformer"));
}

#[test]
fn eval_rejects_an_unknown_subset() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path());
    let train_out = dir.path().join("t");
    let out = adlens(&[
        "train",
        "--corpus",
        &corpus,
        "--out",
        train_out.to_str().unwrap(),
        "--arch",
        "cnn",
        "--epochs",
        "1",
        "--patience",
        "0",
        "--embed-dim",
        "8",
        "--filters",
        "4",
        "--filter-sizes",
        "2",
        "--vocab-max",
        "200",
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let ck = train_out.join("train").join("checkpoint");
    let out = adlens(&[
        "eval",
        "--corpus",
        &corpus,
        "--checkpoint",
        ck.to_str().unwrap(),
        "--out",
        dir.path().join("e").to_str().unwrap(),
        "--subset",
        "validation",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("validation"));
}

#[test]
fn ingest_prints_corpus_composition() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path());
    let out = adlens(&["ingest", "--corpus", &corpus]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("transcripts=20"));
    assert!(text.contains("coverage=1.000"));
}
