//! End-to-end exercises of the command front end: exit codes, config
//! diagnostics, override precedence, and output determinism.

use nftlab::cli::run;
use nftlab::config::RunConfig;
use nftlab::Error;
use std::path::Path;

const BASE_CFG: &str = "[task]\n\
                        vocab_size = 3\n\
                        answer_len = 2\n\
                        num_questions = 4\n\
                        rule = modsum\n\
                        seed = 11\n\
                        \n\
                        [trainer]\n\
                        iterations = 10\n\
                        answers_per_question = 8\n\
                        num_minibatches = 2\n\
                        seed = 5\n";

fn write_cfg(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn unknown_config_key_exits_2_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad = format!("{BASE_CFG}\n[objective]\nepsilonn = 1.0\n");
    let cfg = write_cfg(dir.path(), "bad.cfg", &bad);
    assert_eq!(run(["nftlab", "train", cfg.to_str().unwrap()]), 2);
    // the diagnostic itself names the offending key and line
    let err = RunConfig::parse(&bad).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("epsilonn"), "diagnostic was {msg:?}");
    assert!(matches!(err, Error::Config { line: Some(_), .. }));
}

#[test]
fn missing_config_file_exits_2() {
    assert_eq!(run(["nftlab", "train", "/nonexistent/nowhere.cfg"]), 2);
}

#[test]
fn cli_override_supersedes_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "run.cfg", BASE_CFG);
    let out = dir.path().join("metrics.csv");
    // the file says 10 iterations; the override forces an eval-only run
    let code = run([
        "nftlab",
        "--no-timestamp",
        "--override",
        "trainer.iterations=0",
        "--override",
        &format!("output.metrics_path={}", out.display()),
        "train",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2, "header plus one eval-only record");
    assert!(text.contains("no training iterations requested"));
}

#[test]
fn seed_flag_supersedes_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    // two files differing only in trainer.seed
    let cfg_a = write_cfg(dir.path(), "a.cfg", BASE_CFG);
    let cfg_b = write_cfg(
        dir.path(),
        "b.cfg",
        &BASE_CFG.replace("seed = 5", "seed = 99"),
    );
    let mut outputs = Vec::new();
    for (cfg, name) in [(&cfg_a, "a.csv"), (&cfg_b, "b.csv")] {
        let out = dir.path().join(name);
        let code = run([
            "nftlab",
            "--no-timestamp",
            "--seed",
            "123",
            "--override",
            &format!("output.metrics_path={}", out.display()),
            "train",
            cfg.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "--seed must pin the run");
}

#[test]
fn train_runs_are_deterministic_without_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "run.cfg", BASE_CFG);
    let mut outputs = Vec::new();
    for name in ["x.csv", "y.csv"] {
        let out = dir.path().join(name);
        let code = run([
            "nftlab",
            "--no-timestamp",
            "--override",
            &format!("output.metrics_path={}", out.display()),
            "train",
            cfg.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn dump_rollouts_writes_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "run.cfg", BASE_CFG);
    let out = dir.path().join("rollouts.txt");
    let code = run([
        "nftlab",
        "--override",
        &format!("output.rollout_dump_path={}", out.display()),
        "dump-rollouts",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    // 4 questions x 8 answers
    assert_eq!(text.lines().count(), 32);
}

#[test]
fn curves_writes_csv_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curves.csv");
    let code = run([
        "nftlab",
        "curves",
        "--steps",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("R,nft_pos,nft_neg,grpo_pos,grpo_neg"));
}

#[test]
fn verify_identities_suite_exits_0() {
    assert_eq!(run(["nftlab", "verify", "identities"]), 0);
}

#[test]
fn verify_unknown_suite_exits_2() {
    assert_eq!(run(["nftlab", "verify", "bogus"]), 2);
}

#[test]
fn output_root_env_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    // resolve_output reads the env var directly; point it at the temp dir
    std::env::set_var(nftlab::cli::OUTPUT_ROOT_ENV, dir.path());
    let resolved = nftlab::cli::resolve_output(Path::new("sub/metrics.csv"));
    std::env::remove_var(nftlab::cli::OUTPUT_ROOT_ENV);
    assert_eq!(resolved, dir.path().join("sub/metrics.csv"));
}
