//! The command-line tool, driven as a subprocess.

use std::path::Path;
use std::process::{Command, Output};

fn udrlpg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_udrlpg")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, extra: &str) -> String {
    let path = dir.join(name);
    let text = format!(
        "total_stages = 2\nn_init_random = 8\nupdates_per_stage = 5\nbatch_size = 4\nrollouts_per_stage = 3\nworkers = 1\n{extra}"
    );
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn train_then_eval_and_identity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", "");
    let out_dir = dir.path().join("run");
    let out = udrlpg(&["train", "--config", &cfg, "--seed", "4", "--out", out_dir.to_str().unwrap()]);
    let log = stdout(&out);
    let mut lines = log.lines();
    assert!(lines.next().unwrap().starts_with("stage,env_steps,mean_return,max_return,best_return"));
    assert_eq!(lines.count(), 2);
    assert_eq!(std::fs::read_to_string(out_dir.join("runlog.csv")).unwrap(), log);

    let ckpt = out_dir.join("latest.json");
    let policy = dir.path().join("policy.json");
    let eval = stdout(&udrlpg(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--command",
        "900",
        "--episodes",
        "2",
        "--policy-out",
        policy.to_str().unwrap(),
    ]));
    let mut rows = csv::Reader::from_reader(eval.as_bytes());
    assert_eq!(rows.headers().unwrap(), vec!["command", "episodes", "mean_return", "returns"]);
    let row = rows.records().next().unwrap().unwrap();
    assert_eq!(&row[1], "2");
    assert_eq!(row[3].split(';').count(), 2);
    assert!(udrlpg::PolicyFragment::load(&policy).is_ok());

    let identity = stdout(&udrlpg(&["identity", "--checkpoint", ckpt.to_str().unwrap(), "--points", "4", "--episodes", "1"]));
    let lines: Vec<&str> = identity.lines().collect();
    assert_eq!(lines[0], "command,achieved,kind");
    assert_eq!(lines.len(), 1 + 4 + 1);
    assert!(lines[5].ends_with(",extrapolation"));
}

#[test]
fn ablate_and_variance_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "base.toml", "");
    let out_dir = dir.path().join("abl");
    let summary = stdout(&udrlpg(&["ablate", "--config", &cfg, "--seeds", "1,2,3", "--out", out_dir.to_str().unwrap()]));
    assert_eq!(summary.lines().count(), 1 + 4);
    for s in ["buckets_weighted", "buckets_uniform", "flat_weighted", "flat_uniform"] {
        assert!(out_dir.join(format!("ablation_{s}.csv")).exists());
        assert!(summary.contains(s));
    }

    let other = write_config(dir.path(), "other.toml", "[buffer]\nstrategy = \"flat_uniform\"\n");
    let variance = stdout(&udrlpg(&["variance", "--config", &cfg, &other, "--seeds", "1,2,3"]));
    let lines: Vec<&str> = variance.lines().collect();
    assert_eq!(lines[0], "label,seeds,mean,std,min,max");
    assert!(lines[1].starts_with("base,") && lines[2].starts_with("other,"));
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert!(!udrlpg(&["eval", "--checkpoint", missing.to_str().unwrap(), "--command", "1"]).status.success());
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "batch_size = 0\n").unwrap();
    assert!(!udrlpg(&["train", "--config", bad.to_str().unwrap(), "--seed", "0"]).status.success());
    let cfg = write_config(dir.path(), "ok.toml", "");
    assert!(!udrlpg(&["variance", "--config", &cfg, "--seeds", "1,2"]).status.success());
    assert!(!udrlpg(&["identity"]).status.success());
}
