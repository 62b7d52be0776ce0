use std::path::Path;
use std::process::Command;

use trustwork_cli::run;
use trustwork_core::model::{model_hash, reference_model};
use trustwork_core::policy::load_policy;

fn trustwork(dir: &Path, args: &[&str]) -> i32 {
    let mut full = vec!["trustwork".to_string()];
    for a in args {
        // paths are given relative to `dir`
        full.push(a.replace("@", &format!("{}/", dir.display())));
    }
    run(full)
}

#[test]
fn solve_policy_echoes_its_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let code = trustwork(dir.path(), &["solve-policy", "--zeta", "0.95", "--gamma", "0.9375", "--out", "@policy.json"]);
    assert_eq!(code, 0);
    let p = load_policy(&dir.path().join("policy.json")).unwrap();
    assert_eq!(p.reward.zeta, 0.95);
    assert_eq!(p.reward.gamma, 0.9375);
    assert_eq!(p.model_hash, model_hash(&reference_model()));
    assert!(p.residual < 1e-10);
}

#[test]
fn policy_grid_has_one_row_per_belief_point() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(trustwork(dir.path(), &["solve-policy", "--zeta", "0.5", "--out", "@p.json"]), 0);
    let code = trustwork(
        dir.path(),
        &["policy-grid", "--policy", "@p.json", "--rec", "present", "--exp", "reliable", "--resolution", "101", "--out", "@g.csv"],
    );
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(dir.path().join("g.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p_trust_high,p_workload_high,transparency"));
    assert_eq!(lines.count(), 10201);
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(trustwork(dir.path(), &["solve-policy", "--zeta", "1.5", "--out", "@x.json"]), 2);
    assert_eq!(trustwork(dir.path(), &["solve-policy", "--out", "@x.json"]), 2);
    assert_eq!(trustwork(dir.path(), &["fit-trust", "--sessions", "@none.csv", "--out", "@m.json"]), 2);
    assert_eq!(trustwork(dir.path(), &["solve-policy", "--zeta", "0.5", "--bogus", "1"]), 2);
    assert_eq!(trustwork(dir.path(), &["no-such-command"]), 2);
    assert!(!dir.path().join("x.json").exists());

    std::fs::write(dir.path().join("bad.csv"), "participant_id,mission_id\np1,m1\n").unwrap();
    assert_eq!(trustwork(dir.path(), &["fit-trust", "--sessions", "@bad.csv", "--out", "@m.json"]), 2);
}

#[test]
fn config_file_fills_in_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "seed = 4\n[simulate-corpus]\nparticipants = 3\ntrials-per-mission = 5\nout = \"{}\"\n",
            dir.path().join("a.csv").display()
        ),
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(trustwork(dir.path(), &["--config", c, "simulate-corpus"]), 0);
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(a.lines().count(), 1 + 3 * 3 * 5);

    assert_eq!(trustwork(dir.path(), &["--config", c, "simulate-corpus", "--participants", "2", "--out", "@b.csv"]), 0);
    let b = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(b.lines().count(), 1 + 2 * 3 * 5);
    // same seed from the file, so participant p001 is identical
    let first = |s: &str| s.lines().take(16).collect::<Vec<_>>().join("\n");
    assert_eq!(first(&a), first(&b));

    std::fs::write(&cfg, "[simulate-corpus]\nparticipantz = 3\n").unwrap();
    assert_eq!(trustwork(dir.path(), &["--config", c, "simulate-corpus", "--out", "@c.csv"]), 2);
}

#[test]
fn simulation_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    for (name, seed, jobs) in [("a.csv", "9", "1"), ("b.csv", "9", "4"), ("c.csv", "10", "1")] {
        let out = format!("@{name}");
        let args = ["--seed", seed, "--jobs", jobs, "simulate-corpus", "--participants", "20", "--out", out.as_str()];
        assert_eq!(trustwork(dir.path(), &args), 0);
    }
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn experiment_logs_replay_and_tampering_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--seed", "2", "run-experiment", "--policies", "fixed_medium,closed_loop_0.95", "--replications", "10",
        "--out", "@summary.csv", "--logs-out", "@logs.csv",
    ];
    assert_eq!(trustwork(dir.path(), &args), 0);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert_eq!(
        trustwork(dir.path(), &["replay-belief", "--sessions", "@logs.csv", "--strict", "--out", "@r.csv"]),
        0
    );
    let replay = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(replay.lines().count(), 1 + 2 * 10 * 15);
    assert!(replay.lines().skip(1).all(|l| l.ends_with(",true")));

    // nudge one logged belief in its last digit
    let logs = std::fs::read_to_string(dir.path().join("logs.csv")).unwrap();
    let mut lines: Vec<String> = logs.lines().map(String::from).collect();
    let mut cols: Vec<String> = lines[5].split(',').map(String::from).collect();
    let v: f64 = cols[11].parse().unwrap();
    cols[11] = format!("{}", f64::from_bits(v.to_bits() + 1));
    lines[5] = cols.join(",");
    std::fs::write(dir.path().join("tampered.csv"), lines.join("\n") + "\n").unwrap();
    assert_eq!(trustwork(dir.path(), &["replay-belief", "--sessions", "@tampered.csv", "--strict", "--out", "@r2.csv"]), 1);
    assert_eq!(trustwork(dir.path(), &["replay-belief", "--sessions", "@tampered.csv", "--out", "@r3.csv"]), 0);
}

#[test]
fn mismatched_policy_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(trustwork(dir.path(), &["solve-policy", "--zeta", "0.9", "--alpha", "0.1", "--out", "@p.json"]), 0);
    let args = ["run-experiment", "--policy-file", "@p.json", "--replications", "5", "--out", "@s.csv"];
    assert_eq!(trustwork(dir.path(), &args), 2);
    assert_eq!(trustwork(dir.path(), &["solve-policy", "--zeta", "0.9", "--out", "@q.json"]), 0);
    let args = ["run-experiment", "--policy-file", "@q.json", "--replications", "5", "--out", "@s.csv"];
    assert_eq!(trustwork(dir.path(), &args), 0);
    let s = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(s.lines().nth(1).unwrap().starts_with("closed_loop_0.90,5,"));
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_trustwork");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(status(&["--help"]), Some(0));
    assert_eq!(status(&["solve-policy", "--zeta", "2", "--out", "/tmp/never.json"]), Some(2));
    assert_eq!(status(&["--jobs", "0", "solve-policy", "--zeta", "0.5", "--out", "/tmp/never.json"]), Some(2));
}
