use std::process::Command;

fn pic(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pic")).args(args).output().unwrap()
}

#[test]
fn identical_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let status = pic(&[
            "crowdsourcing",
            "--eps-central",
            "1,inf",
            "--groups",
            "400,300",
            "--trials",
            "2",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    }
    let first = std::fs::read(&a).unwrap();
    assert_eq!(first, std::fs::read(&b).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("scenario,mechanism,privacy_mode,eps,eps_local,metric,value,stddev,trials,seed\n"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "mechanism=laplace\neps=2\ntrials=50\n").unwrap();
    let out = pic(&["randomize", "--config", cfg.to_str().unwrap(), "--eps", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("single_report,laplace,ldp,5,5,mean_l2_error,"), "{}", rows[0]);
    assert!(rows[0].ends_with(",50,0"));
}

#[test]
fn exit_codes() {
    assert_eq!(pic(&["randomize", "--mechanism", "gaussian"]).status.code(), Some(2));
    assert_eq!(pic(&["randomize", "--eps", "1", "--eps-central", "1"]).status.code(), Some(2));
    assert_eq!(pic(&["social", "--policy", "most"]).status.code(), Some(2));
    let infeasible = pic(&["randomize", "--eps-central", "1", "--n", "40", "--mechanism", "laplace"]);
    assert_eq!(infeasible.status.code(), Some(3));
    assert!(String::from_utf8(infeasible.stdout).unwrap().contains("amplification_infeasible"));
    assert_eq!(pic(&["amplify", "--n", "10", "--eps", "1"]).status.code(), Some(3));
    assert_eq!(pic(&["amplify", "--n", "10000", "--eps-central", "1"]).status.code(), Some(0));
}

#[test]
fn protocol_demo_prints_transcript() {
    let out = pic(&["protocol-demo", "--groups", "5,4", "--eps", "3"]);
    assert!(out.status.success());
    let transcript = String::from_utf8(out.stderr).unwrap();
    assert!(transcript.contains("event=publish group=0 count=5"));
    assert!(String::from_utf8(out.stdout).unwrap().contains("delivered_fraction,1,"));
}

#[test]
fn dataset_input() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("points.csv");
    let mut body = String::from("id,x,y\n");
    for i in 0..60 {
        body.push_str(&format!("{i},{},{}\n", (i % 15) as f64 * 0.5, (i / 15) as f64 * 0.5));
    }
    std::fs::write(&data, body).unwrap();
    let out = pic(&["social", "--eps", "inf", "--trials", "1", "--dataset", data.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains(",f1,1,"));
    std::fs::write(&data, "id,x,y\n1,2,oops\n").unwrap();
    let bad = pic(&["social", "--dataset", data.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8(bad.stderr).unwrap().contains("line 2"));
}
