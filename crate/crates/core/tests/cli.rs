use std::process::Command;

fn cogmask() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cogmask"))
}

#[test]
fn usage_error_exits_2() {
    let out = cogmask().args(["detect", "x.txt", "--gamma", "0.1", "--sigma2", "0.3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "experiment = \"spsa-lambda-sweep\"\nseed = 1\nlamda = [1.0]\n").unwrap();
    let out = cogmask().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("did you mean `lambda`"));
}

#[test]
fn generate_then_irl_and_detect() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.txt");
    let gen = cogmask()
        .args(["generate", "--scenario", "waveform-u1", "-k", "6", "-m", "3", "--seed", "4", "--out"])
        .arg(&data)
        .output()
        .unwrap();
    assert!(gen.status.success());
    let irl = cogmask().arg("irl").arg(&data).args(["--strategy", "sqrt"]).output().unwrap();
    let text = String::from_utf8_lossy(&irl.stdout);
    assert!(irl.status.success() && text.contains("verdict: rationalizable"), "{text}");
    let det = cogmask().arg("detect").arg(&data).args(["--gamma", "0.1", "--sigma2", "0.3", "--seed", "2"]).output().unwrap();
    assert!(det.status.success());
    assert!(String::from_utf8_lossy(&det.stdout).contains("decision: cognitive"));
}

#[test]
fn run_reports_assertions_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "experiment = \"type1-bound\"\nseed = 2\nK = 5\ntrials = 50\nquantile_samples = 200\noutput_dir = \"out\"\n",
    )
    .unwrap();
    let out = cogmask().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("out/summary.json").exists());
    assert!(dir.path().join("out/type1_waveform-u1.csv").exists());
}
