use std::process::Command;

fn gcflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gcflow"))
}

#[test]
fn bad_config_names_key_and_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "experiment=shrink_circle\neps=1.5\nbogus=3\n").unwrap();
    let out = gcflow().args(["evolve", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`eps`") && err.contains("`bogus`"), "{err}");
}

#[test]
fn wrong_subcommand_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("a.cfg");
    std::fs::write(&cfg, "experiment=arrival_ball\n").unwrap();
    let out = gcflow().args(["evolve", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pair_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("pair.cfg");
    std::fs::write(&cfg, "experiment=contraction_pair\npairs=3\nsteps=200\n").unwrap();
    let mut outputs = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        let out = gcflow()
            .args(["evolve", "--seed", "5", "--config"])
            .arg(&cfg)
            .arg("--out-dir")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("sup_diff_increases = 0 <= 0 PASS"));
        outputs.push((
            std::fs::read(out_dir.join("summary.csv")).unwrap(),
            std::fs::read(out_dir.join("series.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn verify_without_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = gcflow().args(["verify", "--out-dir"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.lines().skip(1).all(|l| l.ends_with(",PASS")));
    assert!(dir.path().join("suites.csv").exists());
}
