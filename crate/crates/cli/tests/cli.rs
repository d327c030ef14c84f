use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_moduli-lab"))
}

fn run(args: &[&str], out: &Path) -> i32 {
    bin().args(args).arg("--out").arg(out).output().unwrap().status.code().unwrap()
}

#[test]
fn fixed_seed_is_byte_identical() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    for d in [&a, &b] {
        assert_eq!(run(&["positivity", "--seed", "9", "--config", "g2-n1-d0"], d), 0);
    }
    for f in ["report.json", "positivity.csv", "plotdata.tsv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn rank_one_without_beltrami_reports_zero() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"bundle": {"preset": "trivial", "rank": 1, "degree": 0}, "with_mu": false, "samples": 3}"#).unwrap();
    let out = t.path().join("out");
    assert_eq!(run(&["second-variation", "--config", cfg.to_str().unwrap()], &out), 0);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    for s in report["samples"].as_array().unwrap() {
        for sys in ["universal", "fibered"] {
            assert_eq!(s[sys]["total"]["re"].as_f64(), Some(0.0));
            assert_eq!(s[sys]["total"]["im"].as_f64(), Some(0.0));
        }
    }
}

#[test]
fn exit_codes_track_outcomes() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("o");
    assert_eq!(run(&["positivity", "--config", "g2-n1-d0", "--tol", "1e-300"], &out), 1);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert!(!report["failures"].as_array().unwrap().is_empty());
    assert_eq!(run(&["positivity", "--config", "no-such-preset"], &out), 2);
    assert_eq!(run(&["positivity", "--tol", "-1"], &out), 2);
    let bad = t.path().join("bad.json");
    std::fs::write(&bad, r#"{"mesh": {"genus": 1}}"#).unwrap();
    assert_eq!(run(&["positivity", "--config", bad.to_str().unwrap()], &out), 2);
    assert_eq!(bin().arg("no-such-command").output().unwrap().status.code(), Some(2));
}

#[test]
fn generator_file_and_density_flag() {
    let t = tempfile::tempdir().unwrap();
    let gens = moduli_lab::bundle::GeneratorSet::clock_shift(2, 3);
    gens.save(t.path().join("gens.txt")).unwrap();
    let cfg = t.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"mesh": {"refinements": 1}, "bundle": {"rank": 3, "degree": 1, "generators": "gens.txt"}, "samples": 2,
            "adjoint_trials": 40, "oracle_trials": 5, "first_variation_trials": 5}"#,
    )
    .unwrap();
    let out = t.path().join("out");
    assert_eq!(run(&["check-operators", "--config", cfg.to_str().unwrap(), "--density", "uniform"], &out), 0);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["dims"]["kernel"].as_u64(), Some(1));
    assert_eq!(report["config"]["mesh"]["density"].as_str(), Some("uniform"));
}
