use std::path::{Path, PathBuf};

use robust_adp::harness::cli::main_with_args;
use robust_adp::harness::config::PlantConfig;
use robust_adp::harness::{replay, run_algorithm_1, run_to_dir, RunConfig};
use robust_adp::Error;

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn args(list: &[&str]) -> Vec<String> {
    std::iter::once("radp").chain(list.iter().copied()).map(String::from).collect()
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    for name in ["arm.cfg", "scalar_lqr.cfg", "cascade_unmatched.cfg"] {
        let cfg = RunConfig::load(&example(name)).unwrap();
        let again = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again, "{name}");
        cfg.validate().unwrap();
    }
}

#[test]
fn unknown_keys_are_config_errors() {
    let text = "format_version = 1\n[plant]\nkind = \"scalar_lqr\"\n[exploration]\namplitude = 1.0\nseed = 1\nbogus = 3\n";
    let err = RunConfig::from_toml_str(text).unwrap_err();
    assert_eq!(err.category(), "ConfigParse");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn run_directory_contains_artifacts_and_replays() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::load(&example("scalar_lqr.cfg")).unwrap();
    cfg.output.dir = Some(tmp.path().join("scalar"));
    let (dir, run) = run_to_dir(&cfg).unwrap();
    assert!(run.converged_at.is_some());
    for f in [
        "config.toml",
        "iterations.csv",
        "weights.csv",
        "trajectory_learning.csv",
        "trajectory_post.csv",
        "gain_report.txt",
        "value_surface.csv",
        "policy.toml",
        "run_log.txt",
    ] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    assert!(!dir.join("error.txt").exists());
    let header = std::fs::read_to_string(dir.join("iterations.csv")).unwrap();
    assert!(header.starts_with("iteration,residual_rms,min_singular_value,pe_ratio,weight_change"));
    // learner view carries no hidden column on a plant without uncertainty
    let traj = std::fs::read_to_string(dir.join("trajectory_learning.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), "time,x1,u,x_channel");

    replay(&dir).unwrap();

    std::fs::write(dir.join("policy.toml"), "tampered").unwrap();
    match replay(&dir) {
        Err(Error::ReplayMismatch(name)) => assert_eq!(name, "policy.toml"),
        other => panic!("expected a mismatch, got {other:?}"),
    }
}

#[test]
fn zero_exploration_writes_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::load(&example("scalar_lqr.cfg")).unwrap();
    cfg.exploration.amplitude = 0.0;
    cfg.output.dir = Some(tmp.path().join("flat"));
    let err = run_to_dir(&cfg).unwrap_err();
    assert!(matches!(err, Error::PEViolation { .. }));
    let text = std::fs::read_to_string(tmp.path().join("flat/error.txt")).unwrap();
    assert!(text.starts_with("PEViolation\n"));
    assert!(tmp.path().join("flat/run_log.txt").is_file());
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cli");
    let cfg = example("scalar_lqr.cfg");
    let cfg = cfg.to_str().unwrap();
    let out_s = out.to_str().unwrap();

    assert_eq!(main_with_args(args(&["run", cfg, "--out-dir", out_s, "--max-iter", "10"])), 0);
    assert!(out.join("policy.toml").is_file());
    assert_eq!(main_with_args(args(&["replay", out_s])), 0);

    assert_eq!(main_with_args(args(&["oracle", cfg, "--out-dir", out_s])), 0);
    assert!(out.join("oracle.csv").is_file());

    assert_eq!(main_with_args(args(&["run", "/no/such/file.cfg"])), 2);
    assert_eq!(main_with_args(args(&["frobnicate"])), 2);
    assert_eq!(main_with_args(args(&["run", cfg, "--step=-1"])), 2);

    let flat = tmp.path().join("flat.cfg");
    let text = std::fs::read_to_string(cfg).unwrap().replace("amplitude = 1.0", "amplitude = 0.0");
    std::fs::write(&flat, text).unwrap();
    let flat_out = tmp.path().join("flat");
    let code = main_with_args(args(&["run", flat.to_str().unwrap(), "--out-dir", flat_out.to_str().unwrap()]));
    assert_eq!(code, Error::PEViolation { ratio: 0.0, threshold: 0.0 }.exit_code());
    assert_ne!(code, 0);
}

#[test]
fn check_gains_holds_on_cascade() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("gains");
    let cfg = example("cascade_unmatched.cfg");
    let code = main_with_args(args(&["check-gains", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]));
    assert_eq!(code, 0);
    let report = std::fs::read_to_string(out.join("gain_report.txt")).unwrap();
    assert!(report.starts_with("# rho = "));
}

#[test]
fn check_gains_rejects_nominal_plants() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("nominal");
    let cfg = example("scalar_lqr.cfg");
    let code = main_with_args(args(&["check-gains", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]));
    assert_eq!(code, 2);
}

#[test]
fn arm_conclusions_hold_across_filter_constants() {
    for tau in [0.05, 0.1, 0.2] {
        let mut cfg = RunConfig::load(&example("arm.cfg")).unwrap();
        match &mut cfg.plant {
            PlantConfig::Arm { tau_n, .. } => *tau_n = tau,
            _ => unreachable!(),
        }
        let run = run_algorithm_1(&cfg).unwrap();
        let it = run.converged_at.expect("converges");
        assert!(it <= 12, "tau_n {tau}: converged at {it}");
        let sp = run.speed_profile.unwrap();
        assert_eq!(sp.peak_count, 1, "tau_n {tau}: {sp:?}");
    }
}
