use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use taem_mlmc::cli::run;

fn taem(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taem"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn run_in(out: &Path, args: &[&str]) -> i32 {
    let mut full = vec!["taem".to_string()];
    full.extend(args.iter().map(|s| s.to_string()));
    full.push("--out".into());
    full.push(out.display().to_string());
    run(full)
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn invalid_driver_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = taem(dir.path(), &["--driver", "cauchy", "path"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("driver"));
}

#[test]
fn single_level_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = taem(dir.path(), &["strong-error", "--levels", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("levels"));
}

#[test]
fn nonnegative_alpha_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = taem(dir.path(), &["mlmc", "--alpha", "0.5", "--k0", "0.01", "--k1", "1", "--k2", "0.2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));
}

#[test]
fn unknown_flag_exits_with_2_and_help_with_0() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(taem(dir.path(), &["path", "--bogus", "1"]).status.code(), Some(2));
    assert_eq!(Command::new(env!("CARGO_BIN_EXE_taem")).arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn missing_config_file_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let o = taem(dir.path(), &["--config", missing.to_str().unwrap(), "path"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_model_path_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("zero.toml");
    fs::write(
        &cfg,
        "[model]\nname = \"zero\"\nregimes = 2\ninitial_state = [0.5, -1.0, 2.0]\n[path]\nhorizon = 2.0\nstep = 0.25\n",
    )
    .unwrap();
    let code = run_in(dir.path(), &["--config", cfg.to_str().unwrap(), "path"]);
    assert_eq!(code, 0);
    let mut rdr = csv::Reader::from_path(dir.path().join("path.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers, vec!["t", "regime", "x_1", "x_2", "x_3"]);
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let x: Vec<f64> = (2..5).map(|k| rec[k].parse().unwrap()).collect();
        assert_eq!(x, vec![0.5, -1.0, 2.0]);
        rows += 1;
    }
    assert!(rows > 2);
}

#[test]
fn reruns_are_bit_identical_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["strong-error", "--samples", "40", "--levels", "1,2,3", "--horizons", "1"];
    let mut one = args.to_vec();
    one.extend(["--workers", "1"]);
    let mut three = args.to_vec();
    three.extend(["--workers", "3"]);
    assert_eq!(run_in(a.path(), &one), 0);
    assert_eq!(run_in(b.path(), &three), 0);
    for name in ["strong_error.csv", "strong_error_fit.csv"] {
        assert_eq!(read(a.path(), name), read(b.path(), name));
    }
    let p1 = tempfile::tempdir().unwrap();
    let p2 = tempfile::tempdir().unwrap();
    assert_eq!(run_in(p1.path(), &["--seed", "5", "path"]), 0);
    assert_eq!(run_in(p2.path(), &["--seed", "5", "path"]), 0);
    assert_eq!(read(p1.path(), "path.csv"), read(p2.path(), "path.csv"));
}

#[test]
fn constant_functional_mlmc_returns_the_constant() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_in(
        dir.path(),
        &["mlmc", "--functional", "const:1.25", "--epsilon", "0.2", "--k0", "1", "--k1", "1", "--k2", "0.5"],
    );
    assert_eq!(code, 0);
    let summary = read(dir.path(), "mlmc_summary.csv");
    let row = summary.lines().find(|l| l.starts_with("estimate,")).unwrap();
    let v: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(v, 1.25);
    let levels = read(dir.path(), "mlmc_levels.csv");
    assert!(levels.starts_with("level,samples,failures,mean,variance,steps"));
}

#[test]
fn mlmc_with_given_constants_writes_every_level() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_in(dir.path(), &["mlmc", "--epsilon", "0.3", "--k0", "0.01", "--k1", "2.5", "--k2", "0.2"]);
    assert_eq!(code, 0);
    let mut rdr = csv::Reader::from_path(dir.path().join("mlmc_levels.csv")).unwrap();
    let levels: Vec<u32> = rdr.records().map(|r| r.unwrap()[0].parse().unwrap()).collect();
    assert!(levels.len() >= 2);
    assert_eq!(levels, (0..levels.len() as u32).collect::<Vec<_>>());
    for name in ["mlmc_constants.csv", "mlmc_timing.csv", "mlmc_summary.txt"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn study_needs_two_accuracies() {
    let dir = tempfile::tempdir().unwrap();
    let o = taem(dir.path(), &["variance-study", "--epsilons", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    let code = run_in(dir.path(), &["cost-study", "--epsilons", "0.5"]);
    assert_eq!(code, 2);
}

#[test]
fn probe_reports_no_violations_for_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_in(dir.path(), &["probe-conditions", "--cloud-size", "200", "--pairs", "200"]);
    assert_eq!(code, 0);
    let violations = read(dir.path(), "probe_violations.csv");
    assert_eq!(violations.lines().count(), 1, "{violations}");
    assert!(read(dir.path(), "probe_summary.txt").contains("alpha"));
}
