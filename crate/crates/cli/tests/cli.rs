//! End-to-end tests against the built binary: exit codes, output layout,
//! determinism under a fixed seed, and strict config parsing.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fringe")
}

fn example_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/two_packet_theta0.05.toml")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn bundled_example_simulates_five_usable_fringes() {
    let out = tempfile::tempdir().unwrap();
    let res = run(&[
        "simulate",
        "--config",
        example_config().to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--quiet",
    ]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let summary = read(out.path(), "simulate_summary.toml");
    assert!(summary.contains("n_usable = 5"), "summary:\n{summary}");
    // theta_hat should land on the configured 0.05 within 1 percent
    let theta_hat: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("theta_hat = "))
        .expect("theta_hat present")
        .parse()
        .unwrap();
    assert!((theta_hat / 0.05 - 1.0).abs() < 0.01, "theta_hat = {theta_hat}");
    // every output carries the config hash header
    for name in ["simulate_pattern.csv", "simulate_fringes.csv", "simulate_summary.toml"] {
        assert!(read(out.path(), name).contains("config_sha256"), "{name} missing hash");
    }
}

#[test]
fn analyze_round_trips_a_simulated_pattern() {
    let out = tempfile::tempdir().unwrap();
    let res = run(&[
        "simulate",
        "--config",
        example_config().to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--quiet",
    ]);
    assert!(res.status.success());
    let out2 = tempfile::tempdir().unwrap();
    let res = run(&[
        "analyze",
        "--input",
        out.path().join("simulate_pattern.csv").to_str().unwrap(),
        "--out",
        out2.path().to_str().unwrap(),
        "--quiet",
    ]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let a = read(out.path(), "simulate_fringes.csv");
    let b = read(out2.path(), "analyze_fringes.csv");
    // same fringe table modulo the imbalance column (no model on re-analysis)
    // and the header block (different config hash); compare peak positions
    let peaks = |text: &str| -> Vec<f64> {
        text.lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("index"))
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect()
    };
    let (pa, pb) = (peaks(&a), peaks(&b));
    assert_eq!(pa.len(), pb.len());
    for (x, y) in pa.iter().zip(&pb) {
        // the pattern CSV rounds to 17 significant digits, so the refined
        // peak positions can move by a few ulps of the window width
        assert!((x - y).abs() < 1e-9, "{x} vs {y}");
    }
}

#[test]
fn theta_out_of_range_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "[run]\nmode = \"analytic_two_packet\"\n[params]\nre_kappa = 1.0\ntheta = 1.5\n[model]\nimbalance_r = 0.2\n",
    )
    .unwrap();
    let res = run(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("|theta| must be < 1"), "stderr: {err}");
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "[run]\nmode = \"analytic_two_packet\"\n[params]\nre_kappa = 1.0\ntheta = 0.05\nfoo = 1\n[model]\nimbalance_r = 0.2\n",
    )
    .unwrap();
    let res = run(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("foo"), "stderr: {err}");
}

#[test]
fn missing_config_is_a_config_error() {
    let res = run(&["simulate", "--config", "/nonexistent/nope.toml"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn noisy_run_is_deterministic_under_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("noisy.toml");
    std::fs::write(
        &path,
        r#"
[run]
mode = "analytic_two_packet"

[params]
re_kappa = 1.0
theta = 0.05

[model]
imbalance_r = 0.2

[noise]
phase_jitter_sigma = 0.1
path_jitter_sigma = 0.2
psf_sigma = 0.5
shots = 64
"#,
    )
    .unwrap();
    let (out1, out2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for out in [&out1, &out2] {
        let res = run(&[
            "simulate",
            "--config",
            path.to_str().unwrap(),
            "--out",
            out.path().to_str().unwrap(),
            "--seed",
            "1337",
            "--quiet",
        ]);
        assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    }
    for name in ["simulate_pattern.csv", "simulate_fringes.csv"] {
        assert_eq!(read(out1.path(), name), read(out2.path(), name), "{name} differs");
    }
    // a different seed must actually change the data
    let out3 = tempfile::tempdir().unwrap();
    let res = run(&[
        "simulate",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out3.path().to_str().unwrap(),
        "--seed",
        "7331",
        "--quiet",
    ]);
    assert!(res.status.success());
    assert_ne!(
        read(out1.path(), "simulate_pattern.csv"),
        read(out3.path(), "simulate_pattern.csv")
    );
}

#[test]
fn sweep_fits_the_scaling_law() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.toml");
    std::fs::write(
        &path,
        r#"
[run]
mode = "analytic_two_packet"

[params]
re_kappa = 1.0
theta = 0.02

[model]
imbalance_r = 0.2

[sweep]
thetas = [0.01, 0.03]
rs = [0.1, 0.3]
"#,
    )
    .unwrap();
    let out = tempfile::tempdir().unwrap();
    let res = run(&[
        "sweep",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
        "--quiet",
    ]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let summary = read(out.path(), "sweep_summary.toml");
    let r2: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("r_squared = "))
        .expect("r_squared present")
        .parse()
        .unwrap();
    assert!(r2 > 0.999, "R^2 = {r2}");
    let rows = read(out.path(), "sweep.csv");
    assert_eq!(rows.lines().filter(|l| !l.starts_with('#')).count(), 5); // header + 4 points
}
