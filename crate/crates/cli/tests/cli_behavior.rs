//! Exit-code and config-validation contract of the command-line front end.

use std::process::Command;

fn run(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pomsim"))
        .args(args)
        .output()
        .expect("run pomsim binary")
}

fn temp_file(name: &str, contents: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("pomsim-cli-behavior-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn missing_field_exits_2_with_field_path() {
    let config = temp_file(
        "missing_field.toml",
        r#"
version = "pulse-config v1"
[physical]
wavelength = 1.064e-6
cavity_length = 4.256e-6
mass = 1.0e-11
omega_m = 3.14159e6
finesse = 7000.0
[pulse]
eta = 1.0
"#,
    );
    let out_dir = config.parent().unwrap().join("out-missing");
    let output = run(&[
        "pulse",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("n_photons"), "stderr: {stderr}");
}

#[test]
fn unknown_key_exits_2() {
    let config = temp_file(
        "unknown_key.toml",
        r#"
version = "pulse-config v1"
[cavity]
kappa = 1.0e10
g0 = 5.0e5
[pulse]
n_photons = 1.0e8
photon_number = 2.0 # typo: unknown key
"#,
    );
    let out_dir = config.parent().unwrap().join("out-unknown");
    let output = run(&[
        "pulse",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn wrong_version_exits_2() {
    let config = temp_file(
        "wrong_version.toml",
        r#"
version = "pulse-config v99"
[cavity]
kappa = 1.0e10
g0 = 5.0e5
[pulse]
n_photons = 1.0e8
"#,
    );
    let out_dir = config.parent().unwrap().join("out-version");
    let output = run(&[
        "pulse",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("version"));
}

#[test]
fn zero_chi_tomography_exits_3_no_position_information() {
    let config = temp_file(
        "zero_chi.toml",
        r#"
version = "tomography-config v1"
master_seed = 1
[state]
kind = "thermal"
nbar = 0.5
n_max = 24
[measurement]
chi = 0.0
[scan]
angles = 12
shots = 0
[grids]
phase_half_width = 6.0
phase_points = 101
marginal_half_width = 8.0
marginal_points = 201
[reconstruction]
n_max = 12
"#,
    );
    let out_dir = config.parent().unwrap().join("out-zerochi");
    let output = run(&[
        "tomography",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("no position information"), "stderr: {stderr}");
}

#[test]
fn manifest_written_once_per_run() {
    let config = temp_file(
        "manifest_check.toml",
        r#"
version = "protocol-config v1"
[purify]
nbar = 100.0
chi = 1.5
"#,
    );
    let out_dir = config.parent().unwrap().join("out-manifest");
    let output = run(&[
        "purify",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert!(output.status.success());
    let manifests: Vec<_> = std::fs::read_dir(&out_dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name() == "manifest.json")
        .collect();
    assert_eq!(manifests.len(), 1);
    let manifest = std::fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"master_seed\": 5"));
    assert!(manifest.contains("\"command\": \"purify\""));
}

#[test]
fn pulse_summary_reports_reference_numbers() {
    let configs: std::path::PathBuf =
        [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs"].iter().collect();
    let out_dir = std::env::temp_dir()
        .join(format!("pomsim-cli-behavior-{}", std::process::id()))
        .join("out-pulse-summary");
    let output = run(&[
        "pulse",
        "--config",
        configs.join("pulse_microcavity.toml").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    let chi = summary["chi"].as_f64().unwrap();
    let omega = summary["omega_kick"].as_f64().unwrap();
    assert!((chi - 1.5).abs() < 0.075, "chi {chi}");
    assert!((omega - 7.3e3).abs() < 0.2e3, "omega {omega}");
    assert!(out_dir.join("envelope.csv").exists());
    let envelope = std::fs::read_to_string(out_dir.join("envelope.csv")).unwrap();
    assert!(envelope.starts_with("# columns: time_s,alpha_in,alpha,alpha_lo"));
}

#[test]
fn forced_sequence_reports_conditional_moments() {
    let configs: std::path::PathBuf =
        [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs"].iter().collect();
    let out_dir = std::env::temp_dir()
        .join(format!("pomsim-cli-behavior-{}", std::process::id()))
        .join("out-forced");
    let output = run(&[
        "purify",
        "--config",
        configs.join("purify_forced_sequence.toml").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let table = std::fs::read_to_string(out_dir.join("neff_table.csv")).unwrap();
    let after_first: Vec<f64> = table
        .lines()
        .find(|l| l.starts_with("1e0,"))
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    // step, mean_x, mean_p, var_x, var_p, cov_xp, n_eff
    assert!((after_first[1] - 3.917).abs() < 1e-3, "mean_x {}", after_first[1]);
    assert!((after_first[3] - 0.2176).abs() < 1e-4, "var_x {}", after_first[3]);
    let trajectory = std::fs::read_to_string(out_dir.join("trajectory.json")).unwrap();
    assert!(trajectory.contains("\"records\""));
}

#[test]
fn env_seed_override_applies() {
    let config = temp_file(
        "env_seed.toml",
        r#"
version = "protocol-config v1"
[purify]
nbar = 50.0
chi = 1.2
"#,
    );
    let out_dir = config.parent().unwrap().join("out-envseed");
    let output = Command::new(env!("CARGO_BIN_EXE_pomsim"))
        .args([
            "purify",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .env("POMSIM_SEED", "42")
        .output()
        .unwrap();
    assert!(output.status.success());
    let manifest = std::fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"master_seed\": 42"));
}
