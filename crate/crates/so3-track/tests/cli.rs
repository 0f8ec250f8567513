//! End-to-end checks of the compiled binary: output layout, determinism,
//! and the exit-code contract (0 ok, 1 config error, 2 divergence).

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use so3_track::harness::CSV_HEADER;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_so3-track"))
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("so3-track-cli-{tag}-{}", std::process::id()));
    if dir.exists() {
        fs::remove_dir_all(&dir).unwrap();
    }
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SHORT_RUN: &str = r#"
controller = "GTS"
inertia = [3.0, 2.0, 1.0]
reference = "tumbling"
t_final = 0.5
h = 1e-3

[initial]
theta0 = 2.0
axis = [0.0, 1.0, 0.0]
omega0 = [2.0, 0.0, 1.0]

[gains]
k_r = 9.0
k_omega = 4.2
epsilon = 0.9
"#;

fn write_config(dir: &PathBuf, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

#[test]
fn reproduce_writes_the_expected_files() {
    let dir = scratch("reproduce");
    let out = bin()
        .args(["reproduce", "fig1", "--out-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    let mut names: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["fig1_AGTS.csv", "fig1_GTS.csv"]);

    for name in &names {
        let text = fs::read_to_string(dir.join(name)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER, "{name} header");
        assert_eq!(lines.count(), 1001, "{name} rows");
    }
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn simulate_is_deterministic() {
    let dir = scratch("determinism");
    let config = write_config(&dir, "short.toml", SHORT_RUN);
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    for out_path in [&a, &b] {
        let out = bin()
            .args(["simulate", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out_path)
            .output()
            .unwrap();
        assert!(out.status.success(), "stderr: {}", stderr(&out));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "bytes differ between runs");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn simulate_streams_csv_to_stdout() {
    let dir = scratch("stdout");
    let config = write_config(&dir, "short.toml", SHORT_RUN);
    let out = bin().args(["simulate", "--config"]).arg(&config).output().unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).starts_with(CSV_HEADER));
    assert!(stderr(&out).contains("mode: GTS"), "summary goes to stderr");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn validate_gains_reports_the_margins() {
    let dir = scratch("gains");
    let config = write_config(&dir, "short.toml", SHORT_RUN);
    let out = bin().args(["validate-gains", "--config"]).arg(&config).output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("sigma"), "missing sigma: {text}");
    assert!(text.contains("mu upper bound"), "missing mu bound: {text}");
}

#[test]
fn roa_reports_membership() {
    let dir = scratch("roa");
    let config = write_config(&dir, "short.toml", SHORT_RUN);
    let out = bin().args(["roa", "--config"]).arg(&config).output().unwrap();
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("basin membership"), "{text}");
    assert!(text.contains("convergence guaranteed"), "{text}");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn invalid_gains_name_the_violated_inequality() {
    let dir = scratch("badgains");
    let config = write_config(&dir, "bad.toml", &SHORT_RUN.replace("epsilon = 0.9", "epsilon = -0.5"));
    let out = bin().args(["validate-gains", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("epsilon"), "stderr: {}", stderr(&out));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn divergence_exits_with_code_two() {
    let dir = scratch("divergence");
    let contents = SHORT_RUN
        .replace("k_r = 9.0", "k_r = 1e12")
        .replace("h = 1e-3", "h = 1.0")
        .replace("t_final = 0.5", "t_final = 3.0")
        .replace("theta0 = 2.0", "theta0 = 0.5")
        .replace("controller = \"GTS\"", "controller = \"AGTS\"");
    let config = write_config(&dir, "runaway.toml", &contents);
    let out = bin().args(["simulate", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("divergence"), "stderr: {}", stderr(&out));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_reproduction_target_fails() {
    let out = bin().args(["reproduce", "fig9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("fig9"), "stderr: {}", stderr(&out));
}

#[test]
fn missing_config_is_a_config_error() {
    let out = bin().args(["simulate", "--config", "/no/such/file.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("simulate"));
}
