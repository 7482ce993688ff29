use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sdapd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdapd"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn sdapd")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const SWEEP: &str = r#"
name = "tiny_sweep"
analysis = "blinding_sweep"
seed = 3
output = "tiny.csv"

[blinding_sweep]
energies = [1e-15, 20e-12]
periods = 64
"#;

fn capture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/capture_n32.wfm")
}

#[test]
fn run_writes_csv_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.toml", SWEEP);
    let out = sdapd(&["run", "--output-dir", "o", s.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/tiny.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "energy_j,pre_sd_mean_v,pre_sd_std_v,sd_mean_v,sd_std_v,sd_max_v,periods,blinded"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].ends_with(",false"), "{}", rows[0]);
    assert!(rows[1].ends_with(",true"), "{}", rows[1]);
}

#[test]
fn invalid_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", &SWEEP.replace("1e-15", "-1e-15"));
    let out = sdapd(&["run", bad.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("energies"), "{err}");
    assert!(err.contains("tiny_sweep"), "{err}");

    let out = sdapd(&["run", "--no-such-flag", "x.toml"], dir.path());
    assert_eq!(code(&out), 1);
    let out = sdapd(&["scan", "blinding", "--start", "2e-12", "--stop", "1e-12"], dir.path());
    assert_eq!(code(&out), 1);
    let out = sdapd(&["ingest", capture().to_str().unwrap(), "--skip", "60"], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn unblinded_control_curve_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(
        dir.path(),
        "c.toml",
        r#"
name = "no_blind"
analysis = "control_curve"
output = "c.csv"

[control_curve]
blinding_energies = [0.0]
trigger_energies = [0.0, 1e-12]
periods = 32
"#,
    );
    let out = sdapd(&["run", "--output-dir", "o", s.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("not blinded"), "{err}");
}

#[test]
fn missing_scenario_file_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdapd(&["run", "absent.toml"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn report_exits_two_on_a_failed_expectation() {
    let dir = tempfile::tempdir().unwrap();
    let good = format!("{SWEEP}\n[blinding_sweep.expected]\nblinded_from = 20e-12\n");
    let s = write(dir.path(), "good.toml", &good);
    let out = sdapd(&["report", "--output-dir", "o", s.to_str().unwrap()], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{stdout}");
    assert!(stdout.lines().all(|l| l.starts_with("PASS")), "{stdout}");

    let bad = format!("{SWEEP}\n[blinding_sweep.expected]\nblinded_from = 1e-15\n");
    let s = write(dir.path(), "bad.toml", &bad);
    let out = sdapd(&["report", "--output-dir", "o", s.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn ingest_prints_statistics_of_the_capture() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdapd(&["ingest", capture().to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let value = |key: &str| -> String {
        stdout
            .lines()
            .find_map(|l| l.strip_prefix(key))
            .unwrap_or_else(|| panic!("{key} missing in {stdout}"))
            .trim()
            .to_string()
    };
    assert_eq!(value("periods"), "59");
    assert_eq!(value("clicks"), "12");
    let sd_mean: f64 = value("sd_mean_v").parse().unwrap();
    approx::assert_relative_eq!(sd_mean, 0.02531187252694941, max_relative = 1e-12);
}

#[test]
fn scan_writes_the_requested_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdapd(
        &[
            "scan", "dark", "--start", "2e-3", "--stop", "20e-3", "--count", "4", "--periods",
            "2000", "--output", "d.csv", "--output-dir", "o",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/d.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "level_v,dark_rate,clicks,periods");
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn same_seed_gives_identical_bytes_and_seed_override_changes_them() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.toml", SWEEP);
    let s = s.to_str().unwrap();
    let read = |sub: &str| std::fs::read(dir.path().join(sub).join("tiny.csv")).unwrap();
    for sub in ["a", "b"] {
        assert_eq!(code(&sdapd(&["run", "--output-dir", sub, s], dir.path())), 0);
    }
    assert_eq!(read("a"), read("b"));
    assert_eq!(code(&sdapd(&["run", "--seed", "99", "--output-dir", "c", s], dir.path())), 0);
    assert_ne!(read("a"), read("c"));
}
