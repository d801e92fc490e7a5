//! End-to-end tests of the `fjmgt` binary: exit codes, file layout, stream
//! determinism, and the resume path, all through real process invocations.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn exe() -> &'static str {
    env!("CARGO_BIN_EXE_fjmgt")
}

/// Runs the binary with `FJMGT_OUT_DIR` pointed at `out_dir`.
fn run(args: &[&str], config: Option<&Path>, out_dir: &Path) -> Output {
    let mut cmd = Command::new(exe());
    cmd.args(args);
    if let Some(cfg) = config {
        cmd.arg("--config").arg(cfg);
    }
    cmd.env("FJMGT_OUT_DIR", out_dir);
    cmd.output().expect("failed to spawn the fjmgt binary")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const MODE_ONE_FIXTURE: &str = r#"
[domain]
n_modes = 8

[init]
modes = [{ index = 1, psi1 = 2.0 }]

[time]
dt = 1e-3
t_end = 1.0
output_stride = 10

[output]
checkpoint_interval = 5
"#;

#[test]
fn simulate_streams_are_deterministic_and_resume_matches_uninterrupted() {
    let dir = tempfile::tempdir().unwrap();
    let full = write_config(dir.path(), "full.toml", MODE_ONE_FIXTURE);
    let half = write_config(
        dir.path(),
        "half.toml",
        &MODE_ONE_FIXTURE.replace("t_end = 1.0", "t_end = 0.5"),
    );

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let res = run(&["simulate"], Some(&full), out);
        assert!(res.status.success(), "simulate failed: {res:?}");
    }
    let bytes_a = fs::read(out_a.join("diagnostics.csv")).unwrap();
    assert_eq!(bytes_a, fs::read(out_b.join("diagnostics.csv")).unwrap());

    // First data row: t = 0, E = (τ/2)·λ₁·ψ₂² + ... = 2 for this fixture.
    let text = String::from_utf8(bytes_a.clone()).unwrap();
    let first_row = text.lines().nth(1).unwrap();
    assert!(first_row.starts_with("0,2,"), "unexpected first row: {first_row}");

    assert!(out_a.join("run.ck").exists());
    let status = fs::read_to_string(out_a.join("status.txt")).unwrap();
    assert!(status.contains("status=completed"), "status was: {status}");

    // Interrupt at t = 0.5, then resume under the longer horizon: the stream
    // must be byte-identical to the uninterrupted run.
    let out_r = dir.path().join("resumed");
    let res = run(&["simulate"], Some(&half), &out_r);
    assert!(res.status.success(), "half run failed: {res:?}");
    let res = run(&["simulate", "--resume"], Some(&full), &out_r);
    assert!(res.status.success(), "resume failed: {res:?}");
    assert_eq!(bytes_a, fs::read(out_r.join("diagnostics.csv")).unwrap());
}

#[test]
fn ndjson_records_carry_the_same_first_sample() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        write_config(dir.path(), "run.toml", &format!("{MODE_ONE_FIXTURE}format = \"ndjson\"\n"));
    let out = dir.path().join("out");
    let res = run(&["simulate"], Some(&cfg), &out);
    assert!(res.status.success(), "simulate failed: {res:?}");
    let text = fs::read_to_string(out.join("diagnostics.ndjson")).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["t"], 0.0);
    assert_eq!(first["E"], 2.0);
    assert!(first["Q"].is_number());
}

#[test]
fn invalid_configs_list_every_violation_and_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        "bad.toml",
        r#"
[params]
tau = 0.0

[time]
dt = 3e-4
t_end = 1.0
"#,
    );
    let out = dir.path().join("out");
    let res = run(&["simulate"], Some(&bad), &out);
    assert_eq!(res.status.code(), Some(1));
    let stderr = String::from_utf8(res.stderr).unwrap();
    assert!(stderr.contains("2 violations"), "stderr was: {stderr}");
    assert!(stderr.contains("relaxation time"), "stderr was: {stderr}");
    assert!(stderr.contains("must divide t_end"), "stderr was: {stderr}");

    let unknown =
        write_config(dir.path(), "unknown.toml", "[time]\ndt = 1e-3\nt_end = 1.0\nfoo = 3\n");
    let res = run(&["simulate"], Some(&unknown), &out);
    assert_eq!(res.status.code(), Some(1));
    let stderr = String::from_utf8(res.stderr).unwrap();
    assert!(stderr.contains("foo"), "stderr did not name the unknown key: {stderr}");
}

const QUADRATIC_FIXTURE: &str = r#"
[domain]
n_modes = 6

[params]
k = 5.0

[init]
modes = [{ index = 1, psi1 = -3.0, psi2 = -3.0 }]

[time]
dt = 1e-3
t_end = 2.0
output_stride = 10

[monitor]
cap = 1e4
"#;

#[test]
fn monitor_firing_exits_2_with_a_status_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "fire.toml", QUADRATIC_FIXTURE);
    let out = dir.path().join("out");
    let res = run(&["simulate"], Some(&cfg), &out);
    assert_eq!(res.status.code(), Some(2), "expected blow-up exit: {res:?}");
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("status=monitor_fired"), "stdout was: {stdout}");
    let status = fs::read_to_string(out.join("status.txt")).unwrap();
    assert!(status.contains("status=monitor_fired"), "status was: {status}");
}

#[test]
fn sweep_sorts_values_and_terminations_shrink_with_data_size() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sweep.toml", QUADRATIC_FIXTURE);
    let out = dir.path().join("out");
    // Deliberately unsorted on the command line.
    let res = run(&["sweep", "--axis", "n0", "--values", "1,1e-4,1e-2"], Some(&cfg), &out);
    assert_eq!(res.status.code(), Some(2), "a firing row must surface as exit 2: {res:?}");

    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema: fjmgt-sweep-v1"));
    assert_eq!(lines.next(), Some("value,n0,status,t_term,max_q,final_e"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);

    let values: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(values, vec![1e-4, 1e-2, 1.0]);
    let t_terms: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(
        t_terms.windows(2).all(|w| w[1] <= w[0]),
        "termination times must not grow with data size: {t_terms:?}"
    );
    assert!(rows[2][2].contains("monitor_fired"), "largest datum must fire: {rows:?}");
}

#[test]
fn bounds_reports_the_closed_form_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = run(&["bounds", "--n0", "1", "--c0", "1"], None, &out);
    assert!(res.status.success(), "bounds failed: {res:?}");
    let stdout = String::from_utf8(res.stdout).unwrap();
    // 2·ln 2 = 1.386294…, the worked constant-coefficient example.
    assert!(stdout.contains("T* = 1.386294"), "stdout was: {stdout}");
    assert!(stdout.contains("T0 at T* = 1.386294"), "stdout was: {stdout}");

    let curve = fs::read_to_string(out.join("bounds.csv")).unwrap();
    assert!(curve.starts_with("# schema: fjmgt-bounds-v1\nt,t0\n"));
    assert_eq!(fs::read_to_string(out.join("summary.txt")).unwrap(), stdout);
}

#[test]
fn verification_reports_carry_schema_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = run(&["verify-kernel", "--corpus", "10", "--len", "64"], None, &out);
    assert!(res.status.success(), "verify-kernel failed: {res:?}");
    let text = fs::read_to_string(out.join("kernel_report.csv")).unwrap();
    assert!(text.starts_with("# schema: fjmgt-kernel-report-v1\n"), "report was: {text}");

    let res = run(&["verify-inequalities", "--dim", "2", "--corpus", "5"], None, &out);
    assert!(res.status.success(), "verify-inequalities failed: {res:?}");
    let text = fs::read_to_string(out.join("inequality_report.csv")).unwrap();
    assert!(text.starts_with("# schema: fjmgt-inequality-report-v1\n"), "report was: {text}");
}
