//! End-to-end tests of the `eqsolve` binary: exit codes, output formats,
//! and reproducibility of the benchmark reports.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CIRCLE_LINE: &str = "x1^2 + x2^2 = 25\nx1 - x2 = 1\n";
const LINEAR_BENCHMARK: &str = "3*x1 + 2*x2 = 5\n4*x1 - x2 = 1\n";

fn eqsolve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eqsolve"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_system(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn solve_newton_prints_the_root_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let system = write_system(dir.path(), "circle.txt", CIRCLE_LINE);
    let output = eqsolve(&[
        "solve", "--system", &system, "--method", "newton", "--x0", "5,2",
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(
        stdout.contains("4.000000000;3.000000000"),
        "stdout: {stdout}"
    );
    assert!(
        stdout.starts_with("case,method,solution,"),
        "stdout: {stdout}"
    );
}

#[test]
fn solve_defaults_to_an_all_ones_start() {
    let dir = tempfile::tempdir().unwrap();
    // x0 = (1, 1) is already the root, so Newton must converge at once.
    let system = write_system(dir.path(), "ones.txt", "x1 + x2 = 2\nx1 - x2 = 0\n");
    let output = eqsolve(&["solve", "--system", &system, "--method", "newton"]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    assert!(stdout_of(&output).contains("1.000000000;1.000000000"));
}

#[test]
fn solve_gauss_rejects_nonlinear_systems_with_usage_exit() {
    let dir = tempfile::tempdir().unwrap();
    let system = write_system(dir.path(), "circle.txt", CIRCLE_LINE);
    let output = eqsolve(&["solve", "--system", &system, "--method", "gauss"]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = stderr_of(&output);
    assert!(stderr.contains("not linear"), "stderr: {stderr}");
}

#[test]
fn solve_reports_nonconvergence_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // No real root: x^2 = -1.
    let system = write_system(dir.path(), "rootless.txt", "x1^2 = -1\n");
    let output = eqsolve(&["solve", "--system", &system, "--method", "newton"]);
    assert_eq!(output.status.code(), Some(1), "{}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(stdout.contains("false"), "stdout: {stdout}");
}

#[test]
fn solve_validates_x0_arity() {
    let dir = tempfile::tempdir().unwrap();
    let system = write_system(dir.path(), "circle.txt", CIRCLE_LINE);
    let output = eqsolve(&[
        "solve", "--system", &system, "--method", "newton", "--x0", "1,2,3",
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("--x0"));
}

#[test]
fn solve_rejects_unparsable_systems() {
    let dir = tempfile::tempdir().unwrap();
    let system = write_system(dir.path(), "bad.txt", "x1 + = 3\n");
    let output = eqsolve(&["solve", "--system", &system, "--method", "newton"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn solve_reads_the_system_from_stdin() {
    use std::io::Write;
    use std::process::Stdio;
    let mut child = Command::new(env!("CARGO_BIN_EXE_eqsolve"))
        .args(["solve", "--system", "-", "--method", "gauss"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(LINEAR_BENCHMARK.as_bytes())
        .unwrap();
    let output = child.wait_with_output().unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(stdout.contains("stdin,gauss,"), "stdout: {stdout}");
    assert!(
        stdout.contains("0.6363636364;1.545454545"),
        "stdout: {stdout}"
    );
}

#[test]
fn solve_ga_writes_json_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let system = write_system(dir.path(), "circle.txt", CIRCLE_LINE);
    let out = dir.path().join("row.json");
    let output = eqsolve(&[
        "solve",
        "--system",
        &system,
        "--method",
        "ga",
        "--seed",
        "7",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    // The GA rarely reaches the fitness threshold here; either exit code is
    // legitimate, but the report must be valid JSON either way.
    assert!(matches!(output.status.code(), Some(0) | Some(1)));
    let rows: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let row = &rows.as_array().unwrap()[0];
    assert_eq!(row["method"], "ga");
    assert_eq!(row["case"], "circle");
    assert!(row["residual_norm"].is_number());
}

#[test]
fn unknown_subcommands_and_flags_exit_two() {
    let output = eqsolve(&["frobnicate"]);
    assert_eq!(output.status.code(), Some(2));
    let output = eqsolve(&["solve", "--no-such-flag"]);
    assert_eq!(output.status.code(), Some(2));
    let output = eqsolve(&["solve", "--system", "x.txt", "--method", "annealing"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn bench_writes_one_gauss_and_seeds_ga_rows_per_linear_case() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("bench");
    let output = eqsolve(&[
        "bench",
        "--suite",
        "linear",
        "--methods",
        "gauss,ga",
        "--seeds",
        "5",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    let csv = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    let linear_cases = 6;
    assert_eq!(rows.len(), linear_cases * (1 + 5));
    for case in [
        "linear-1",
        "linear-2",
        "linear-3",
        "linear-4",
        "linear-5",
        "benchmark-linear",
    ] {
        let gauss = rows
            .iter()
            .filter(|r| r.starts_with(&format!("{case},gauss,")))
            .count();
        let ga = rows
            .iter()
            .filter(|r| r.starts_with(&format!("{case},ga,")))
            .count();
        assert_eq!((gauss, ga), (1, 5), "{case}");
    }
    assert!(out_dir.join("report.json").exists());
    assert!(out_dir.join("report.md").exists());
}

#[test]
fn bench_with_canonical_timing_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let output = eqsolve(&[
            "bench",
            "--suite",
            "nonlinear",
            "--methods",
            "newton,lm,ga",
            "--seeds",
            "3",
            "--canonical-timing",
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    }
    for name in ["report.csv", "report.json", "report.md"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn bench_rejects_zero_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("bench");
    let output = eqsolve(&[
        "bench",
        "--seeds",
        "0",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn trace_newton_writes_two_data_lines_for_a_one_step_solve() {
    let dir = tempfile::tempdir().unwrap();
    let system = write_system(dir.path(), "linear.txt", LINEAR_BENCHMARK);
    let out = dir.path().join("trace.csv");
    let output = eqsolve(&[
        "trace",
        "--system",
        &system,
        "--method",
        "newton",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "iteration,residual_norm");
    assert_eq!(lines.len(), 3, "x0 plus the single step: {text}");
    assert!(lines[1].starts_with("0,"));
    assert!(lines[2].starts_with("1,"));
}

#[test]
fn trace_ga_fitness_column_is_non_increasing() {
    let dir = tempfile::tempdir().unwrap();
    let system = write_system(dir.path(), "linear.txt", LINEAR_BENCHMARK);
    let out = dir.path().join("trace.csv");
    let output = eqsolve(&[
        "trace",
        "--system",
        &system,
        "--method",
        "ga",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(matches!(output.status.code(), Some(0) | Some(1)));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("generation,best_fitness"));
    let fitness: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(!fitness.is_empty());
    assert!(fitness.windows(2).all(|w| w[1] <= w[0]), "{fitness:?}");
}

#[test]
fn trace_rejects_gauss() {
    let dir = tempfile::tempdir().unwrap();
    let system = write_system(dir.path(), "linear.txt", LINEAR_BENCHMARK);
    let out = dir.path().join("trace.csv");
    let output = eqsolve(&[
        "trace",
        "--system",
        &system,
        "--method",
        "gauss",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("iterative"));
}

#[test]
fn config_file_overrides_solver_settings() {
    let dir = tempfile::tempdir().unwrap();
    let system = write_system(dir.path(), "circle.txt", CIRCLE_LINE);
    let config = dir.path().join("solver.conf");
    // One iteration cannot reach the root from (5, 2).
    fs::write(&config, "# tight budget\nnewton.max_iterations = 1\n").unwrap();
    let output = eqsolve(&[
        "solve",
        "--system",
        &system,
        "--method",
        "newton",
        "--x0",
        "5,2",
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1), "{}", stderr_of(&output));

    fs::write(&config, "newton.max_iterations = 50\n").unwrap();
    let output = eqsolve(&[
        "solve",
        "--system",
        &system,
        "--method",
        "newton",
        "--x0",
        "5,2",
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr_of(&output));
}

#[test]
fn config_file_with_unknown_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let system = write_system(dir.path(), "circle.txt", CIRCLE_LINE);
    let config = dir.path().join("solver.conf");
    fs::write(&config, "newton.iterations = 5\n").unwrap();
    let output = eqsolve(&[
        "solve",
        "--system",
        &system,
        "--method",
        "newton",
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("unknown configuration key"));
}

#[test]
fn ga_solves_are_reproducible_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let system = write_system(dir.path(), "circle.txt", CIRCLE_LINE);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let output = eqsolve(&[
            "solve",
            "--system",
            &system,
            "--method",
            "ga",
            "--seed",
            "123",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(matches!(output.status.code(), Some(0) | Some(1)));
        let text = fs::read_to_string(&out).unwrap();
        // Solver output should be identical; only the timing column varies.
        let row = text.lines().nth(1).unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        let mut canonical = fields.clone();
        canonical[5] = "-";
        canonical.join(",")
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}
