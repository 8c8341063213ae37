//! End-to-end runs of the `spocb` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spocb::{build_problem, fixtures, solve_reduced, Problem, SolveOptions};
use spocb_cli::{load_problem_file, LoadError};
use tempfile::TempDir;

fn spocb(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spocb"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a built-in example into `dir` and returns its path.
fn example(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let mut args = vec!["example", name, "--out", "."];
    args.extend_from_slice(extra);
    let o = spocb(dir, &args);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join(format!("{name}.json"))
}

fn edit(path: &Path, f: impl FnOnce(&mut serde_json::Value)) {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    f(&mut v);
    fs::write(path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
}

/// Parses a CSV with a header into (header, rows).
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>());
    let header = lines.next().unwrap();
    (header, lines.collect())
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn exported_fixture_round_trips() {
    let dir = TempDir::new().unwrap();
    let path = example(dir.path(), "f8-aircraft", &[]);
    let loaded = load_problem_file(&path).unwrap();
    let direct: Problem = build_problem(&fixtures::f8_aircraft()).unwrap();
    assert_eq!(loaded, direct);
}

#[test]
fn f8_bounds_bracket_the_oracle() {
    let dir = TempDir::new().unwrap();
    let path = example(dir.path(), "f8-aircraft", &[]);
    let o = spocb(dir.path(), &["bounds", path.to_str().unwrap(), "--out", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("bracketing       ok"), "{}", stdout(&o));
    let (h, rows) = read_csv(&dir.path().join("out/bounds.csv"));
    assert_eq!(h.join(","), spocb::duality::CSV_HEADER);
    let get = |c: &str| rows[0][column(&h, c)].parse::<f64>().unwrap();
    let (lower, oracle, upper) = (get("lower"), get("oracle"), get("upper"));
    let slack = 1e-6 * (1.0 + oracle.abs());
    assert!(lower <= oracle + slack && oracle <= upper + slack, "{lower} {oracle} {upper}");
    assert_eq!(get("eps"), 0.0336);
}

#[test]
fn zero_control_weight_fails_assumption_d() {
    let dir = TempDir::new().unwrap();
    let path = example(dir.path(), "f8-aircraft", &[]);
    edit(&path, |v| v["R"] = serde_json::json!([[0.0]]));
    let o = spocb(dir.path(), &["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("(d)"), "{}", stderr(&o));
}

#[test]
fn valid_fixture_validates() {
    let dir = TempDir::new().unwrap();
    let path = example(dir.path(), "f8-aircraft", &[]);
    let o = spocb(dir.path(), &["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("all required assumptions hold"));
}

#[test]
fn truncated_file_is_a_parse_error() {
    let dir = TempDir::new().unwrap();
    let path = example(dir.path(), "f8-aircraft", &[]);
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, &text[..text.len() / 3]).unwrap();
    assert!(matches!(load_problem_file(&path), Err(LoadError::Parse { .. })));
    let o = spocb(dir.path(), &["bounds", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("load") && msg.contains("f8-aircraft.json:"), "{msg}");
}

#[test]
fn zero_slow_dimension_is_a_schema_error() {
    let dir = TempDir::new().unwrap();
    let path = example(dir.path(), "scalar-toy", &[]);
    edit(&path, |v| v["dims"]["m"] = serde_json::json!(0));
    match load_problem_file(&path) {
        Err(LoadError::Schema { source, .. }) => assert!(source.to_string().contains("dims.m")),
        other => panic!("expected a schema error, got {other:?}"),
    }
    let o = spocb(dir.path(), &["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("schema error"));
}

#[test]
fn sweep_needs_three_decreasing_points() {
    let dir = TempDir::new().unwrap();
    let path = example(dir.path(), "f8-aircraft", &[]);
    let file = path.to_str().unwrap();
    let o = spocb(dir.path(), &["sweep", file, "--eps", "0.02,0.01"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("at least 3"));
    let o = spocb(dir.path(), &["sweep", file, "--eps", "0.01,0.02,0.005"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("strictly decreasing"));
}

fn f8_sweep(dir: &Path, threads: &str) -> (Vec<String>, Vec<Vec<String>>, Vec<String>, Vec<String>) {
    let path = example(dir, "f8-aircraft", &[]);
    let o = Command::new(env!("CARGO_BIN_EXE_spocb"))
        .args(["sweep", path.to_str().unwrap(), "--eps", "0.04,0.02,0.01,0.005", "--out", "sweep"])
        .env("SPOCB_THREADS", threads)
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, rows) = read_csv(&dir.join("sweep/sweep.csv"));
    let (fh, mut frows) = read_csv(&dir.join("sweep/sweep_fit.csv"));
    (h, rows, fh, frows.remove(0))
}

#[test]
fn f8_sweep_gap_is_monotone_and_reproducible() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let (h, rows, _, fit) = f8_sweep(a.path(), "1");
    let (_, rows4, _, fit4) = f8_sweep(b.path(), "4");
    assert_eq!(rows, rows4, "thread count changed the results");
    assert_eq!(fit, fit4);
    let gap = column(&h, "gap");
    let gaps: Vec<f64> = rows.iter().map(|r| r[gap].parse().unwrap()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(rows.iter().all(|r| r.last().unwrap() == "ok"));
}

#[test]
fn f8_sweep_slope_is_first_order() {
    let dir = TempDir::new().unwrap();
    let (_, _, fh, fit) = f8_sweep(dir.path(), "2");
    let slope: f64 = fit[column(&fh, "slope")].parse().unwrap();
    assert!((0.8..=1.25).contains(&slope), "gap slope {slope}");
}

#[test]
fn decoupled_toy_sweep_has_tight_bounds() {
    let dir = TempDir::new().unwrap();
    let path = example(dir.path(), "scalar-toy", &[]);
    let o = spocb(dir.path(), &["sweep", path.to_str().unwrap(), "--eps", "0.2,0.1,0.05,0.02", "--out", "."]);
    // A zero gap cannot be fitted; the sweep still succeeds.
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, rows) = read_csv(&dir.path().join("sweep.csv"));
    for r in &rows {
        let gap: f64 = r[column(&h, "gap")].parse().unwrap();
        assert!(gap.abs() <= 1e-6, "gap {gap} at eps {}", r[0]);
    }
}

#[test]
fn solve_exports_the_trajectory() {
    let dir = TempDir::new().unwrap();
    let path = example(dir.path(), "f8-aircraft", &[]);
    let o = spocb(dir.path(), &["solve", path.to_str().unwrap(), "--out", "run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let value: f64 = stdout(&o).lines().next().unwrap().split_whitespace().last().unwrap().parse().unwrap();
    assert!((value - 2.863591).abs() < 1e-6, "{value}");
    let (h, rows) = read_csv(&dir.path().join("run/trajectory.csv"));
    assert_eq!(
        h.join(","),
        "t,z_1,z_2,z_3,z_4,u_1,chi_1,chi_2,chi_3,chi_4"
    );
    let t: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(t[0], 0.0);
    assert!((t[t.len() - 1] - 1.0).abs() < 1e-12);
    assert!(t.windows(2).all(|w| w[1] > w[0]));
    // 15 significant digits: one leading digit and 14 decimals.
    assert!(rows[1][1].split('e').next().unwrap().trim_start_matches('-').len() == 16);
}

#[test]
fn reduced_file_solves_but_has_no_bounds() {
    let dir = TempDir::new().unwrap();
    let path = example(dir.path(), "network20-reduced", &[]);
    let file = path.to_str().unwrap();
    let o = spocb(dir.path(), &["validate", file]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = spocb(dir.path(), &["solve", file, "--out", "."]);
    assert!(o.status.success(), "{}", stderr(&o));
    let value: f64 = stdout(&o).lines().next().unwrap().split_whitespace().last().unwrap().parse().unwrap();
    let direct = solve_reduced(&fixtures::network20_reduced::<f64>(), &SolveOptions::default()).unwrap().value;
    assert!((value - direct).abs() <= 1e-10 * direct.abs(), "{value} vs {direct}");
    let (h, _) = read_csv(&dir.path().join("trajectory.csv"));
    assert_eq!(h.len(), 1 + 4 + 20 + 4);
    let o = spocb(dir.path(), &["bounds", file]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn surrogate_without_oracle_gives_finite_bounds() {
    let dir = TempDir::new().unwrap();
    let path = example(dir.path(), "clustered-surrogate", &["--eps", "0.0125"]);
    let o = spocb(dir.path(), &["bounds", path.to_str().unwrap(), "--no-oracle", "--out", "."]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("(not computed)"));
    let (h, rows) = read_csv(&dir.path().join("bounds.csv"));
    assert_eq!(rows[0][column(&h, "oracle")], "");
    let upper: f64 = rows[0][column(&h, "upper")].parse().unwrap();
    let lower: f64 = rows[0][column(&h, "lower")].parse().unwrap();
    assert!(upper.is_finite() && lower.is_finite() && lower <= upper);
    assert_eq!(rows[0][column(&h, "eps")].parse::<f64>().unwrap(), 0.0125);
}

#[test]
fn eps_override_and_flags() {
    let dir = TempDir::new().unwrap();
    let path = example(dir.path(), "f8-aircraft", &[]);
    let file = path.to_str().unwrap();
    let o = spocb(dir.path(), &["bounds", file, "--eps", "0.02", "--no-oracle"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("epsilon          2.000000e-2"));
    let o = spocb(dir.path(), &["bounds", file, "--order", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = spocb(dir.path(), &["bounds", file, "--eps", "0.02,0.01"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_section_supplies_defaults() {
    let dir = TempDir::new().unwrap();
    let path = example(dir.path(), "scalar-toy", &[]);
    edit(&path, |v| v["run"] = serde_json::json!({ "sweep": [0.2, 0.1, 0.05], "out": "from-file" }));
    let o = spocb(dir.path(), &["sweep", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = read_csv(&dir.path().join("from-file/sweep.csv"));
    assert_eq!(rows.len(), 3);
}

#[test]
fn commands_without_out_touch_no_files() {
    let dir = TempDir::new().unwrap();
    let input = TempDir::new().unwrap();
    let path = example(input.path(), "scalar-toy", &[]);
    let file = path.to_str().unwrap();
    for args in [
        vec!["validate", file],
        vec!["solve", file],
        vec!["bounds", file],
        vec!["sweep", file, "--eps", "0.2,0.1,0.05"],
        vec!["example", "scalar-toy"],
    ] {
        let o = spocb(dir.path(), &args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    }
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn numeric_failure_exits_two() {
    let dir = TempDir::new().unwrap();
    let path = example(dir.path(), "scalar-toy", &[]);
    // A tolerance this tight drives the step size below its floor.
    let o = spocb(dir.path(), &["solve", path.to_str().unwrap(), "--tol", "1e-300"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("oracle"), "{}", stderr(&o));
}
