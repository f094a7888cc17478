use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qcompare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcompare")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = qcompare(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Columns of a CSV with a header row.
fn table(path: PathBuf) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(str::to_string).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for line in lines {
        for (c, v) in cols.iter_mut().zip(line.split(',')) {
            c.push(v.parse().unwrap());
        }
    }
    (header, cols)
}

fn column(path: PathBuf, name: &str) -> Vec<f64> {
    let (h, cols) = table(path);
    let i = h.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name} in {h:?}"));
    cols[i].clone()
}

fn lyapunov_run(dir: &Path) -> PathBuf {
    let out = dir.join("ly");
    ok(&[
        "design", "--scenario", "bell", "--method", "lyapunov", "--tf", "20", "--nt", "400", "--kappa", "0.1", "--seed", "7",
        "--out", p(&out),
    ]);
    out
}

fn iterative_run(dir: &Path) -> PathBuf {
    let out = dir.join("it");
    ok(&["design", "--scenario", "bell", "--method", "iterative", "--tf", "20", "--nt", "400", "--iters", "3", "--out", p(&out)]);
    out
}

#[test]
fn missing_required_flag_is_a_config_error_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let res = qcompare(&["design", "--scenario", "bell", "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn lyapunov_kick_without_seed_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let res = qcompare(&["design", "--scenario", "bell", "--method", "lyapunov", "--tf", "20", "--nt", "400", "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn unsupported_combination_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let res = qcompare(&["design", "--scenario", "bell", "--method", "geometric", "--out", p(&dir.path().join("g"))]);
    assert_eq!(res.status.code(), Some(2));
    let res = qcompare(&["design", "--scenario", "nope", "--method", "iterative", "--out", p(&dir.path().join("n"))]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn zero_field_leaves_the_ground_state_alone() {
    let dir = TempDir::new().unwrap();
    let run = iterative_run(dir.path());
    let field = dir.path().join("zero.csv");
    // Rows are left-endpoint samples, one per step.
    let mut text = String::from("t,f1\n");
    for k in 0..100 {
        text.push_str(&format!("{},0\n", k as f64 * 0.2));
    }
    fs::write(&field, text).unwrap();
    let out = dir.path().join("sim");
    ok(&["simulate", "--system", p(&run.join("system.json")), "--field", p(&field), "--out", p(&out)]);
    let rho11 = column(out.join("trajectory.csv"), "rho11");
    assert_eq!(rho11.len(), 101);
    assert!(rho11.iter().all(|r| (r - 1.0).abs() < 1e-12));
}

#[test]
fn grid_mismatch_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let run = iterative_run(dir.path());
    let res = qcompare(&["simulate", "--from-run", p(&run), "--nt", "401", "--out", p(&dir.path().join("sim"))]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn non_uniform_field_is_rejected() {
    let dir = TempDir::new().unwrap();
    let run = iterative_run(dir.path());
    let field = dir.path().join("bad.csv");
    fs::write(&field, "t,f1\n0,0\n1,0\n3,0\n").unwrap();
    let res = qcompare(&["simulate", "--system", p(&run.join("system.json")), "--field", p(&field), "--out", p(&dir.path().join("s"))]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn lyapunov_field_replays_to_the_designed_trajectory() {
    let dir = TempDir::new().unwrap();
    let run = lyapunov_run(dir.path());
    let out = dir.path().join("replay");
    ok(&["simulate", "--from-run", p(&run), "--out", p(&out)]);
    for name in ["rho11", "abs_rho14", "distance"] {
        let a = column(run.join("trajectory.csv"), name);
        let b = column(out.join("trajectory.csv"), name);
        assert_eq!(a.len(), b.len());
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{name}: {diff}");
    }
    let v = column(run.join("v_series.csv"), "V");
    assert_eq!(v.len(), 401);
}

#[test]
fn bloch_and_density_replays_agree() {
    let dir = TempDir::new().unwrap();
    let run = iterative_run(dir.path());
    let (b, d) = (dir.path().join("b"), dir.path().join("d"));
    ok(&["simulate", "--from-run", p(&run), "--rep", "bloch", "--out", p(&b)]);
    ok(&["simulate", "--from-run", p(&run), "--rep", "density", "--out", p(&d)]);
    let (hb, cb) = table(b.join("trajectory.csv"));
    let (hd, cd) = table(d.join("trajectory.csv"));
    assert_eq!(hb, hd);
    for (x, y) in cb.iter().zip(&cd) {
        for (u, v) in x.iter().zip(y) {
            assert!((u - v).abs() < 1e-8);
        }
    }
    let (sb, sd) = (json(b.join("summary.json")), json(d.join("summary.json")));
    assert!((sb["final_fidelity"].as_f64().unwrap() - sd["final_fidelity"].as_f64().unwrap()).abs() < 1e-8);
}

#[test]
fn comparing_a_run_with_itself_gives_identical_rows() {
    let dir = TempDir::new().unwrap();
    let run = lyapunov_run(dir.path());
    let out = dir.path().join("cmp");
    ok(&["compare", p(&run), p(&run), "--out", p(&out)]);
    let text = fs::read_to_string(out.join("comparison.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], rows[1]);
    let cmp = json(out.join("comparison.json"));
    assert_eq!(cmp["rows"][0]["method"], "lyapunov");
}

#[test]
fn comparing_the_two_bell_designs() {
    let dir = TempDir::new().unwrap();
    let (ly, it) = (lyapunov_run(dir.path()), iterative_run(dir.path()));
    let out = dir.path().join("cmp");
    ok(&["compare", p(&it), p(&ly), "--out", p(&out), "--threshold", "0.9"]);
    let cmp = json(out.join("comparison.json"));
    let rows = cmp["rows"].as_array().unwrap();
    assert_eq!(rows[0]["method"], "iterative");
    assert_eq!(rows[1]["method"], "lyapunov");
    for r in rows {
        assert!(r["fluence"].as_f64().unwrap() > 0.0);
        assert!(r["final_figure_of_merit"].as_f64().unwrap() <= 0.5 + 1e-9);
    }
}

#[test]
fn runs_on_different_systems_cannot_be_compared() {
    let dir = TempDir::new().unwrap();
    let it = iterative_run(dir.path());
    let qd = dir.path().join("qd");
    ok(&["design", "--scenario", "qd5", "--method", "iterative", "--tf-ps", "0.1", "--iters", "1", "--out", p(&qd)]);
    let res = qcompare(&["compare", p(&it), p(&qd), "--out", p(&dir.path().join("cmp"))]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn small_iterative_runs_write_a_full_run_directory() {
    let dir = TempDir::new().unwrap();
    let run = iterative_run(dir.path());
    for f in ["field.csv", "system.json", "spectrum.csv", "trajectory.csv", "summary.json", "metadata.json", "convergence.csv", "scenario.json"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let j = column(run.join("convergence.csv"), "J");
    assert_eq!(j.len(), 4);
    assert!(j.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    let meta = json(run.join("metadata.json"));
    assert_eq!(meta["grid"]["steps"], 400);
}

#[test]
fn geometric_design_reports_every_dot() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("geo");
    ok(&["design", "--scenario", "qd5", "--method", "geometric", "--targets", "1,3", "--duration-ps", "2", "--out", p(&out)]);
    let (h, cols) = table(out.join("report.csv"));
    assert_eq!(h, ["dot", "excitation", "infidelity"]);
    assert_eq!(cols[0], [1.0, 2.0, 3.0, 4.0, 5.0]);
    assert!(cols[1][0] > 0.99 && cols[1][2] > 0.99);
    assert!(json(out.join("plan.json"))["pulses"].as_array().unwrap().len() == 2);
}
