use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nehari_forge::scalar::least_energy_scalar;
use nehari_forge::Domain;
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nehari-forge"));
    c.env_remove("NEHARI_FORGE_SEED");
    c
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(dir: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const SMALL: &str = "\
[domain]
lengths = 1, 1
nodes = 24, 24

[params]
p = 3
mu = 1, 2
lambda =
    0, -0.5
    -0.5, 0
";

#[test]
fn solve_fixture_is_certified_and_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = run(bin().arg("solve").arg(fixture("lotka64.cfg")).arg("--out").arg(dir));
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let ra = report(&a);
    assert_eq!(ra, report(&b));
    let rep = &ra["report"];
    assert!(rep["relative_residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(rep["certified"], Value::Bool(true));
    assert_eq!(ra["seed"], 0);
    for f in ["trace.csv", "u1.csv", "u2.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
    let last = trace.lines().last().unwrap();
    assert_eq!(last.split(',').next().unwrap().parse::<f64>().unwrap(), 1.0);
}

#[test]
fn solve_at_intermediate_t() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL);
    let o = run(bin().arg("solve").arg(&cfg).args(["--t", "0.5", "--out"]).arg(tmp.path()));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report(tmp.path())["t"], 0.5);
    let o = run(bin().arg("solve").arg(&cfg).args(["--t", "1.5", "--out"]).arg(tmp.path()));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_exponents_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}alpha =\n    0, 2\n    1, 0\n");
    let cfg = write_config(tmp.path(), "bad.cfg", &text);
    let o = run(bin().arg("solve").arg(&cfg).arg("--out").arg(tmp.path()));
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("alpha[0][1] + beta[0][1] = 3 must be < p = 3"), "{err}");
}

#[test]
fn syntax_errors_name_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.cfg", "[domain]\nlengths = 1, 1\nnodes = x\n");
    let o = run(bin().arg("solve").arg(&cfg));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    let o = run(bin().arg("solve").arg(tmp.path().join("missing.cfg")));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn decoupled_config_matches_scalar_solves() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL.replace("0, -0.5\n    -0.5, 0", "0, 0\n    0, 0");
    let cfg = write_config(tmp.path(), "free.cfg", &text);
    let o = run(bin().arg("solve").arg(&cfg).arg("--out").arg(tmp.path()));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("decouple"));
    let rep = report(tmp.path());
    let d = Domain::unit_square(24).unwrap();
    for (i, mu) in [1.0, 2.0].into_iter().enumerate() {
        let w = least_energy_scalar(mu, 3.0, &d).unwrap();
        let norm = rep["report"]["norms"][i].as_f64().unwrap();
        assert!((norm - w.h1_norm()).abs() <= 1e-8 * norm);
    }
}

#[test]
fn scaling_solve_cases() {
    let o = run(bin().args(["scaling-solve", "--p", "3", "--a", "2,8", "--b", "2,1"]));
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let s: Vec<f64> = v["s"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((s[0] - 1.0).abs() < 1e-12 && (s[1] - 8f64.sqrt()).abs() < 1e-12);
    assert_eq!(v["degree_sign"], 1);

    let o = run(bin().args(["scaling-solve", "--p", "3", "--a", "1,1", "--b", "2,2", "--d", "0,1;1,0"]));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    for x in v["s"].as_array().unwrap() {
        assert!((x.as_f64().unwrap() - 1.0).abs() < 1e-12);
    }

    let o = run(bin().args(["scaling-solve", "--p", "3", "--a", "1,1", "--b", "0,2"]));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no zero"), "{}", stderr(&o));

    let o = run(bin().args(["scaling-solve", "--p", "3", "--a", "1,1", "--b", "1"]));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sync_commands() {
    let o = run(bin().arg("sync-check").arg(fixture("sync64.cfg")));
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["holds"], true);
    assert_eq!(v["a"], 1.0);
    assert_eq!(v["rho"], 0.5);

    let tmp = tempfile::tempdir().unwrap();
    let ratio = SMALL.replace("mu = 1, 2", "mu = 1, 4").replace("-0.5, 0", "-1, 0").replace("0, -0.5", "0, -1");
    let cfg = write_config(tmp.path(), "ratio.cfg", &ratio);
    let v: Value = serde_json::from_str(&stdout(&run(bin().arg("sync-check").arg(&cfg)))).unwrap();
    assert_eq!(v["reason"], "ratio_mismatch");
    let o = run(bin().arg("sync-solve").arg(&cfg).arg("--out").arg(tmp.path()));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("synchronization requires 2"), "{}", stderr(&o));

    let expo = format!("{ratio}alpha =\n    0, 1\n    1.5, 0\n");
    let cfg = write_config(tmp.path(), "expo.cfg", &expo);
    let v: Value = serde_json::from_str(&stdout(&run(bin().arg("sync-check").arg(&cfg)))).unwrap();
    assert_eq!(v["reason"], "exponent_mismatch");

    let good = ratio.replace("0, -1", "0, -2");
    let cfg = write_config(tmp.path(), "good.cfg", &good);
    let out = tmp.path().join("pair");
    let o = run(bin().arg("sync-solve").arg(&cfg).arg("--out").arg(&out));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep = report(&out);
    assert!(rep["report"]["relative_residual"].as_f64().unwrap() <= 1e-7);
    assert!(out.join("u2.csv").exists());
}

#[test]
fn single_point_sweep_matches_solve() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sweep.cfg", &format!("{SMALL}\n[sweep]\nmultipliers = 1\n"));
    let o = run(bin().arg("solve").arg(&cfg).arg("--out").arg(tmp.path()));
    assert_eq!(o.status.code(), Some(0));
    let rep = report(tmp.path());
    let csv = tmp.path().join("sweep.csv");
    let o = run(bin().arg("sweep-lambda").arg(&cfg).arg("--out").arg(&csv));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "kappa,norm_u1,norm_u2,overlap_12,residual,status");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0].parse::<f64>().unwrap(), 1.0);
    for i in 0..2 {
        let swept: f64 = row[1 + i].parse().unwrap();
        let solved = rep["report"]["norms"][i].as_f64().unwrap();
        assert!((swept - solved).abs() <= 1e-12 * solved);
    }
    assert_eq!(row[5], "ok");
}

#[test]
fn sweep_failures_are_flagged_not_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[solver]\nguard = 40\n\n[sweep]\nmultipliers = 1, 1000\n")
        .replace("mu = 1, 2", "mu = 1, 4")
        .replace("0, -0.5", "0, -2")
        .replace("-0.5, 0", "-1, 0");
    let cfg = write_config(tmp.path(), "guarded.cfg", &text);
    let o = run(bin().arg("sweep-lambda").arg(&cfg));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert!(rows[0].ends_with(",ok"), "{out}");
    assert!(rows[1].starts_with("1.0000000000000000e3,") && rows[1].ends_with(",failed"), "{out}");
    assert!(stderr(&o).contains("kappa = 1000"));
}

#[test]
fn unbounded_table() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "[domain]\nlengths = 1, 1\nnodes = 24, 24\n\n[unbounded]\nmu = 1\np = 3\nq = 2\na = 1, 10, 100\nworkers = 2\n";
    let cfg = write_config(tmp.path(), "u.cfg", text);
    let o = run(bin().arg("unbounded").arg(&cfg));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let norms: Vec<f64> = out.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(norms.len(), 3);
    assert!(norms.windows(2).all(|w| w[1] > w[0]), "{out}");
    let bad = write_config(tmp.path(), "bad.cfg", &text.replace("q = 2", "q = 4"));
    assert_eq!(run(bin().arg("unbounded").arg(&bad)).status.code(), Some(1));
}

#[test]
fn selftest_passes_and_is_reproducible() {
    let a = run(bin().arg("selftest"));
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    let b = run(bin().arg("selftest"));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("seed=0 "));
}

#[test]
fn selftest_seed_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.cfg", "[solver]\nseed = 5\n\n[selftest]\nn = 16\ncases = 5\n");
    let from_cfg = run(bin().arg("selftest").arg("--config").arg(&cfg));
    assert!(stdout(&from_cfg).contains("seed=5 "), "{}", stdout(&from_cfg));
    let from_env = run(bin().arg("selftest").arg("--config").arg(&cfg).env("NEHARI_FORGE_SEED", "9"));
    assert!(stdout(&from_env).contains("seed=9 "));
    let from_flag =
        run(bin().arg("selftest").arg("--config").arg(&cfg).args(["--seed", "11"]).env("NEHARI_FORGE_SEED", "9"));
    assert!(stdout(&from_flag).contains("seed=11 "));
    let env_default = run(bin().arg("selftest").env("NEHARI_FORGE_SEED", "3"));
    assert!(stdout(&env_default).contains("seed=3 "));
    let junk = run(bin().arg("selftest").env("NEHARI_FORGE_SEED", "x"));
    assert_eq!(junk.status.code(), Some(1));
}

#[test]
fn seed_override_reaches_solve_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.cfg", SMALL);
    let o = run(bin().arg("solve").arg(&cfg).arg("--out").arg(tmp.path()).env("NEHARI_FORGE_SEED", "42"));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(tmp.path())["seed"], 42);
}

#[test]
fn corrupted_tolerance_fails_the_named_check() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.cfg", "[selftest]\nn = 16\ncases = 5\nresidual_tol = 1e-30\n");
    let o = run(bin().arg("selftest").arg("--config").arg(&cfg));
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    let failing: Vec<&str> = out.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert!(failing.iter().any(|l| l.contains("scalar.residual")), "{out}");
}
