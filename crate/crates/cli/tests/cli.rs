use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn airga(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_airga"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

/// Drops wall-clock fields so reports of identical runs compare equal.
fn strip_times(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| k != "seconds" && k != "solve_seconds" && k != "wall_seconds");
            map.values_mut().for_each(strip_times);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_times),
        _ => {}
    }
}

#[test]
fn generate_writes_the_file_set_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = airga(&[
            "generate",
            "--family",
            "spd-synthetic",
            "--n",
            "60",
            "--seed",
            "5",
            "--out",
            path(d),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in [
        "M.mtx", "D.mtx", "K.mtx", "F.mtx", "Cp.mtx", "Cv.mtx", "meta.txt",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn invalid_size_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = airga(&["generate", "--n", "2", "--out", path(dir.path())]);
    assert_eq!(code(&out), 64);
    assert_eq!(code(&airga(&["frobnicate"])), 64);
}

#[test]
fn direct_reduce_reports_zero_residual_and_passes_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = airga(&["reduce", "--n", "200", "--out", path(&run)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "M_hat.mtx",
        "D_hat.mtx",
        "K_hat.mtx",
        "F_hat.mtx",
        "Cp_hat.mtx",
        "Cv_hat.mtx",
        "V.mtx",
    ] {
        assert!(run.join(f).exists(), "{f}");
    }
    let report = read_report(&run);
    assert_eq!(report["schema_version"], 1);
    for it in report["iterations"].as_array().unwrap() {
        assert_eq!(it["eta_norm_f"].as_f64().unwrap(), 0.0);
    }
    let diag = airga(&["diagnose", path(&run)]);
    assert_eq!(code(&diag), 0, "{}", String::from_utf8_lossy(&diag.stdout));
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let run = dir.path().join(name);
        let out = airga(&[
            "reduce",
            "--n",
            "150",
            "--solver",
            "rcg",
            "--rel-tol",
            "1e-8",
            "--out",
            path(&run),
        ]);
        assert_eq!(code(&out), 0);
        let mut r = read_report(&run);
        strip_times(&mut r);
        reports.push(r);
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "family=beam1d\nn=120\nsolver=cg\nrel_tol=1e-6\nr_max=6\n",
    )
    .unwrap();
    let run = dir.path().join("run");
    let out = airga(&[
        "reduce",
        "--config",
        path(&cfg),
        "--r-max",
        "8",
        "--out",
        path(&run),
    ]);
    assert_eq!(code(&out), 0);
    let report = read_report(&run);
    assert_eq!(report["config"]["r_max"], 8);
    assert_eq!(report["config"]["solver"]["mode"], "cg");
    assert_eq!(report["model"]["n"], 120);
}

#[test]
fn unconverged_reduction_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = airga(&[
        "reduce",
        "--n",
        "100",
        "--max-outer",
        "1",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn solver_failure_exits_three_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = airga(&[
        "reduce",
        "--n",
        "100",
        "--solver",
        "cg",
        "--rel-tol",
        "1e-12",
        "--max-iter",
        "2",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&out), 3);
    let diag: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("error.json")).unwrap())
            .unwrap();
    assert_eq!(diag["error"], "solver_failure");
}

#[test]
fn diagnose_flags_large_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let out = airga(&["reduce", "--n", "100", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0);
    let mut report = read_report(dir.path());
    report["theorem2_checks"]["z_norm_lt_1"] = Value::Bool(false);
    std::fs::write(dir.path().join("report.json"), report.to_string()).unwrap();
    let diag = airga(&["diagnose", path(dir.path())]);
    assert_eq!(code(&diag), 1);
    assert!(String::from_utf8_lossy(&diag.stdout).contains("Theorem 2(c) violated"));
}

#[test]
fn diagnose_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&airga(&["diagnose", path(dir.path())])), 4);
    std::fs::write(dir.path().join("report.json"), "{ not json").unwrap();
    assert_eq!(code(&airga(&["diagnose", path(dir.path())])), 5);
}

#[test]
fn reduce_from_stored_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model");
    assert_eq!(
        code(&airga(&["generate", "--n", "80", "--out", path(&model)])),
        0
    );
    let run = dir.path().join("run");
    let out = airga(&["reduce", "--model-dir", path(&model), "--out", path(&run)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_report(&run)["model"]["n"], 80);
    assert_eq!(
        code(&airga(&[
            "reduce",
            "--model-dir",
            path(&dir.path().join("nope"))
        ])),
        4
    );
}

#[test]
fn sweep_writes_trend_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = airga(&[
        "sweep",
        "--n",
        "1000",
        "--tolerances",
        "1e-6,1e-12",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("trends.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header.join(","),
        "iteration,tol,h2_error,eta_f,xpinv_f,z2,cg_iters,rcg_iters,cg_secs,rcg_secs"
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let last_iter = rows
        .iter()
        .map(|r| r[0].parse::<usize>().unwrap())
        .max()
        .unwrap();
    let finals: Vec<(f64, f64, f64)> = rows
        .iter()
        .filter(|r| r[0].parse::<usize>().unwrap() == last_iter)
        .map(|r| {
            (
                r[1].parse().unwrap(),
                r[2].parse().unwrap(),
                r[3].parse().unwrap(),
            )
        })
        .collect();
    assert_eq!(finals.len(), 2);
    assert!(
        finals[1].1 <= finals[0].1,
        "h2 error must not grow: {finals:?}"
    );
    assert!(finals[1].2 < finals[0].2, "eta must shrink: {finals:?}");
    assert!(dir.path().join("accuracy.csv").exists());
}

#[test]
fn sweep_needs_two_tolerances() {
    let dir = tempfile::tempdir().unwrap();
    let out = airga(&[
        "sweep",
        "--n",
        "100",
        "--tolerances",
        "1e-6",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&out), 64);
}
