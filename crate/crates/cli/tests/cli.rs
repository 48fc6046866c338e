use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unlinked")).args(args).output().expect("spawn cli")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_writes_dataset_and_refuses_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    let args = ["gen", "--setting", "b", "--n", "50", "--sigma", "1", "--seed", "3", "--out-dir", p(&out)];
    assert_eq!(code(&run(&args)), 0);
    let x = std::fs::read_to_string(out.join("X.csv")).unwrap();
    assert_eq!(x.lines().count(), 51);
    assert_eq!(x.lines().next().unwrap(), "x1,x2,x3");
    let y = std::fs::read_to_string(out.join("Y.csv")).unwrap();
    assert_eq!(y.lines().count(), 51);

    let again = run(&args);
    assert_eq!(code(&again), 1);
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));

    let mut forced = vec!["--force"];
    forced.extend_from_slice(&args);
    assert_eq!(code(&run(&forced)), 0);
    assert_eq!(std::fs::read_to_string(out.join("X.csv")).unwrap(), x);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&["fit", "--no-such-flag"])), 1);
    assert_eq!(code(&run(&["gen", "--setting", "z", "--n", "5", "--sigma", "1", "--out-dir", "/nonexistent/x"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn mismatched_rows_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("X.csv");
    let y = dir.path().join("Y.csv");
    std::fs::write(&x, "x1,x2\n1,2\n3,4\n5,6\n").unwrap();
    std::fs::write(&y, "y\n1\n2\n").unwrap();
    let out = run(&["fit", "--x", p(&x), "--y", p(&y), "--sigma", "1"]);
    assert_eq!(code(&out), 1);

    std::fs::write(&x, "x1,x2\n1,2\n3,abc\n").unwrap();
    let out = run(&["fit", "--x", p(&x), "--y", p(&y), "--sigma", "1"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("X.csv:3:"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn infer_without_responses_exits_one() {
    let out = run(&["infer", "--oracle-gaussian", "1", "--sigma", "1"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn oracle_gaussian_posterior() {
    // Z ~ N(0,1), ε ~ N(0,1): Z | Y=2 is N(1, 1/2).
    let out = run(&["infer", "--oracle-gaussian", "1", "--sigma", "1", "--at", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "y0,mean,mode,q025,q975,status");
    let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
    let mean: f64 = cells[1].parse().unwrap();
    let mode: f64 = cells[2].parse().unwrap();
    let lo: f64 = cells[3].parse().unwrap();
    let hi: f64 = cells[4].parse().unwrap();
    assert!((mean - 1.0).abs() < 1e-3);
    assert!((mode - 1.0).abs() < 1e-3);
    let half = 1.959963984540054 * 0.5f64.sqrt();
    assert!((lo - (1.0 - half)).abs() < 2e-3 && (hi - (1.0 + half)).abs() < 2e-3, "{lo} {hi}");
    assert_eq!(cells[5], "ok");
}

#[test]
fn fit_then_infer_pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(code(&run(&["gen", "--setting", "a", "--n", "120", "--sigma", "1", "--out-dir", p(&data)])), 0);
    let x = data.join("X.csv");
    let y = data.join("Y.csv");
    let fit1 = dir.path().join("fit1.json");
    let fit2 = dir.path().join("fit2.json");
    for f in [&fit1, &fit2] {
        let out = run(&["fit", "--x", p(&x), "--y", p(&y), "--sigma", "1", "--starts", "4", "--out", p(f)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&fit1).unwrap(), std::fs::read(&fit2).unwrap());
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&fit1).unwrap()).unwrap();
    assert!(json["dist_to_solution_set"].as_f64().unwrap() < 1.0);
    assert_eq!(json["beta_hat"].as_array().unwrap().len(), 2);

    let y0 = dir.path().join("y0.csv");
    std::fs::write(&y0, "y\n0.5\n-3\n1e9\n").unwrap();
    let b1 = dir.path().join("b1.csv");
    let b2 = dir.path().join("b2.csv");
    let dens = dir.path().join("dens");
    for (b, extra) in [(&b1, Some(&dens)), (&b2, None)] {
        let mut args = vec!["infer", "--fit-json", p(&fit1), "--x", p(&x), "--sigma", "1", "--y0", p(&y0), "--out", p(b)];
        if let Some(d) = extra {
            args.extend_from_slice(&["--density-dir", p(d)]);
        }
        let out = run(&args);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let batch = std::fs::read_to_string(&b1).unwrap();
    assert_eq!(batch, std::fs::read_to_string(&b2).unwrap());
    let rows: Vec<&str> = batch.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].ends_with(",ok") && rows[2].ends_with(",ok"));
    assert!(rows[3].ends_with(",outside_support"));
    assert!(dens.join("fz.csv").exists());
    assert!(dens.join("conditional_0000.csv").exists());
}

#[test]
fn small_rate_study_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rates");
    let args = [
        "experiment", "--experiment", "rates", "--setting", "a", "--reps", "2", "--n-list", "60,120",
        "--reference-size", "5000", "--out-dir", p(&out),
    ];
    let res = run(&args);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["tidy.csv", "slopes.csv", "rates.svg", "summary.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let svg = std::fs::read_to_string(out.join("rates.svg")).unwrap();
    assert!(svg.len() < 1_000_000 && svg.starts_with("<svg") && !svg.contains("http://www.w3.org/1999/xlink"));
    let slopes = std::fs::read_to_string(out.join("slopes.csv")).unwrap();
    assert_eq!(slopes.lines().next().unwrap(), "setting,sigma2,w1_moment1,w1_moment2,w1_moment3,w1_q99");
    assert_eq!(code(&run(&args)), 1);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"setting":"a","n_list":[40],"reps":50,"test_size":10,"sigma2_list":[1.0]}"#).unwrap();
    let out = dir.path().join("mse");
    let res = run(&["experiment", "--experiment", "mse-grid", "--config", p(&cfg), "--reps", "2", "--out-dir", p(&out)]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["reps"], 2);
    assert_eq!(summary["config"]["n_list"], serde_json::json!([40]));
    assert!(out.join("mse.csv").exists());

    std::fs::write(&cfg, r#"{"reps": "many"}"#).unwrap();
    let bad = run(&["experiment", "--experiment", "comparison", "--config", p(&cfg), "--out-dir", p(&dir.path().join("x"))]);
    assert_eq!(code(&bad), 1);
}
