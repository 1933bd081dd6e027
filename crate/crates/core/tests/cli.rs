mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{fixture_path, orthodont, smooth_dataset, uniform};
use nmfcov::io::{read_csv, to_csv_string, LabeledMatrix, Orientation};
use serde_json::Value;
use tempfile::TempDir;

fn nmfcov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nmfcov")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv(path: PathBuf) -> LabeledMatrix {
    read_csv(&path, Orientation::IndividualsInColumns).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i:02}")).collect()
}

/// Smooth synthetic data with features stretched to [0, 5], so that among
/// bandwidths {0.1, 1, 10} the middle one generalizes best.
fn write_smooth(dir: &Path) -> (PathBuf, PathBuf) {
    let (y, u) = smooth_dataset(40, 5);
    let ids = labels("s", 40);
    let y = LabeledMatrix::new(labels("v", 3), ids.clone(), y).unwrap();
    let u = LabeledMatrix::new(vec!["u".into()], ids, u.values().scale(5.0)).unwrap();
    (
        write(dir, "y.csv", &to_csv_string(&y, "var")),
        write(dir, "u.csv", &to_csv_string(&u.transpose(), "id")),
    )
}

fn write_dummy(dir: &Path) -> PathBuf {
    let data = orthodont();
    let a = LabeledMatrix::new(
        vec!["intercept".into(), "male".into()],
        data.col_labels.clone(),
        common::male_dummy(&data.col_labels),
    )
    .unwrap();
    write(dir, "dummy.csv", &to_csv_string(&a, "covariate"))
}

#[test]
fn fit_identity_reproduces_covariate_free_fit() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fit");
    let y = fixture_path("orthodont.csv");
    let res = nmfcov(&["fit", "--y", path_str(&y), "--rank", "2", "--restarts", "10", "--out", path_str(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    for f in ["X.csv", "Theta.csv", "B.csv", "Yhat.csv", "probabilities.csv", "summary.json", "model.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let summary = json(out.join("summary.json"));
    let r2 = summary["r_squared"].as_f64().unwrap();
    assert!((r2 - 0.906).abs() < 0.01, "r2 {r2}");
    assert_eq!(summary["config"]["rank"], 2);
    assert_eq!(summary["config"]["restarts"], 10);
    assert_eq!(summary["seed"], 1);

    let x = csv(out.join("X.csv"));
    assert_eq!(x.row_labels, vec!["8", "10", "12", "14"]);
    for s in x.matrix.col_sums() {
        assert!((s - 1.0).abs() < 1e-9);
    }
    for s in csv(out.join("probabilities.csv")).matrix.col_sums() {
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn runs_are_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    let y = fixture_path("orthodont.csv");
    let run = |name: &str| {
        let out = dir.path().join(name);
        let res = nmfcov(&["fit", "--y", path_str(&y), "--out", path_str(&out)]);
        assert_eq!(code(&res), 0);
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["X.csv", "Theta.csv", "B.csv", "Yhat.csv", "probabilities.csv", "summary.json", "model.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn single_column_regression_mode() {
    let dir = TempDir::new().unwrap();
    let y = write(dir.path(), "y.csv", "obs,value\nt1,1.5\nt2,2.0\nt3,0.5\n");
    let out = dir.path().join("out");
    let res = nmfcov(&["fit", "--y", path_str(&y), "--rank", "1", "--out", path_str(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(csv(out.join("Theta.csv")).matrix.rows(), 1);
}

#[test]
fn validation_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let y = fixture_path("orthodont.csv");
    let out = dir.path().join("o");
    let res = nmfcov(&["fit", "--y", path_str(&y), "--rank", "0", "--out", path_str(&out)]);
    assert_eq!(code(&res), 2);
    assert_eq!(stderr(&res).lines().count(), 1);
    assert!(stderr(&res).starts_with("error: validation:"));

    let res = nmfcov(&["fit", "--y", path_str(&y), "--loss", "itakura", "--out", path_str(&out)]);
    assert_eq!(code(&res), 2);

    let (sy, su) = write_smooth(dir.path());
    let res = nmfcov(&["cv", "--y", path_str(&sy), "--features", path_str(&su), "--beta", "1", "--folds", "1", "--out", path_str(&out)]);
    assert_eq!(code(&res), 2, "{}", stderr(&res));

    let res = nmfcov(&["fit", "--y", path_str(&y), "--covariates", "kernel", "--out", path_str(&out)]);
    assert_eq!(code(&res), 2);

    let res = nmfcov(&["--help"]);
    assert_eq!(code(&res), 0);
}

#[test]
fn ingestion_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let empty = write(dir.path(), "empty.csv", "");
    let res = nmfcov(&["fit", "--y", path_str(&empty), "--out", path_str(&out)]);
    assert_eq!(code(&res), 3);

    let ragged = write(dir.path(), "ragged.csv", "id,a,b\nr1,1,2\nr2,3\n");
    assert_eq!(code(&nmfcov(&["fit", "--y", path_str(&ragged), "--out", path_str(&out)])), 3);

    let text = write(dir.path(), "text.csv", "id,a,b\nr1,1,two\nr2,3,4\n");
    let res = nmfcov(&["fit", "--y", path_str(&text), "--out", path_str(&out)]);
    assert_eq!(code(&res), 3);
    assert!(stderr(&res).contains("line 2, column 3"));

    let negative = write(dir.path(), "neg.csv", "id,a,b,c\nr1,1,2,3\nr2,3,-4,1\n");
    let res = nmfcov(&["fit", "--y", path_str(&negative), "--rank", "1", "--out", path_str(&out)]);
    assert_eq!(code(&res), 3);
    assert!(stderr(&res).contains("row 'r2', column 'b'"), "{}", stderr(&res));

    let res = nmfcov(&["fit", "--y", path_str(&negative), "--rank", "1", "--min-shift", "--out", path_str(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert_eq!(json(out.join("summary.json"))["input"]["min_shift"], -4.0);
}

#[test]
fn non_convergence_exits_5_only_when_required() {
    let dir = TempDir::new().unwrap();
    let y = fixture_path("orthodont.csv");
    let out = dir.path().join("o");
    let base = ["fit", "--y", path_str(&y), "--max-iter", "3", "--out", path_str(&out)];
    assert_eq!(code(&nmfcov(&base)), 0);
    let mut strict = base.to_vec();
    strict.push("--require-convergence");
    let res = nmfcov(&strict);
    assert_eq!(code(&res), 5);
    assert!(stderr(&res).starts_with("error: non-convergence:"));
}

#[test]
fn gcm_compare_on_fixture() {
    let dir = TempDir::new().unwrap();
    let y = fixture_path("orthodont.csv");
    let a = write_dummy(dir.path());
    let out = dir.path().join("g");
    let res = nmfcov(&[
        "gcm-compare", "--y", path_str(&y), "--covariates", path_str(&a), "--init", "kmeans", "--restarts", "1",
        "--out", path_str(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let cmp = json(out.join("comparison.json"));
    assert!(cmp["max_abs_diff"].as_f64().unwrap() < 0.5);
    assert!((cmp["r_squared_nmf"].as_f64().unwrap() - 0.427).abs() < 0.01);
    assert_eq!(cmp["theta_gcm"].as_array().unwrap().len(), 2);

    // Identity covariates have R = N, leaving no residual degrees of freedom.
    let res = nmfcov(&["gcm-compare", "--y", path_str(&y), "--out", path_str(&out)]);
    assert_eq!(code(&res), 4);
    assert!(stderr(&res).contains("insufficient data"));
}

#[test]
fn gcm_compare_on_noiseless_synthetic() {
    let dir = TempDir::new().unwrap();
    let mut r = common::rng(31);
    let x = uniform(&mut r, 4, 2, 0.1, 1.0);
    let theta = uniform(&mut r, 2, 2, 0.5, 2.0);
    let a = nmfcov::Matrix::from_fn(2, 20, |k, n| if k == 0 { 1.0 } else { n as f64 / 19.0 }).unwrap();
    let y = x.matmul(&theta).unwrap().matmul(&a).unwrap().add(&uniform(&mut r, 4, 20, -1e-6, 1e-6)).unwrap();
    let ids = labels("n", 20);
    let yp = write(dir.path(), "y.csv", &to_csv_string(&LabeledMatrix::new(labels("p", 4), ids.clone(), y).unwrap(), "var"));
    let ap = write(dir.path(), "a.csv", &to_csv_string(&LabeledMatrix::new(labels("a", 2), ids, a).unwrap(), "cov"));
    let out = dir.path().join("g");
    let res = nmfcov(&[
        "gcm-compare", "--y", path_str(&yp), "--covariates", path_str(&ap), "--tol", "1e-15", "--max-iter", "200000",
        "--out", path_str(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let diff = json(out.join("comparison.json"))["max_abs_diff"].as_f64().unwrap();
    assert!(diff < 1e-3, "max_abs_diff {diff}");
}

#[test]
fn cv_selects_interior_beta_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let (y, u) = write_smooth(dir.path());
    let run = |name: &str| {
        let out = dir.path().join(name);
        let res = nmfcov(&[
            "cv", "--y", path_str(&y), "--features", path_str(&u), "--beta", "0.1,1,10", "--restarts", "1",
            "--max-iter", "2000", "--out", path_str(&out),
        ]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        out
    };
    let a = run("a");
    assert_eq!(json(a.join("best.json"))["beta"], 1.0);
    let curve = fs::read_to_string(a.join("cv_curve.csv")).unwrap();
    assert!(curve.starts_with("beta,rank,gamma,mean_error,fold1,"));
    assert_eq!(curve.lines().count(), 4);
    let b = run("b");
    assert_eq!(fs::read(a.join("cv_curve.csv")).unwrap(), fs::read(b.join("cv_curve.csv")).unwrap());
}

#[test]
fn predict_from_kernel_model() {
    let dir = TempDir::new().unwrap();
    let (y, u) = write_smooth(dir.path());
    let fit_out = dir.path().join("fit");
    let res = nmfcov(&[
        "fit", "--y", path_str(&y), "--covariates", "kernel", "--features", path_str(&u), "--beta", "1",
        "--scale-features", "--max-iter", "500", "--out", path_str(&fit_out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    let pred_out = dir.path().join("pred");
    let res = nmfcov(&[
        "predict", "--model", path_str(&fit_out), "--features", path_str(&u), "--individuals", "rows", "--out",
        path_str(&pred_out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let yhat = csv(fit_out.join("Yhat.csv"));
    let pred = csv(pred_out.join("predictions.csv"));
    assert_eq!(pred.col_labels, yhat.col_labels);
    assert!(pred.matrix.max_abs_diff(&yhat.matrix).unwrap() < 1e-12);

    let wrong_dim = write(dir.path(), "w.csv", "id,u,v\nq1,0.1,0.2\n");
    let res = nmfcov(&[
        "predict", "--model", path_str(&fit_out), "--features", path_str(&wrong_dim), "--individuals", "rows",
        "--out", path_str(&pred_out),
    ]);
    assert_eq!(code(&res), 3, "{}", stderr(&res));
}

#[test]
fn predict_on_two_dimensional_grid() {
    let dir = TempDir::new().unwrap();
    let mut r = common::rng(17);
    let ids = labels("st", 30);
    let u = uniform(&mut r, 2, 30, 0.0, 1.0);
    let y = nmfcov::Matrix::from_fn(3, 30, |p, n| 1.0 + (p as f64 + 1.0) * u.get(0, n) + u.get(1, n) * u.get(1, n)).unwrap();
    let yp = write(dir.path(), "y.csv", &to_csv_string(&LabeledMatrix::new(labels("m", 3), ids.clone(), y).unwrap(), "month"));
    let up = write(
        dir.path(),
        "u.csv",
        &to_csv_string(&LabeledMatrix::new(vec!["lon".into(), "lat".into()], ids, u).unwrap().transpose(), "id"),
    );
    let fit_out = dir.path().join("fit");
    let res = nmfcov(&[
        "fit", "--y", path_str(&yp), "--covariates", "kernel", "--features", path_str(&up), "--beta", "5",
        "--scale-features", "--max-iter", "300", "--out", path_str(&fit_out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));

    let mut grid = String::from("id,lon,lat\n");
    for i in 0..20 {
        for j in 0..20 {
            grid.push_str(&format!("g{i}_{j},{},{}\n", i as f64 / 19.0, j as f64 / 19.0));
        }
    }
    let gp = write(dir.path(), "grid.csv", &grid);
    let out = dir.path().join("pred");
    let res = nmfcov(&[
        "predict", "--model", path_str(&fit_out), "--features", path_str(&gp), "--individuals", "rows", "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let probs = csv(out.join("probabilities.csv"));
    assert_eq!(probs.matrix.shape(), (2, 400));
}

#[test]
fn cluster_writes_assignments() {
    let dir = TempDir::new().unwrap();
    let y = fixture_path("orthodont.csv");
    let out = dir.path().join("c");
    let res = nmfcov(&["cluster", "--y", path_str(&y), "--out", path_str(&out)]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let text = fs::read_to_string(out.join("clusters.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("id,cluster,probability"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 27);
    assert!(rows.iter().all(|l| l.contains(",basis1,") || l.contains(",basis2,")));
    assert!(out.join("probabilities.csv").exists());
}
