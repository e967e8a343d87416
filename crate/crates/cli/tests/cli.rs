use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn fdm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdm")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_owned)
        .collect()
}

fn lambdas(path: &Path) -> Vec<f64> {
    data_rows(path).iter().map(|r| r.split(',').nth(2).unwrap().parse().unwrap()).collect()
}

#[test]
fn sample_counts() {
    let tmp = TempDir::new().unwrap();
    let o = fdm(tmp.path(), &["sample", "--manifold", "circle", "--kind", "uniform", "--n", "500", "--out", "pts.csv"]);
    assert_eq!(code(&o), 0, "{o:?}");
    assert_eq!(data_rows(&tmp.path().join("pts.csv")).len(), 500);

    let o = fdm(tmp.path(), &["sample", "--manifold", "sphere", "--level", "4", "--out", "s.csv"]);
    assert_eq!(code(&o), 0);
    assert_eq!(data_rows(&tmp.path().join("s.csv")).len(), 2562);
}

#[test]
fn sample_to_stdout_and_bad_names() {
    let tmp = TempDir::new().unwrap();
    let o = fdm(tmp.path(), &["--reproducible", "sample", "--manifold", "interval", "--n", "7"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(!text.contains("generated_unix"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 8);

    assert_eq!(code(&fdm(tmp.path(), &["sample", "--manifold", "circle", "--kind", "bogus", "--n", "5"])), 2);
    assert_eq!(code(&fdm(tmp.path(), &["sample", "--manifold", "torus", "--n", "5"])), 2);
    assert_eq!(code(&fdm(tmp.path(), &["sample", "--manifold", "sphere", "--n", "5"])), 2);
    assert_eq!(code(&fdm(tmp.path(), &["sample", "--manifold", "circle"])), 2);
}

#[test]
fn fdm_local_circle_recovers_unit_pair() {
    let tmp = TempDir::new().unwrap();
    fdm(tmp.path(), &["sample", "--manifold", "circle", "--n", "500", "--out", "pts.csv"]);
    let o = fdm(
        tmp.path(),
        &["fdm", "--input", "pts.csv", "--beta", "2", "--eps", "2.44140625e-4", "--l", "60", "--out", "o", "--dump-heat", "--svg"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("branch: local"));
    assert!(out.contains("elapsed:"));
    let l = lambdas(&tmp.path().join("o/eigenvalues.csv"));
    assert_eq!(l.len(), 61);
    assert!((l[1] - 1.0).abs() < 1e-2 && (l[2] - 1.0).abs() < 1e-2, "{:?}", &l[..3]);
    assert_eq!(data_rows(&tmp.path().join("o/eigenfunctions.csv")).len(), 500);
    assert!(fs::read(tmp.path().join("o/heat.fdmd")).unwrap().starts_with(b"FDMD"));
    assert!(fs::read_to_string(tmp.path().join("o/spectrum.svg")).unwrap().contains("version=\"1.1\""));
}

#[test]
fn fdm_nonlocal_branch_and_input_errors() {
    let tmp = TempDir::new().unwrap();
    fdm(tmp.path(), &["sample", "--manifold", "circle", "--n", "200", "--out", "pts.csv"]);
    let o = fdm(tmp.path(), &["fdm", "--input", "pts.csv", "--beta", "1", "--eps", "0.01", "--out", "o"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("branch: nonlocal"));

    assert_eq!(code(&fdm(tmp.path(), &["fdm", "--input", "missing.csv", "--beta", "1", "--eps", "0.01"])), 2);
    fs::write(tmp.path().join("junk.csv"), "not,a\ncloud\n").unwrap();
    assert_eq!(code(&fdm(tmp.path(), &["fdm", "--input", "junk.csv", "--beta", "1", "--eps", "0.01"])), 2);
    assert_eq!(code(&fdm(tmp.path(), &["fdm", "--input", "pts.csv", "--beta", "1", "--eps", "-1"])), 2);
    assert_eq!(code(&fdm(tmp.path(), &["fdm", "--input", "pts.csv", "--beta", "1", "--eps", "0.01", "--analytic-geodesic"])), 2);
    // more eigenpairs than points is a pipeline failure, not a usage error
    let o = fdm(tmp.path(), &["fdm", "--input", "pts.csv", "--beta", "1", "--eps", "0.01", "--l", "400"]);
    assert!(matches!(code(&o), 2 | 3));
}

#[test]
fn large_sphere_graph_geodesics_need_allow_long() {
    let tmp = TempDir::new().unwrap();
    fdm(tmp.path(), &["sample", "--manifold", "sphere", "--level", "5", "--out", "s5.csv"]);
    let o = fdm(tmp.path(), &["fdm", "--input", "s5.csv", "--beta", "1", "--eps", "0.01"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--allow-long"));
}

#[test]
fn config_file_precedence_and_unknown_keys() {
    let tmp = TempDir::new().unwrap();
    fdm(tmp.path(), &["sample", "--manifold", "circle", "--n", "200", "--out", "pts.csv"]);
    fs::write(tmp.path().join("run.cfg"), "# pipeline\nbeta = 2\neps = 0.001\nl = 4\nout = from_cfg\n").unwrap();

    let o = fdm(tmp.path(), &["fdm", "--config", "run.cfg", "--input", "pts.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(lambdas(&tmp.path().join("from_cfg/eigenvalues.csv")).len(), 5);

    let o = fdm(tmp.path(), &["fdm", "--config", "run.cfg", "--input", "pts.csv", "--l", "6", "--out", "from_flag"]);
    assert_eq!(code(&o), 0);
    assert_eq!(lambdas(&tmp.path().join("from_flag/eigenvalues.csv")).len(), 7);

    fs::write(tmp.path().join("bad.cfg"), "beta = 2\nwibble = 1\n").unwrap();
    let o = fdm(tmp.path(), &["fdm", "--config", "bad.cfg", "--input", "pts.csv", "--eps", "0.01"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("wibble"));

    assert_eq!(code(&fdm(tmp.path(), &["fdm", "--config", "absent.cfg", "--input", "pts.csv"])), 2);
}

#[test]
fn reproducible_output_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let run = |out: &str| {
        let o = fdm(tmp.path(), &["--reproducible", "validate", "--experiment", "interval", "--n", "200", "--out", out]);
        assert_eq!(code(&o), 0);
        fs::read(tmp.path().join(out).join("interval.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));

    let o = fdm(tmp.path(), &["validate", "--experiment", "interval", "--n", "200", "--out", "c"]);
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(tmp.path().join("c/interval.csv")).unwrap().starts_with("# generated_unix="));
}

#[test]
fn validate_interval_writes_three_curves() {
    let tmp = TempDir::new().unwrap();
    let o = fdm(tmp.path(), &["--reproducible", "validate", "--experiment", "interval", "--out", "v", "--svg"]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(tmp.path().join("v/interval.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# {"));
    assert_eq!(lines.next().unwrap(), "x,fdm,regional,spectral");
    // endpoints are excluded
    assert_eq!(lines.count(), 498);
    assert!(tmp.path().join("v/interval.svg").exists());
    assert_eq!(code(&fdm(tmp.path(), &["validate", "--experiment", "interval", "--beta", "2"])), 2);
}

#[test]
fn validate_circle_sweep() {
    let tmp = TempDir::new().unwrap();
    let o = fdm(
        tmp.path(),
        &["validate", "--manifold", "circle", "--n", "200", "--beta", "2", "--eps", "0.01,0.001,0.0001", "--out", "v", "--svg"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("power-law slope"));
    assert_eq!(data_rows(&tmp.path().join("v/sweep.csv")).len(), 3);
    for f in ["eigenvalues.csv", "rmse.svg", "spectrum.svg"] {
        assert!(tmp.path().join("v").join(f).exists(), "{f}");
    }
}

#[test]
fn validate_sphere_with_analytic_geodesics() {
    let tmp = TempDir::new().unwrap();
    let o = fdm(
        tmp.path(),
        &["validate", "--manifold", "sphere", "--level", "2", "--beta", "1", "--analytic-geodesic", "--eps", "0.05", "--l", "8", "--out", "v"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("analytic great-circle"));
    assert!(!out.contains("graph geodesics"));
}

#[test]
fn krr_table_and_summary() {
    let tmp = TempDir::new().unwrap();
    let o = fdm(tmp.path(), &["krr", "--n", "300", "--sigma", "0.05", "--seed", "7", "--eps-count", "4", "--delta-count", "4", "--out", "k"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("exponential") && out.contains("polynomial"));
    let summary = fs::read_to_string(tmp.path().join("k/krr_summary.txt")).unwrap();
    for key in ["exponential.epsilon=", "polynomial.delta=", "polynomial.cv_error="] {
        assert!(summary.contains(key), "{key}");
    }
    assert_eq!(data_rows(&tmp.path().join("k/krr_curves.csv")).len(), 300);

    let o = fdm(tmp.path(), &["krr", "--n", "100", "--sigma", "0", "--eps-count", "2", "--delta-count", "2", "--out", "k0"]);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&fdm(tmp.path(), &["krr", "--eps-grid", "0.1", "--eps-count", "3"])), 2);
    assert_eq!(code(&fdm(tmp.path(), &["krr", "--sigma", "-1"])), 2);
}
