use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn eigsmooth(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eigsmooth"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn run_config(problem: &str, algorithm: &str, n: usize, seed: u64) -> String {
    format!("problem = \"{problem}\"\nalgorithm = \"{algorithm}\"\nn = {n}\nseed = {seed}\niterations = 20\n")
}

#[test]
fn solve_is_deterministic() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "a.toml", &run_config("maxcut", "stoch_ls", 8, 3));
    let a = eigsmooth(dir.path(), &["solve", "--config", "a.toml", "--out", "one"]);
    let b = eigsmooth(dir.path(), &["solve", "--config", "a.toml", "--out", "two"]);
    assert!(a.status.success() && b.status.success(), "{}", stderr(&a));
    for name in ["maxcut-stoch_ls-n8-s3.trace.csv", "maxcut-stoch_ls-n8-s3.report.json"] {
        let x = fs::read(dir.path().join("one").join(name)).unwrap();
        let y = fs::read(dir.path().join("two").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn seed_flag_changes_the_run() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "a.toml", &run_config("dspca", "acsa", 6, 1));
    assert!(eigsmooth(dir.path(), &["solve", "--config", "a.toml"]).status.success());
    assert!(eigsmooth(dir.path(), &["solve", "--config", "a.toml", "--seed", "2"]).status.success());
    let x = fs::read(dir.path().join("dspca-acsa-n6-s1.trace.csv")).unwrap();
    let y = fs::read(dir.path().join("dspca-acsa-n6-s2.trace.csv")).unwrap();
    assert_ne!(x, y);
}

#[test]
fn det_smooth_charges_n_per_exponential() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "d.toml", &run_config("maxcut", "det_smooth", 10, 5));
    let out = eigsmooth(dir.path(), &["solve", "--config", "d.toml"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("maxcut-det_smooth-n10-s5.report.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    let eig = report["total_eigvecs"].as_f64().unwrap();
    assert!(eig > 0.0 && eig % 10.0 == 0.0, "{eig}");
    assert_eq!(report["completed"], true);
}

#[test]
fn compare_merges_reports() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "s.toml", &run_config("maxcut", "stoch_ls", 8, 1));
    write(dir.path(), "g.toml", &run_config("maxcut", "subgrad", 8, 1));
    for c in ["s.toml", "g.toml"] {
        assert!(eigsmooth(dir.path(), &["solve", "--config", c, "--out", "runs"]).status.success());
    }
    let out = eigsmooth(
        dir.path(),
        &[
            "compare",
            "runs/maxcut-stoch_ls-n8-s1.report.json",
            "runs/maxcut-subgrad-n8-s1.report.json",
            "--out",
            "cmp.csv",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let table = fs::read_to_string(dir.path().join("cmp.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("eigvecs,stoch_ls,subgrad"));
    assert!(lines.count() >= 20);
}

#[test]
fn compare_rejects_empty_trace_and_mismatch() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "a.toml", &run_config("maxcut", "stoch_ls", 8, 1));
    write(dir.path(), "b.toml", &run_config("maxcut", "stoch_ls", 9, 1));
    for c in ["a.toml", "b.toml"] {
        assert!(eigsmooth(dir.path(), &["solve", "--config", c]).status.success());
    }
    let a = "maxcut-stoch_ls-n8-s1.report.json";
    let b = "maxcut-stoch_ls-n9-s1.report.json";
    let out = eigsmooth(dir.path(), &["compare", a, b]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("schema mismatch"), "{}", stderr(&out));

    write(dir.path(), "maxcut-stoch_ls-n9-s1.trace.csv", "t,obj_true,obj_sampled,gamma,eigvecs,wall_ms\n");
    let out = eigsmooth(dir.path(), &["compare", b, b]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("empty trace"), "{}", stderr(&out));
}

#[test]
fn config_errors_name_the_field() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "a.toml", &format!("{}gamma_maks = 1.0\n", run_config("maxcut", "acsa", 4, 1)));
    let out = eigsmooth(dir.path(), &["solve", "--config", "a.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("gamma_maks"), "{}", stderr(&out));

    write(dir.path(), "b.toml", &format!("{}radius = -1.0\n", run_config("maxcut", "acsa", 4, 1)));
    let out = eigsmooth(dir.path(), &["solve", "--config", "b.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("radius"), "{}", stderr(&out));
    assert!(!dir.path().join("maxcut-acsa-n4-s1.report.json").exists());
}

#[test]
fn dspca_reads_covariance_relative_to_config() {
    let dir = TempDir::new().unwrap();
    fs::create_dir(dir.path().join("cfg")).unwrap();
    write(&dir.path().join("cfg"), "cov.txt", "3\n2 0.5 0\n0.5 1 0\n0 0 0.5\n");
    write(
        &dir.path().join("cfg"),
        "a.toml",
        &format!("{}data_path = \"cov.txt\"\n", run_config("dspca", "stoch_ls", 2, 1)),
    );
    let out = eigsmooth(dir.path(), &["solve", "--config", "cfg/a.toml"]);
    assert!(out.status.success(), "{}", stderr(&out));

    write(&dir.path().join("cfg"), "cov.txt", "3\n2 0.5 0\n0.5 1 x\n0 0 0.5\n");
    let out = eigsmooth(dir.path(), &["solve", "--config", "cfg/a.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn phase_at_critical_eps_reports_critical() {
    let dir = TempDir::new().unwrap();
    // gaps 1, 2, 3 below the top eigenvalue: 1 / eps0 = (1 + 1/2 + 1/3) / 4
    write(dir.path(), "spectrum.txt", "# spectrum\n4\n3\n2\n1\n");
    let eps0 = 4.0 / (1.0 + 0.5 + 1.0 / 3.0);
    write(
        dir.path(),
        "p.toml",
        &format!("family = \"file\"\nspectrum_path = \"spectrum.txt\"\neps = {eps0}\ntrials = 200\nseed = 2\nlabel = \"crit\"\n"),
    );
    let out = eigsmooth(dir.path(), &["phase", "--config", "p.toml"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("crit.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,eps,regime,median_T,predicted_order,slope"));
    assert_eq!(lines.next().unwrap().split(',').nth(2), Some("critical"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("crit.json")).unwrap()).unwrap();
    assert_eq!(json["regime"], "critical");
}

#[test]
fn phase_spectrum_parse_error_names_line() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "spectrum.txt", "4\n3\nthree\n1\n");
    write(
        dir.path(),
        "p.toml",
        "family = \"file\"\nspectrum_path = \"spectrum.txt\"\neps = 1.0\nseed = 2\n",
    );
    let out = eigsmooth(dir.path(), &["phase", "--config", "p.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn phase_scaling_over_n_list() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "p.toml",
        "family = \"equal_gap\"\ngamma = 1.0\nn_list = [50, 100, 200]\neps_factor = 0.5\ntrials = 200\nseed = 9\n",
    );
    let out = eigsmooth(dir.path(), &["phase", "--config", "p.toml"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("phase.json")).unwrap()).unwrap();
    assert_eq!(json["regime"], "sub");
    let slope = json["slope"].as_f64().unwrap();
    assert!((slope + 1.0).abs() < 0.3, "{slope}");
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);
}
