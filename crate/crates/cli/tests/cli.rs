use std::path::Path;
use std::process::{Command, Output};

fn lchs(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lchs"))
        .args(args)
        .current_dir(dir)
        .env_remove("LCHS_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn kernel_plot_default_kernels() {
    let dir = tempfile::tempdir().unwrap();
    let out = lchs(&["kernel-plot", "--param", "points=11"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("kernel,k,re_g,im_g,abs_g"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 5 * 11);
    let labels: Vec<&str> = rows.iter().step_by(11).map(|r| r[0].as_str()).collect();
    assert_eq!(labels, ["beta=0.1", "beta=0.5", "beta=0.9", "beta=0.99", "cauchy"]);
    assert_eq!(rows[0][1], "-50");
    assert_eq!(rows[10][1], "50");
    // |g| is even and peaks at k = 0
    let cauchy: Vec<f64> = rows[44..].iter().map(|r| r[4].parse().unwrap()).collect();
    assert_eq!(cauchy[0], cauchy[10]);
    assert!((cauchy[5] - 1.0 / std::f64::consts::PI).abs() < 1e-15);
}

#[test]
fn header_records_version_seed_and_params() {
    let dir = tempfile::tempdir().unwrap();
    let out = lchs(&["hybrid", "--seed", "9", "--param", "samples=[50]"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with(&format!("# tool=lchs {}\n", env!("CARGO_PKG_VERSION"))));
    assert!(text.contains("# seed=9\n"));
    let params = text.lines().find_map(|l| l.strip_prefix("# params=")).unwrap();
    let v: serde_json::Value = serde_json::from_str(params).unwrap();
    assert_eq!(v["samples"], serde_json::json!([50]));
    assert_eq!(v["eps"], serde_json::json!(0.01));
    assert_eq!(v["kernel"]["beta"], serde_json::json!(0.75));
    assert!(text.contains("estimate_re,estimate_im,stderr,n,seed"));
}

#[test]
fn identical_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("h.toml"),
        "command = \"hybrid\"\nseed = 4\n\n[params]\nsamples = [100, 1000]\nrepeats = 2\nnoise_sd = 0.1\n",
    )
    .unwrap();
    let a = lchs(&["run", "h.toml", "-o", "a.csv"], dir.path());
    let b = lchs(&["run", "h.toml", "-o", "b.csv"], dir.path());
    assert!(a.status.success() && b.status.success(), "{}", stderr(&a));
    let (a, b) = (
        std::fs::read(dir.path().join("a.csv")).unwrap(),
        std::fs::read(dir.path().join("b.csv")).unwrap(),
    );
    assert_eq!(a, b);
    let c = lchs(&["run", "h.toml", "--seed", "5"], dir.path());
    assert_ne!(stdout(&c).into_bytes(), a);
}

#[test]
fn solve_from_files_matches_exponential() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.json"), r#"{"dim": 1, "entries": [[1, 0]]}"#).unwrap();
    std::fs::write(dir.path().join("u0.json"), r#"{"dim": 1, "entries": [[1, 0]]}"#).unwrap();
    let out = lchs(
        &[
            "solve",
            "--param",
            "a_file=\"a.json\"",
            "--param",
            "u0_file=\"u0.json\"",
            "--param",
            "eps=1e-4",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = data_rows(&stdout(&out));
    let approx: f64 = rows[0][1].parse().unwrap();
    let oracle: f64 = rows[0][3].parse().unwrap();
    assert!((approx - (-1f64).exp()).abs() < 1e-4, "{approx}");
    assert!((oracle - (-1f64).exp()).abs() < 1e-8, "{oracle}");
}

#[test]
fn solve_with_explicit_grid_and_source() {
    let dir = tempfile::tempdir().unwrap();
    let out = lchs(
        &[
            "solve",
            "--seed",
            "2",
            "--param",
            "dim=2",
            "--param",
            "trunc_k=20",
            "--param",
            "step_h1=0.5",
            "--param",
            "order_q=6",
            "--param",
            "step_h2=0.05",
            "--param",
            "order_q2=5",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(
        text.contains("# K=20\n") && text.contains("# Q2=5\n") && text.contains("# M'=100\n"),
        "{text}"
    );
    let err: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# abs_error="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(err < 0.05, "{err}");

    let partial = lchs(&["solve", "--seed", "2", "--param", "trunc_k=20"], dir.path());
    assert_eq!(partial.status.code(), Some(2));
}

#[test]
fn gibbs_writes_density_and_purification() {
    let dir = tempfile::tempdir().unwrap();
    let out = lchs(
        &["gibbs", "--seed", "3", "--param", "dim=4", "-o", "g/out.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).starts_with("Z="));
    let density: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("g/out.density.json")).unwrap()).unwrap();
    assert_eq!(density["dim"], 4);
    let purified: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("g/out.purified.json")).unwrap()).unwrap();
    assert_eq!(purified["dim"], 16);
    let rows = data_rows(&std::fs::read_to_string(dir.path().join("g/out.csv")).unwrap());
    let trace: f64 = rows[0][4].parse().unwrap();
    assert!(trace <= 1e-3);
}

#[test]
fn truncation_sweep_beta_beats_cauchy() {
    let dir = tempfile::tempdir().unwrap();
    let out = lchs(
        &[
            "truncation-sweep",
            "--seed",
            "1",
            "--param",
            "dim=4",
            "--param",
            "betas=[0.75]",
            "--param",
            "targets=[0.01]",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = data_rows(&stdout(&out));
    assert_eq!(rows.len(), 2);
    let k_beta: f64 = rows[0][2].parse().unwrap();
    let k_cauchy: f64 = rows[1][2].parse().unwrap();
    assert_eq!(rows[1][0], "cauchy");
    assert!(k_beta < k_cauchy, "{k_beta} vs {k_cauchy}");

    let curve = lchs(
        &[
            "truncation-sweep",
            "--seed",
            "1",
            "--param",
            "mode=\"curve\"",
            "--param",
            "dim=4",
            "--param",
            "k_max=4",
            "--param",
            "betas=[0.5]",
            "--param",
            "include_cauchy=false",
        ],
        dir.path(),
    );
    assert!(curve.status.success(), "{}", stderr(&curve));
    let errors: Vec<f64> = data_rows(&stdout(&curve))
        .iter()
        .map(|r| r[2].parse().unwrap())
        .collect();
    assert_eq!(errors.len(), 8);
    assert!(errors.last().unwrap() < errors.first().unwrap());
}

#[test]
fn estimate_comparison_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = lchs(
        &["estimate", "--param", "kind=\"comparison\"", "--param", "cost.eps=1e-6"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = data_rows(&stdout(&out));
    let methods: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(methods.len(), 6);
    assert!(methods.contains(&"improved_lchs_time_dependent"));
    assert_eq!(rows[0][1], "unavailable");
}

#[test]
fn config_errors_exit_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "command = \"solve\"\nseed = 1\nsede = 2\n").unwrap();
    let out = lchs(&["run", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error kind=config code=2 message="), "{err}");
    assert!(err.contains("line 3 column 1"), "{err}");

    let out = lchs(&["solve", "--param", "epsilon=1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown field"));

    let out = lchs(&["hybrid"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("needs a seed"));

    let out = lchs(
        &[
            "kernel-plot",
            "--param",
            "kernels=[{variant=\"beta_exponential\", beta=2.0}]",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_invariant_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = lchs(
        &[
            "fourier-check",
            "--param",
            "kernels=[{variant=\"cauchy\"}]",
            "--param",
            "xs=[1.0]",
            "--param",
            "tol=1e-3",
            "--param",
            "check_tol=1e-14",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(stdout(&out).contains(",fail"));
    assert!(stderr(&out).starts_with("error kind=invariant code=4"));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lchs"))
        .args(["estimate"])
        .current_dir(dir.path())
        .env("LCHS_OUTPUT_DIR", dir.path().join("arts"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("arts/estimate.csv")).unwrap();
    assert!(text.contains("matrix_queries"));
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = lchs(&["selftest"], dir.path());
    assert!(out.status.success(), "{}\n{}", stdout(&out), stderr(&out));
    assert!(!stdout(&out).contains(",fail"));
}
