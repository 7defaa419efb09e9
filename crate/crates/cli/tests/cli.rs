use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use truncreg::linalg::chi2_quantile;
use truncreg::synth::{generate, GenConfig, WStar, XDist};
use truncreg::TruncationSet;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_truncreg"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(o));
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn acceptance(o: &Output) -> f64 {
    let err = stderr(o);
    let line = err.lines().find(|l| l.starts_with("acceptance rate:")).expect("acceptance line");
    line["acceptance rate:".len()..].split_whitespace().next().unwrap().parse().unwrap()
}

/// Writes a `k = 2` left-truncated dataset and returns its path.
fn fixture(dir: &TempDir, n: usize, set: &str) -> PathBuf {
    let p = dir.path().join(format!("data_{n}.csv"));
    let o = run(&[
        "generate", "--k", "2", "--n", &n.to_string(), "--wstar", "ones", "--xdist", "normalized", "--set", set,
        "--seed", "3", "--out", p.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    p
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_full_line_keeps_everything() {
    let o = run(&["generate", "--k", "2", "--n", "50", "--set", "(-inf,inf)"]);
    assert!(o.status.success());
    assert_eq!(acceptance(&o), 1.0);
}

#[test]
fn generate_bias_setting_keeps_about_half() {
    let o = run(&["generate", "--k", "10", "--n", "10000", "--set", "[0,inf)", "--sigma2", "1"]);
    assert!(o.status.success());
    let rate = acceptance(&o);
    assert!((0.45..=0.55).contains(&rate), "acceptance {rate}");
}

#[test]
fn zero_samples_is_a_usage_error() {
    let o = run(&["generate", "--k", "2", "--n", "0", "--set", "[0,inf)"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--n"), "{}", stderr(&o));
}

#[test]
fn generated_csv_reads_back_exactly() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("d.csv");
    let o = run(&[
        "generate", "--k", "3", "--n", "200", "--sigma2", "2.5", "--wstar", "0.5,-1,2", "--xdist", "normal", "--set",
        "(-inf,-1]U[1,inf)", "--seed", "11", "--out", path(&p),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("x1,x2,x3,y\n"));

    let expected = generate(&GenConfig {
        k: 3,
        n_observed: 200,
        w_star: WStar::Explicit(vec![0.5, -1.0, 2.0]),
        sigma_star_sq: 2.5,
        x_dist: XDist::StandardNormal,
        set: "(-inf,-1]U[1,inf)".parse::<TruncationSet>().unwrap(),
        seed: 11,
        max_world_draws: None,
    })
    .unwrap()
    .dataset;
    let mut rows = text.lines().skip(1);
    for s in expected.iter() {
        let vals: Vec<f64> = rows.next().unwrap().split(',').map(|t| t.parse().unwrap()).collect();
        assert_eq!(&vals[..3], s.x);
        assert_eq!(vals[3], s.y);
    }
    assert!(rows.next().is_none());
}

#[test]
fn generate_is_byte_deterministic() {
    let args = ["generate", "--k", "4", "--n", "300", "--set", "[0,inf)", "--seed", "9"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn fit_is_byte_deterministic() {
    let dir = TempDir::new().unwrap();
    let d = fixture(&dir, 900, "[0,inf)");
    let args = ["fit", "--data", path(&d), "--set", "[0,inf)", "--steps", "600", "--seed", "5"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let r = json(&a);
    assert_eq!(r["w"].as_array().unwrap().len(), 2);
    assert!(r["sigma2"].as_f64().unwrap() > 0.0);
    assert_eq!(r["diagnostics"]["steps_run"], 600);
    assert_eq!(r["config_echo"]["set"], "[0,inf)");
    for key in ["lambda_min", "lambda_max", "beta"] {
        assert!(r["domain"][key].is_number(), "{key}");
    }
}

#[test]
fn fit_report_uses_seventeen_digits() {
    let dir = TempDir::new().unwrap();
    let d = fixture(&dir, 300, "[0,inf)");
    let o = run(&["fit", "--data", path(&d), "--set", "[0,inf)", "--steps", "50"]);
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    let sigma = text.split("\"sigma2\":").nth(1).unwrap().split(',').next().unwrap();
    let mantissa = sigma.split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{sigma}");
}

#[test]
fn strong_schedule_reports_zeta() {
    let dir = TempDir::new().unwrap();
    let d = fixture(&dir, 900, "[0,inf)");
    let r = json(&run(&["fit", "--data", path(&d), "--set", "[0,inf)", "--schedule", "strong", "--steps", "300"]));
    assert!(r["zeta"].as_f64().unwrap() > 0.0);
    assert!(r["config_echo"]["schedule"].as_str().unwrap().starts_with("strong(zeta=auto"));
}

#[test]
fn fit_without_set_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let d = fixture(&dir, 90, "[0,inf)");
    let o = run(&["fit", "--data", path(&d)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_set_is_a_usage_error() {
    let o = run(&["generate", "--k", "2", "--n", "5", "--set", "[2,1]"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn degenerate_data_exits_3() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("exact.csv");
    let mut text = String::from("x1,y\n");
    for i in 0..30 {
        let x = i as f64 / 10.0 + 0.1;
        text.push_str(&format!("{x},{}\n", 2.0 * x));
    }
    std::fs::write(&p, text).unwrap();
    let o = run(&["fit", "--data", path(&p), "--set", "(-inf,inf)"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("initialization"), "{}", stderr(&o));
}

#[test]
fn bad_csv_exits_3() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "a,b\n1,2\n").unwrap();
    let o = run(&["fit", "--data", path(&p), "--set", "(-inf,inf)"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn rejection_budget_exits_4() {
    let dir = TempDir::new().unwrap();
    let d = fixture(&dir, 300, "[1.5,inf)");
    let o = run(&["fit", "--data", path(&d), "--set", "[1.5,inf)", "--max-attempts", "1"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("PSGD"));
}

#[test]
fn inference_precondition_exits_5_with_hint() {
    let dir = TempDir::new().unwrap();
    let d = fixture(&dir, 900, "[0,inf)");
    let o = run(&["confidence", "--data", path(&d), "--set", "[0,inf)", "--zeta", "1000"]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
    assert!(stderr(&o).contains("--zeta"));
}

fn region(d: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["confidence", "--data", path(d), "--set", "[0,inf)"];
    args.extend_from_slice(extra);
    json(&run(&args))
}

#[test]
fn confidence_region_contract() {
    let dir = TempDir::new().unwrap();
    let d = fixture(&dir, 1500, "[0,inf)");
    let r10 = region(&d, &[]);
    let k = r10["center"]["w"].as_array().unwrap().len();

    let zeta = r10["zeta"].as_f64().unwrap();
    let n = r10["n"].as_u64().unwrap() as f64;
    let expected = chi2_quantile(k + 1, 0.9) / (zeta * n);
    let radius = r10["radius"].as_f64().unwrap();
    assert!((radius - expected).abs() <= 1e-12 * expected, "{radius} vs {expected}");
    assert_eq!(r10["fit"]["diagnostics"]["steps_run"], 500, "one pass over the PSGD third by default");

    let r05 = region(&d, &["--alpha", "0.05"]);
    assert!(r05["radius"].as_f64().unwrap() > radius);

    let center: Vec<String> = r10["center"]["w"]
        .as_array()
        .unwrap()
        .iter()
        .chain(std::iter::once(&r10["center"]["sigma2"]))
        .map(|v| format!("{:e}", v.as_f64().unwrap()))
        .collect();
    let inside = run(&["confidence", "--data", path(&d), "--set", "[0,inf)", "--test", &center.join(",")]);
    assert!(stderr(&inside).contains("contains: true"), "{}", stderr(&inside));
    assert_eq!(json(&inside)["test"]["contains"], true);

    let far = run(&["confidence", "--data", path(&d), "--set", "[0,inf)", "--test", "40,40,0.01"]);
    assert_eq!(json(&far)["test"]["contains"], false);

    let wrong = run(&["confidence", "--data", path(&d), "--set", "[0,inf)", "--test", "1,1"]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn confidence_rejects_other_schedules() {
    let dir = TempDir::new().unwrap();
    let d = fixture(&dir, 90, "[0,inf)");
    let o = run(&["confidence", "--data", path(&d), "--set", "[0,inf)", "--schedule", "sqrt"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fig1_table_schema() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fig1.csv");
    let o = run(&[
        "experiment", "--which", "fig1", "--seeds", "0,1", "--sigma-grid", "1,4", "--n", "600", "--steps", "500",
        "--out", path(&out), "--jobs", "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sigma2_true,method,w_err,sigma2_err,seed,failed"));
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 2 * 2 * 2);
    assert_eq!(body.iter().filter(|l| l.contains(",OLS,")).count(), 4);
}

#[test]
fn fig2_medians_decrease() {
    let o = run(&["experiment", "--which", "fig2", "--seeds", "0-4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,median_total_err,successes,failed"));
    let medians: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(medians.len(), 5);
    let inversions = medians.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "{medians:?}");
}

#[test]
fn unknown_experiment_is_a_usage_error() {
    let o = run(&["experiment", "--which", "fig3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_file_is_replaced_whole() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("d.csv");
    std::fs::write(&p, "stale contents that are much longer than nothing\n".repeat(1000)).unwrap();
    let o = run(&["generate", "--k", "1", "--n", "3", "--set", "(-inf,inf)", "--out", path(&p)]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().count(), 4);
    let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(leftovers.len(), 1);
}
