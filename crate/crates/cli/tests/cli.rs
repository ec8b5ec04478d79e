use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sure-edf")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.split('\t').next() == Some(key)).unwrap_or_else(|| panic!("no `{key}` in {text}"));
    line.split('\t').nth(1).unwrap().parse().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = "family = soft-threshold\nsettings = null, strong_sparsity\nsample_sizes = 10, 20\n\
                     outer_reps = 40\nbootstrap_b = 10\nseed = 7\n";

#[test]
fn simulation_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let oa = run(&["simulate", "--config", &cfg, "--out", a.to_str().unwrap()]);
    assert!(oa.status.success(), "{}", String::from_utf8_lossy(&oa.stderr));
    let ob = run(&["--sequential", "simulate", "--config", &cfg, "--out", b.to_str().unwrap()]);
    assert!(ob.status.success());
    let ta = fs::read(&a).unwrap();
    assert_eq!(ta, fs::read(&b).unwrap());
    let text = String::from_utf8(ta).unwrap();
    assert!(text.starts_with("n,setting,method,quantity,mean,std_error,reps"));
    assert!(text.lines().any(|l| l.starts_with("20,strong_sparsity,monte_carlo,edf,")));
}

#[test]
fn seed_flag_changes_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let a = stdout(&run(&["simulate", "--config", &cfg]));
    let b = stdout(&run(&["--seed", "8", "simulate", "--config", &cfg]));
    assert!(a.lines().count() > 10);
    assert_ne!(a, b);
}

#[test]
fn config_errors_exit_2_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.cfg", "family = shrinkage\n\nouter_reps = many\n");
    let o = run(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn unknown_family_lists_registered_ones() {
    let o = run(&["edf", "--family", "lasso", "--method", "monte-carlo"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("shrinkage") && err.contains("soft-threshold") && err.contains("singleton"), "{err}");
}

#[test]
fn tune_reads_data_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_config(dir.path(), "y.txt", "1.5 0.2, -3\n# comment\n0.7 2.2\n");
    let out = stdout(&run(&["tune", "--family", "soft-threshold", "--data", &data]));
    assert_eq!(field(&out, "s_hat"), 0.7);
    assert_eq!(field(&out, "naive_df"), 3.0);
    assert!(out.contains("theta_hat\t0.800000 0.000000 -2.300000 0.000000 1.500000"));

    let bad = write_config(dir.path(), "z.txt", "1 two 3\n");
    assert_eq!(run(&["tune", "--family", "shrinkage", "--data", &bad]).status.code(), Some(2));
}

#[test]
fn unbiased_edf_matches_formula() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_config(dir.path(), "y.txt", "1.5 0.2 -3 0.7 2.2\n");
    let tune = stdout(&run(&["tune", "--family", "shrinkage", "--data", &data]));
    let s = field(&tune, "s_hat");
    let edf = stdout(&run(&["edf", "--family", "shrinkage", "--method", "unbiased", "--data", &data]));
    let line = edf.lines().nth(1).unwrap();
    let v: f64 = line.split('\t').nth(1).unwrap().parse().unwrap();
    assert!((v - 2.0 * s / (1.0 + s)).abs() < 1e-9);

    let o = run(&["edf", "--family", "soft-threshold", "--method", "unbiased", "--data", &data]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bounds_print_known_values() {
    let nested = stdout(&run(&["bounds", "nested-null-edf", "--p", "200"]));
    assert!(field(&nested, "nested_null_edf_bound") < 10.0);
    assert!(nested.contains("below_10\ttrue"));

    let cert = stdout(&run(&["bounds", "tail-certificate"]));
    assert!(field(&cert, "total") < 10.0);

    let best = stdout(&run(&["bounds", "best-subset-constant"]));
    assert!((field(&best, "constant") - 2.2891).abs() < 1e-3);
    assert!(field(&best, "half_constant") < 1.145);

    let two = stdout(&run(&["bounds", "two-model-edf", "--m", "0"]));
    assert!((field(&two, "two_model_edf") - 2.0 * (-1.0f64).exp() / std::f64::consts::PI.sqrt()).abs() < 1e-9);

    let simp = stdout(&run(&["bounds", "simplified", "--delta", "0.9"]));
    assert!((field(&simp, "log_coefficient") - 20.0).abs() < 1e-9);

    let gas = stdout(&run(&["bounds", "gas-stations", "--weights", "3,1,0,4,2"]));
    assert_eq!(field(&gas, "valid_starts"), 1.0);
}

#[test]
fn selfcheck_subset_runs() {
    let o = run(&["selfcheck", "--only", "9,10,12"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("[PASS]")).count(), 3);
}

#[test]
fn selfcheck_known_failure_does_not_fail_the_run() {
    let o = run(&["selfcheck", "--only", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn out_flag_redirects_any_command() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bound.txt");
    let o = run(&["--out", path.to_str().unwrap(), "bounds", "best-subset-constant"]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(fs::read_to_string(&path).unwrap().contains("constant\t2.28914"));
}
