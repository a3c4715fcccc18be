use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn anisolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anisolab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("study.toml");
    let out = dir.join("out");
    fs::write(&path, format!("{body}\n[output]\ndir = {:?}\nsave_fields = true\n", out.display().to_string())).unwrap();
    path.display().to_string()
}

const LINEAR: &str = "[grid]\ncells = [16, 16]\nq = 1\n[coefficients]\nfamily = \"smooth\"\n\
                      [forcing]\nfamily = \"sine\"\n[study]\nepsilons = [1.0, 0.5, 0.25]\nmargin = 2\n";

#[test]
fn sweep_writes_csv_json_and_fields() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), LINEAR);
    let o = anisolab(&["sweep", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("epsilon,l2_diff,v12_diff,"));
    assert_eq!(lines.count(), 3);
    let out = tmp.path().join("out");
    for name in ["sweep.csv", "sweep.json", "u_limit.field", "u_eps_000.field", "u_eps_002.field"] {
        assert!(out.join(name).exists(), "{name}");
    }
    assert_eq!(fs::read_to_string(out.join("sweep.csv")).unwrap(), text);
}

#[test]
fn json_format_and_seed_override() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), LINEAR);
    let o = anisolab(&["sweep", "--config", &cfg, "--format", "json", "--seed", "9"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["complete"], true);
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["config"]["study"]["seed"], 9);
}

#[test]
fn out_flag_redirects_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), LINEAR);
    let other = tmp.path().join("elsewhere");
    let o = anisolab(&["limit", "--config", &cfg, "--out", other.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(other.join("u_limit.field").exists());
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn solve_then_metric_against_limit() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), LINEAR);
    assert!(anisolab(&["solve", "--config", &cfg, "--eps", "0.5"]).status.success());
    assert!(anisolab(&["limit", "--config", &cfg]).status.success());
    let out = tmp.path().join("out");
    let u = out.join("u_eps.field");
    let v = out.join("u_limit.field");
    let o = anisolab(&["metric", "--u", u.to_str().unwrap(), "--v", v.to_str().unwrap(), "--config", &cfg, "--eps", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let d: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("frechet_d,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(d > 0.0 && d < 1.0);
    assert!(text.contains("eps2_hess_x1_omega,"));

    let same = anisolab(&["metric", "--u", u.to_str().unwrap(), "--v", u.to_str().unwrap()]);
    assert!(stdout(&same).contains("frechet_d,0e0"));
}

#[test]
fn semilinear_requires_nonlinearity_section() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), LINEAR);
    let o = anisolab(&["semilinear", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[nonlinearity]"));

    let cfg = write_config(tmp.path(), &format!("{LINEAR}[nonlinearity]\nname = \"tanh\"\n"));
    let o = anisolab(&["semilinear", "--config", &cfg]);
    assert!(o.status.success());
    assert!(tmp.path().join("out/semilinear.json").exists());
}

#[test]
fn incomplete_sweep_exits_nonzero() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &format!("{LINEAR}[solver]\nmethod = \"cg\"\nmax_iter = 16\n"));
    let o = anisolab(&["sweep", "--config", &cfg, "--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["complete"], false);
    assert!(v["error"].as_str().unwrap().contains("ε = 1"));
}

#[test]
fn bad_config_is_reported() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[grid]\ncells = [8, 8]\nq = 1\n[study]\nepsilons = [0.5, 1.0]\n");
    let o = anisolab(&["sweep", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("decreasing"));
}

#[test]
fn fourier_check_passes_and_rejects_indefinite_matrix() {
    let o = anisolab(&["fourier-check", "--size", "16", "--dims", "2", "--eps", "1,0.1,0.001", "--samples", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));

    let bad = anisolab(&["fourier-check", "--size", "8", "--matrix", "1,2,2,1"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn translation_reports_halving_ratios() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[grid]\ncells = [32, 32]\nq = 1\n[forcing]\nfamily = \"sine_x2\"\n[study]\nepsilons = [1.0, 0.5]\nmargin = 4\n",
    );
    let o = anisolab(&["translation", "--config", &cfg, "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let ratios = v["halving_ratios"].as_array().unwrap();
    assert!(!ratios.is_empty());
    for r in ratios {
        let r = r.as_f64().unwrap();
        assert!((0.3..0.7).contains(&r), "{r}");
    }
}
