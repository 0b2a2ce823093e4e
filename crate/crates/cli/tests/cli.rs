//! End-to-end runs of the binary.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

const MU: &str = r#"{"uniform":[-1,1]}"#;
const NU: &str = r#"{"uniform":[-2,2]}"#;
const TOY_MU: &str = r#"{"points":[-1,1],"weights":[0.5,0.5]}"#;
const TOY_NU: &str = r#"{"points":[-2,0,2],"weights":[0.25,0.5,0.25]}"#;

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_robust-amput"));
    cmd.args(args).env_remove("ROBUST_AMPUT_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(out: &Output) -> Value {
    assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("robust-amput-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn uniform_pair_prices_in_region_r() {
    let v = json(&run(&["price", "--mu", MU, "--nu", NU, "--k1", "0.5", "--k2", "0.25"]));
    assert_eq!(v["region"], "R");
    let p = v["price"].as_f64().unwrap();
    assert!((p - 7785.0 / 10368.0).abs() < 1e-6, "{p}");
    assert!((v["x_star"].as_f64().unwrap() - 1.0 / 18.0).abs() < 1e-6);
}

#[test]
fn degenerate_strikes() {
    let v = json(&run(&["price", "--mu", MU, "--nu", NU, "--k1", "0.25", "--k2", "0.25"]));
    assert_eq!(v["region"], "DEG_EUROPEAN");
    assert!((v["price"].as_f64().unwrap() - 0.6328125).abs() < 1e-9);
    let v = json(&run(&["price", "--mu", MU, "--nu", NU, "--k1", "3", "--k2", "1"]));
    assert_eq!(v["region"], "DEG_INTRINSIC");
    assert!((v["price"].as_f64().unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn hedge_has_two_puts_and_no_gap() {
    let v = json(&run(&["hedge", "--mu", MU, "--nu", NU, "--k1", "0.5", "--k2", "0.25"]));
    assert_eq!(v["psi"].as_array().unwrap().len(), 2);
    assert!(v["duality_gap"].as_f64().unwrap().abs() <= 1e-6);
    assert!((v["cost"].as_f64().unwrap() - 7785.0 / 10368.0).abs() < 1e-6);
}

#[test]
fn verify_passes_on_the_uniform_pair() {
    let v = json(&run(&["verify", "--mu", MU, "--nu", NU, "--k1", "0.5", "--k2", "0.25", "--samples", "20000"]));
    assert_eq!(v["pass"], true);
    assert!(v["gaps"]["mbep_hc"].as_f64().unwrap() <= 1e-6);
    assert!(v["gaps"]["lp_mbep"].as_f64().unwrap() <= 5e-3);
    assert_eq!(v["oracle_grid"], serde_json::json!([100, 200]));
}

#[test]
fn verify_on_the_toy_instance() {
    let v = json(&run(&["verify", "--mu", TOY_MU, "--nu", TOY_NU, "--k1", "0.5", "--k2", "0.25"]));
    assert_eq!(v["mode"], "discrete");
    assert!((v["lp"].as_f64().unwrap() - 0.8125).abs() < 1e-12);
    assert!((v["hc"].as_f64().unwrap() - 0.8125).abs() < 1e-12);
    assert_eq!(v["pass"], true);
}

#[test]
fn broken_convex_order_exits_3_with_the_strike() {
    let nu = r#"{"points":[-0.5,0,0.5],"weights":[0.25,0.5,0.25]}"#;
    let out = run(&["verify", "--mu", TOY_MU, "--nu", nu, "--k1", "0.5", "--k2", "0.25"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("k = 0"), "{}", stderr(&out));
    // ingest still prints the normalized laws before failing
    let out = run(&["ingest", "--mu", TOY_MU, "--nu", nu]);
    assert_eq!(code(&out), 3);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["convex_order"]["holds"], false);
}

#[test]
fn bad_input_exits_2() {
    let cases: &[&[&str]] = &[
        &["price", "--k1", "0.5", "--k2", "0.25"],
        &["price", "--mu", MU, "--nu", NU, "--k1", "0.5"],
        &["price", "--mu", r#"{"uniform":[1,-1]}"#, "--nu", NU, "--k1", "0.5", "--k2", "0.25"],
        &["price", "--mu", MU, "--nu", NU, "--k1", "x", "--k2", "0.25"],
        &["region-map", "--mu", MU, "--nu", NU, "--grid", "0"],
        // a coarse atomic μ has no threshold rule to price
        &["price", "--mu", TOY_MU, "--nu", TOY_NU, "--k1", "0.5", "--k2", "0.25"],
        &["no-such-command"],
    ];
    for args in cases {
        assert_eq!(code(&run(args)), 2, "{args:?}");
    }
    let out = run_env(&["ingest", "--mu", MU, "--nu", NU], &[("ROBUST_AMPUT_THREADS", "zero")]);
    assert_eq!(code(&out), 2);
}

#[test]
fn outputs_are_deterministic() {
    let args = ["simulate", "--mu", MU, "--nu", NU, "--k1", "0.5", "--k2", "0.25", "--samples", "10000", "--seed", "7"];
    let a = run(&args);
    let b = run_env(&args, &[("ROBUST_AMPUT_THREADS", "1")]);
    assert_eq!(code(&a), 0);
    assert!(a.stdout == b.stdout, "simulate output changed between runs");
    let grid = ["region-map", "--mu", MU, "--nu", NU, "--grid", "15"];
    assert!(run(&grid).stdout == run_env(&grid, &[("ROBUST_AMPUT_THREADS", "1")]).stdout);
}

#[test]
fn simulate_csv_and_identity_coupling() {
    let out = run(&["simulate", "--mu", MU, "--nu", NU, "--k1", "0.5", "--k2", "0.25", "--samples", "5000"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,exercised,payoff,hedge_value"));
    for line in lines {
        let f: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert!(f[4] >= f[3] - 1e-9, "hedge below payoff: {line}");
    }
    let out = run(&["simulate", "--mu", MU, "--nu", MU, "--k1", "0.5", "--k2", "0.25", "--samples", "2000"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], f[1]);
    }
}

#[test]
fn region_map_on_the_uniform_pair() {
    let out = run(&["region-map", "--mu", MU, "--nu", NU]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (k1, k2): (f64, f64) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        assert!(k2 < k1);
        assert!(["R", "B", "DEG_EUROPEAN", "DEG_INTRINSIC"].contains(&f[2]), "{line}");
        if k1 <= -1.0 {
            assert_eq!(f[2], "DEG_EUROPEAN");
        }
        rows += 1;
    }
    assert_eq!(rows, 50 * 49 / 2);
}

#[test]
fn out_dir_gets_every_file() {
    let dir = scratch_dir("out");
    let out = run(&["coupling", "--mu", MU, "--nu", NU, "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    for name in ["coupling.json", "map.csv", "plan.csv"] {
        assert!(dir.join(name).is_file(), "{name} missing");
    }
    let map = std::fs::read_to_string(dir.join("map.csv")).unwrap();
    assert!(map.starts_with("x,f,g\n"));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn config_file_and_curves() {
    let dir = scratch_dir("cfg");
    std::fs::create_dir_all(&dir).unwrap();
    let put = |a: f64, b: f64, k: f64| {
        if k <= a {
            0.0
        } else if k >= b {
            k - 0.5 * (a + b)
        } else {
            (k - a).powi(2) / (2.0 * (b - a))
        }
    };
    for (name, (a, b)) in [("c1.csv", (-1.0, 1.0)), ("c2.csv", (-2.0, 2.0))] {
        let mut s = String::from("strike,price\n");
        for i in 0..=400 {
            let k = -3.0 + 6.0 * i as f64 / 400.0;
            s.push_str(&format!("{k},{}\n", put(a, b, k)));
        }
        std::fs::write(dir.join(name), s).unwrap();
    }
    std::fs::write(dir.join("run.toml"), "curve1 = 'c1.csv'\ncurve2 = 'c2.csv'\nk1 = 0.5\nk2 = 0.25\n").unwrap();
    let v = json(&run(&["price", "--config", dir.join("run.toml").to_str().unwrap()]));
    assert_eq!(v["region"], "R");
    // the curves are read on a grid and smoothed, so the match is close but not exact
    assert!((v["price"].as_f64().unwrap() - 7785.0 / 10368.0).abs() < 1e-4);
    assert!(v["smoothing"].as_f64().unwrap() > 0.0);
    std::fs::remove_dir_all(dir).ok();
}
