use std::process::{Command, Output};

use serde_json::Value;

use coulomb_chain::{residuals, Configuration, ForceProfile, ModelParams};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coulomb-chain"))
        .args(args)
        .env_remove("COULOMB_CHAIN_TOL_REL")
        .env_remove("COULOMB_CHAIN_MAX_ITER")
        .env_remove("COULOMB_CHAIN_GRAD_TOL")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn solve_zero_force_is_uniform_and_pinned() {
    let v = json_of(&run(&["solve", "--n", "100", "--length", "1", "--force", "0"]));
    let positions = floats(&v["positions"]);
    assert_eq!(positions.len(), 101);
    assert!(floats(&v["gaps"]).iter().all(|g| (g - 0.01).abs() < 1e-12));
    assert_eq!(v["classification"], "BoundaryPinned");
    for key in ["params", "pressures", "max_residual", "delta1", "iterations"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn critical_reports_sum_and_coefficient() {
    let v = json_of(&run(&["critical", "--n", "100", "--length", "1"]));
    assert!((v["exact"].as_f64().unwrap() - 345.5733703624296).abs() < 1e-9);
    assert_eq!(v["asymptotic_coefficient"].as_f64().unwrap(), 4.0);
}

#[test]
fn increasing_profile_exits_one_with_error_object() {
    let out = run(&["solve", "--n", "10", "--length", "1", "--force-piecewise", "-1:0,0:3"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "MonotonicityViolation");
    assert!(err["message"].is_string());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["solve", "--n", "10"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--n", "10", "--force", "1", "--c", "1", "--gamma", "1"]).status.code(), Some(2));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--n", "10", "--force-piecewise", "-1:a"]).status.code(), Some(2));
}

#[test]
fn negative_length_is_a_model_error() {
    let out = run(&["solve", "--n", "10", "--length=-1", "--force", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn json_round_trip_reproduces_residual() {
    for force in [["--force", "500"], ["--force", "10"]] {
        let mut args = vec!["solve", "--n", "200", "--length", "1.5"];
        args.extend(force);
        let v = json_of(&run(&args));
        let params = ModelParams::new(1.5, 200, ForceProfile::constant(force[1].parse().unwrap()).unwrap()).unwrap();
        let config = Configuration::new(floats(&v["positions"]), 1.5).unwrap();
        let recomputed = residuals(&config, &params).max_interior();
        let reported = v["max_residual"].as_f64().unwrap();
        assert!((recomputed - reported).abs() <= 1e-15, "{recomputed} vs {reported}");
    }
}

#[test]
fn piecewise_round_trip_reproduces_residual() {
    let v = json_of(&run(&["solve", "--n", "50", "--force-piecewise", "-1:300,-0.4:120,0:20"]));
    let profile = ForceProfile::piecewise(vec![(-1.0, 300.0), (-0.4, 120.0), (0.0, 20.0)]).unwrap();
    let params = ModelParams::new(1.0, 50, profile).unwrap();
    let config = Configuration::new(floats(&v["positions"]), 1.0).unwrap();
    let recomputed = residuals(&config, &params).max_interior();
    assert!((recomputed - v["max_residual"].as_f64().unwrap()).abs() <= 1e-15);
}

fn csv_pairs(bytes: &[u8]) -> Vec<(String, String)> {
    let mut r = csv::Reader::from_reader(bytes);
    assert_eq!(r.headers().unwrap(), vec!["key", "value"]);
    r.records().map(|rec| {
        let rec = rec.unwrap();
        (rec[0].to_string(), rec[1].to_string())
    })
    .collect()
}

fn lookup<'a>(v: &'a Value, key: &str) -> &'a Value {
    key.split('.').fold(v, |cur, part| match part.parse::<usize>() {
        Ok(i) if cur.is_array() => &cur[i],
        _ => &cur[part],
    })
}

#[test]
fn csv_and_json_carry_identical_values() {
    let base = ["solve", "--n", "30", "--c", "2", "--gamma", "1"];
    let json = json_of(&run(&base));
    let mut csv_args = base.to_vec();
    csv_args.extend(["--format", "csv"]);
    let out = run(&csv_args);
    assert!(out.status.success());
    let pairs = csv_pairs(&out.stdout);
    assert!(pairs.len() > 90);
    for (key, text) in pairs {
        let j = lookup(&json, &key);
        match j {
            Value::Number(n) => assert_eq!(n.as_f64().unwrap(), text.parse::<f64>().unwrap(), "{key}"),
            Value::String(s) => assert_eq!(s, &text),
            other => panic!("{key}: unexpected {other}"),
        }
    }
}

#[test]
fn converge_table_matches_between_formats() {
    let base = ["converge", "--n-list", "10,100,1000", "--c", "1", "--gamma", "0.5"];
    let json = json_of(&run(&base));
    let mut csv_args = base.to_vec();
    csv_args.extend(["--format", "csv"]);
    let out = run(&csv_args);
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = r.headers().unwrap().clone();
    assert_eq!(&headers, vec!["n", "x_n", "delta1_scaled", "gap_deviation"]);
    let rows: Vec<_> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for (row, obj) in rows.iter().zip(json.as_array().unwrap()) {
        for (h, cell) in headers.iter().zip(row) {
            assert_eq!(obj[h].as_f64().unwrap(), cell.parse::<f64>().unwrap());
        }
    }
}

#[test]
fn sweep_is_deterministic_and_has_header() {
    let args = ["sweep", "--n-list", "100,400", "--c-list", "1,8", "--gamma-list", "0.5,1,2", "--format", "csv"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("n,length,c,gamma,predicted,detected"));
    assert_eq!(lines.count(), 12);
}

#[test]
fn density_prediction_is_null_for_constant_force() {
    let v = json_of(&run(&["density", "--n", "100", "--force", "0"]));
    assert!(v["prediction"].is_null());
    let mass: f64 = floats(&v["mass"]).iter().sum();
    assert!((mass - 1.0).abs() < 1e-12);
    assert_eq!(floats(&v["bin_edges"]).len(), 11);

    let v = json_of(&run(&["density", "--n", "100", "--c", "2", "--gamma", "1", "--bins", "20"]));
    assert_eq!(floats(&v["prediction"]).len(), 20);
}

#[test]
fn output_file_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("critical.json");
    let out = run(&["critical", "--n", "10", "--output", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert!(v["exact"].as_f64().unwrap() > 0.0);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn env_overrides_tolerance() {
    let out = Command::new(env!("CARGO_BIN_EXE_coulomb-chain"))
        .args(["solve", "--n", "10", "--force", "1"])
        .env("COULOMB_CHAIN_MAX_ITER", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = Command::new(env!("CARGO_BIN_EXE_coulomb-chain"))
        .args(["solve", "--n", "10", "--force", "1"])
        .env("COULOMB_CHAIN_MAX_ITER", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "NoConvergence");
}

#[test]
fn nonunique_reports_multiple_minima() {
    let v = json_of(&run(&["nonunique", "--c-list", "4,8", "--seed", "3"]));
    assert!(v["first_c_with_multiple_minima"].as_f64().is_some());
    let again = json_of(&run(&["nonunique", "--c-list", "4,8", "--seed", "3"]));
    assert_eq!(v, again);
}

#[test]
fn oracle_matches_solver_for_constant_force() {
    let solve = json_of(&run(&["solve", "--n", "6", "--force", "20"]));
    let oracle = json_of(&run(&["oracle", "--n", "6", "--force", "20", "--starts", "4"]));
    let minima = oracle["minima"].as_array().unwrap();
    assert_eq!(minima.len(), 1);
    for (a, b) in floats(&minima[0]["positions"]).iter().zip(floats(&solve["positions"])) {
        assert!((a - b).abs() < 1e-8);
    }
}
