use std::process::{Command, Output};

use normscaler::model::{DesignSpec, TargetSpec};
use normscaler::theory::{transition_n_star, TheoryInputs};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_normscaler")).args(args).output().expect("binary runs")
}

fn json_ok(args: &[&str]) -> Value {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn norm(v: &Value, r: f64) -> f64 {
    v["norms"].as_array().unwrap().iter().find(|e| e["r"].as_f64() == Some(r)).unwrap()["norm"].as_f64().unwrap()
}

#[test]
fn solve_reports_norm_table() {
    let v = json_ok(&["solve", "--p", "1.5", "--n", "20", "--d", "100", "--target", "e1", "--sigma", "0", "--seed", "1"]);
    assert!(v["feas_residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(v["converged"], Value::Bool(true));
    let (l1, l15) = (norm(&v, 1.0), norm(&v, 1.5));
    assert!(l1 >= l15 && l15 > 0.0);
}

#[test]
fn theory_passes_formulas_through() {
    let v = json_ok(&["theory", "--p", "1.5", "--target", "e1", "--sigma", "0.1", "--kappa", "9", "--n", "1000"]);
    assert_eq!(v["r_star"].as_f64(), Some(1.0));
    let inputs = TheoryInputs::from_target(&TargetSpec::single_spike(), &DesignSpec::Proportional(9.0), 0.1, 1.5, 1.5, 1000).unwrap();
    let expected = transition_n_star(&inputs).value;
    assert_eq!(v["n_star"].as_f64().unwrap().to_bits(), expected.to_bits());
    assert!((v["n_star"].as_f64().unwrap() - 81.0 * 1.01f64.powi(2)).abs() < 2.0);
}

#[test]
fn calibrate_alpha() {
    let v = json_ok(&["calibrate", "--alpha", "0.229"]);
    let p = v["p_eff"][0]["p_eff"].as_f64().unwrap();
    assert!((p - 1.9).abs() <= 0.07, "{p}");
    let v = json_ok(&["calibrate", "--p-target", "1.5"]);
    assert!(v["alpha_for_p"]["alpha"].as_f64().unwrap() > 0.0);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["solve", "--p", "1.5", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--p", "1.5", "--n", "20", "--d", "10"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--p", "2.5", "--n", "5", "--d", "10"]).status.code(), Some(1));
    let out = run(&["solve", "--p", "1.5", "--n", "20", "--d", "100", "--max-iters", "1", "--line-search", "backtracking"]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["converged"], Value::Bool(false));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn help_describes_every_flag_with_units() {
    for sub in ["gen", "solve", "theory", "sweep", "calibrate", "dln-train", "diagnose"] {
        let out = run(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0));
        let text = String::from_utf8(out.stdout).unwrap();
        for flag in ["--n ", "--sigma ", "--p ", "--alpha ", "--lr ", "--q ", "--kappa "] {
            if let Some(pos) = text.find(flag) {
                let tail = &text[pos..];
                let block = &tail[..tail[1..].find("\n  -").map_or(tail.len(), |i| i + 1)];
                assert!(block.contains('(') && block.contains(')'), "{sub} {flag} lacks units: {block}");
            }
        }
    }
}

#[test]
fn gen_round_trips_through_solve() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    let path = path.to_str().unwrap();
    json_ok(&["gen", "--n", "15", "--kappa", "3", "--sigma", "0.1", "--seed", "4", "--out", path]);
    let a = json_ok(&["solve", "--instance", path, "--p", "1.3"]);
    let b = json_ok(&["solve", "--n", "15", "--kappa", "3", "--sigma", "0.1", "--seed", "4", "--p", "1.3"]);
    assert_eq!(norm(&a, 1.0).to_bits(), norm(&b, 1.0).to_bits());
}

#[test]
fn sweep_from_recipe_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = dir.path().join("r.json");
    std::fs::write(
        &recipe,
        r#"{"experiment_id": "cli", "target": {"kind": "SingleSpike", "s": 1}, "design": {"Proportional": 2.0},
            "sigma_list": [0.1], "selector": {"ExplicitP": [1.5]}, "n_grid": [10, 20], "r_list": [1.0, 1.5], "seeds_per_cell": 3}"#,
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let v = json_ok(&["sweep", "--config", recipe.to_str().unwrap(), "--out", csv.to_str().unwrap(), "--seeds", "1", "--threads", "1"]);
    assert_eq!(v["records"].as_u64(), Some(4));
    assert_eq!(v["failed"].as_u64(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("experiment_id,seed,n,d,s,"));
    assert_eq!(text.lines().count(), 5);
    std::fs::write(&recipe, "{").unwrap();
    assert_eq!(run(&["sweep", "--config", recipe.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn dln_train_and_diagnose() {
    let v = json_ok(&["dln-train", "--n", "10", "--d", "30", "--alpha", "0.5", "--lr", "0.01", "--max-epochs", "20000", "--loss-tol", "1e-8"]);
    assert_eq!(v["status"], "interpolated");
    assert!(v["p_eff"].as_f64().unwrap() > 1.0);
    let v = json_ok(&["diagnose", "--n", "50", "--d", "500", "--sigma", "0.1", "--q", "3"]);
    assert!(v["report"]["y_norm_ratio"].as_f64().unwrap() > 0.0);
}
