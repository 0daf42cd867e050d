use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn instance(name: &str) -> PathBuf {
    root().join("instances").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modelspace")).args(args).output().expect("binary runs")
}

fn run_path(cmd: &str, file: &str, rest: &[&str]) -> Output {
    let p = instance(file);
    let mut args = vec![cmd, p.to_str().unwrap()];
    args.extend_from_slice(rest);
    run(&args)
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}); stderr: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn validator(name: &str) -> jsonschema::Validator {
    let text = std::fs::read_to_string(root().join("schemas").join(name)).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_report_valid(v: &Value) {
    let errors: Vec<String> = validator("report.schema.json").iter_errors(v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "report violates schema: {errors:?}");
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("{key} missing or not a number"))
}

#[test]
fn norm_of_lambda_squared_at_origin() {
    let out = run_path("norm", "lambda2_disc.json", &["--alpha", "0,0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_report_valid(&v);
    assert_eq!(num(&v, "closed_norm"), 1.0);
    assert_eq!(v["branch"], "UnitNorm");
    assert_eq!(v["seed"], 42);
    assert!(num(&v, "wall_time") >= 0.0);
}

#[test]
fn norm_of_diag_lambda_one_at_half() {
    let out = run_path("norm", "diag_lambda_1_disc.json", &["--alpha", "0.5,0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_report_valid(&v);
    assert!((num(&v, "closed_norm") - 0.5).abs() < 1e-12);
    assert!(num(&v, "abs_diff") < 1e-8);
    assert_eq!(v["branch"], "StrictContraction");
}

#[test]
fn alpha_outside_domain_is_a_validation_error() {
    for (file, alpha) in [("lambda_disc.json", "1.5,0"), ("blaschke_upper.json", "0.3,-0.1"), ("debranges_upper.json", "1,0")] {
        let out = run_path("norm", file, &["--alpha", alpha]);
        assert_eq!(out.status.code(), Some(1), "{file}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("alpha not in Omega_+"), "{file}");
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn tolerance_failure_exits_two() {
    let out = run_path("norm", "degree3_disc.json", &["--alpha", "0.2,0.1", "--tol", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_report_valid(&v);
    assert_eq!(v["pass"], false);
}

#[test]
fn unreadable_and_malformed_instances() {
    let out = run(&["norm", "/nonexistent/instance.json", "--alpha", "0,0"]);
    assert_eq!(out.status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"domain": "disc", "m": 1}"#).unwrap();
    let out = run(&["norm", bad.to_str().unwrap(), "--alpha", "0,0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
    let out = run_path("norm", "lambda_disc.json", &["--alpha", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run_path("norm", "lambda_disc.json", &["--alpha", "0,0", "--tol", "-1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn de_branges_norm_report() {
    for (file, alpha) in [("debranges_disc.json", "0.3,0.2"), ("debranges_upper.json", "-0.4,0.9")] {
        let out = run_path("norm", file, &["--alpha", alpha]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let v = json(&out);
        assert_report_valid(&v);
        assert_eq!(v["instance_kind"], "de_branges");
        assert!(num(&v, "abs_diff") < 1e-8);
        assert!(v["identity"]["max_residual"].as_f64().unwrap() < 1e-10);
        assert!(v["identity"]["max_complement_residual"].as_f64().unwrap() < 1e-9);
        assert!(v["dual_path"].is_null());
    }
}

#[test]
fn cayley_transfers_of_scalar_powers() {
    for (file, expect) in [("lambda_disc.json", 0.0), ("lambda2_disc.json", 1.0)] {
        for target in ["upper", "right"] {
            let out = run_path("transfer", file, &["--target", target]);
            assert_eq!(out.status.code(), Some(0), "{file} {target}");
            let v = json(&out);
            assert_report_valid(&v);
            assert!((num(&v, "source_norm") - expect).abs() < 1e-9);
            assert!((num(&v, "target_norm") - expect).abs() < 1e-9);
            assert_eq!(v["target_domain"], target);
        }
    }
}

#[test]
fn recentring_a_degree_three_product() {
    let out = run_path("transfer", "degree3_disc.json", &["--alpha", "0.4,-0.2", "--target", "recenter"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_report_valid(&v);
    assert!(num(&v, "norm_diff") < 1e-9);
    assert!(num(&v, "unitarity_residual") < 1e-10);
    assert_eq!(v["target_alpha"], serde_json::json!([0.0, 0.0]));
}

#[test]
fn transfer_rejects_invalid_requests() {
    let out = run_path("transfer", "debranges_disc.json", &["--target", "recenter", "--alpha", "0.1,0"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run_path("transfer", "blaschke_upper.json", &["--target", "right", "--alpha", "0,1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("disc"));
    let out = run_path("transfer", "lambda_disc.json", &["--target", "sideways"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_with_zero_count_is_empty() {
    let out = run(&["verify", "--count", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_report_valid(&v);
    assert_eq!(v["instances"], 0);
    assert_eq!(v["cells"].as_array().unwrap().len(), 0);
    assert_eq!(v["pass"], true);
}

#[test]
fn verify_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("summary.json");
    let a = run(&["verify", "--seed", "42", "--count", "1", "--json-out", file.to_str().unwrap()]);
    let b = run(&["verify", "--seed", "42", "--count", "1"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(std::fs::read(&file).unwrap(), a.stdout);
    let v = json(&a);
    assert_report_valid(&v);
    assert_eq!(v["cells"].as_array().unwrap().len(), 54);
    assert!(num(&v, "max_abs_diff") < 1e-8);
    let c = run(&["verify", "--seed", "43", "--count", "1"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn verify_five_per_cell() {
    let out = run(&["verify", "--seed", "42", "--count", "5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["instances"], 270);
    assert!(num(&v, "max_abs_diff") < 1e-8);
}

#[test]
fn shipped_instances_match_the_instance_schema() {
    let v = validator("instance.schema.json");
    for entry in std::fs::read_dir(root().join("instances")).unwrap() {
        let path = entry.unwrap().path();
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert!(v.is_valid(&doc), "{}", path.display());
    }
}

#[test]
fn grid_cap_is_respected() {
    // the degree-3 instance needs more than 8 nodes to converge
    let out = run_path("norm", "degree3_disc.json", &["--alpha", "0.2,0.1", "--grid-n", "8"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("did not converge"));
}
