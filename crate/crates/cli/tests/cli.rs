use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn voi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voi"))
        .args(args)
        .env_remove("VOI_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = voi(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    serde_json::from_str(&stdout(&all)).unwrap()
}

fn validator() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/voi-design-1.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn column(doc: &Value, name: &str) -> usize {
    doc["columns"]
        .as_array()
        .unwrap()
        .iter()
        .position(|c| c == name)
        .unwrap()
}

/// Row whose first cell equals `key`.
fn row(doc: &Value, key: f64) -> &Vec<Value> {
    doc["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r.as_array().unwrap())
        .find(|r| r[0] == key)
        .unwrap()
}

#[test]
fn output_is_byte_deterministic() {
    for args in [
        &["fig-kl", "--k-max", "12"][..],
        &["fig-deeper", "--k", "30"],
        &["fig-versus", "--k", "20"],
        &["fig-singleton"],
        &["sweep", "--family", "pairwise", "--k", "8"],
        &["verify", "mc", "--draws", "500"],
    ] {
        let first = voi(args);
        let again = voi(args);
        assert!(first.status.success(), "{args:?}");
        assert_eq!(first.stdout, again.stdout, "{args:?}");
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_voi"))
            .args(["sweep", "--k", "10", "--format", "json"])
            .env("VOI_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    assert!(one.status.success());
    assert_eq!(one.stdout, run("3").stdout);
}

#[test]
fn kl_rows_match_known_correlations() {
    let doc = json(&["fig-kl"]);
    let rho = column(&doc, "rho_eq");
    let r5 = row(&doc, 5.0)[rho].as_f64().unwrap();
    let r50 = row(&doc, 50.0)[rho].as_f64().unwrap();
    assert!((r5 - 0.82).abs() <= 0.01, "{r5}");
    assert!((r50 - 0.97).abs() <= 0.01, "{r50}");
    assert_eq!(doc["rows"].as_array().unwrap().len(), 49);
    assert_eq!(row(&doc, 5.0)[column(&doc, "d_pairwise_rho_0")], 0.0);
}

#[test]
fn singleton_extremes() {
    let doc = json(&["fig-singleton"]);
    let value = column(&doc, "value");
    assert!((row(&doc, 0.25)[value].as_f64().unwrap() - 0.45).abs() < 1e-12);
    assert!((row(&doc, -0.25)[value].as_f64().unwrap() - 1.0 / 12.0).abs() < 1e-12);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 101);
}

#[test]
fn csv_header_and_columns() {
    let text = stdout(&[
        "fig-deeper",
        "--k",
        "10",
        "--alphas",
        "0.1",
        "--n-list",
        "5",
    ]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# schema: voi-design/1");
    assert!(lines[1].starts_with("# command: fig-deeper {"));
    assert_eq!(lines[2], "alpha,n,J,rank_J,value_J,pi_J,r_star");
    assert_eq!(lines.len(), 3 + 11);
    assert!(lines[3].starts_with("0.1,5,0,"));
}

#[test]
fn documents_match_schema() {
    let v = validator();
    for args in [
        &["fig-kl", "--k-max", "6"][..],
        &["fig-deeper", "--k", "10"],
        &["fig-versus", "--k", "10", "--targets", "0.5,3"],
        &["fig-singleton", "--t-step", "0.25"],
        &["sweep", "--family", "random-walk", "--k", "6"],
        &["verify", "thresholds,mps", "--verbose"],
    ] {
        let doc = json(args);
        let errors: Vec<String> = v.iter_errors(&doc).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{args:?}: {errors:?}");
    }
    assert!(!v.is_valid(&serde_json::json!({ "schema": "voi-design/2" })));
}

#[test]
fn exit_codes() {
    assert_eq!(voi(&["verify", "thresholds"]).status.code(), Some(0));
    assert_eq!(voi(&["verify", "nonsense"]).status.code(), Some(2));
    assert_eq!(
        voi(&["fig-deeper", "--alphas", "1.5"]).status.code(),
        Some(2)
    );
    assert_eq!(
        voi(&["fig-kl", "--config", "/no/such/file.toml"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        voi(&["fig-kl", "--out", "/no/such/dir/out.csv"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(voi(&["no-such-command"]).status.code(), Some(2));
    let bad_threads = Command::new(env!("CARGO_BIN_EXE_voi"))
        .args(["fig-kl"])
        .env("VOI_THREADS", "zero")
        .output();
    assert_eq!(bad_threads.unwrap().status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    let out = dir.path().join("out.json");
    std::fs::write(
        &cfg,
        format!(
            "command = \"fig-versus\"\nformat = \"json\"\nout = {:?}\n[parameters]\nk = 12\nalphas = [0.05]\ntargets = [0.5]\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let status = voi(&[
        "fig-versus",
        "--config",
        cfg.to_str().unwrap(),
        "--targets",
        "0.25,0.75",
    ]);
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    assert!(status.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["parameters"]["k"], 12);
    assert_eq!(doc["parameters"]["alphas"], serde_json::json!([0.05]));
    assert_eq!(
        doc["parameters"]["targets"],
        serde_json::json!([0.25, 0.75])
    );
    assert_eq!(doc["rows"].as_array().unwrap().len(), 2 * 13);

    assert_eq!(
        voi(&["fig-kl", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    std::fs::write(&cfg, "[parameters]\nunknown_key = 1\n").unwrap();
    assert_eq!(
        voi(&["fig-versus", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn versus_flags_unattainable_targets() {
    let doc = json(&[
        "fig-versus",
        "--k",
        "5",
        "--alphas",
        "0.2",
        "--targets",
        "1.5",
    ]);
    let status = column(&doc, "status");
    let n = column(&doc, "n_min");
    for r in doc["rows"].as_array().unwrap() {
        assert_eq!(r[status], "unattainable");
        assert!(r[n].is_null());
    }
}

#[test]
fn verify_json_report() {
    let doc = json(&["verify", "mc", "--draws", "2000", "--seed", "7"]);
    assert_eq!(doc["seed"], 7);
    assert_eq!(doc["draws"], 2000);
    assert_eq!(doc["suites"][0]["suite"], "mc");
    assert_eq!(doc["passed"], doc["suites"][0]["passed"]);
}
