use lacelab_cli::{run, run_spec_file, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_OK};
use serde_json::Value;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["lacelab"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).expect("valid JSON document")
}

#[test]
fn zero_dimension_is_rejected_with_field_name() {
    let (code, _, err) = invoke(&["rw-beta", "--family", "nn", "--d", "0", "--M", "8"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("`d`"), "{err}");
}

#[test]
fn unknown_subcommand_and_bad_flags_exit_one() {
    assert_eq!(invoke(&["frobnicate"]).0, EXIT_INVALID);
    assert_eq!(invoke(&["rw-beta", "--family", "nn", "--d", "three"]).0, EXIT_INVALID);
    let (code, _, err) = invoke(&["dist-check", "--family", "hexagonal", "--d", "2"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("`family`"));
}

#[test]
fn help_and_version_exit_zero() {
    let (code, out, _) = invoke(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("rw-beta"));
    assert_eq!(invoke(&["--version"]).0, EXIT_OK);
}

#[test]
fn stochastic_subcommands_require_seed() {
    let (code, _, err) = invoke(&["perc", "--family", "nn", "--d", "1", "--z", "0.5", "--M", "4"]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("--seed"));
    let (code, _, _) = invoke(&["ising", "--family", "nn", "--d", "1", "--z", "0.5", "--M", "4"]);
    assert_eq!(code, EXIT_INVALID);
}

#[test]
fn rw_beta_reports_sequence_and_flags() {
    let (code, out, err) = invoke(&["rw-beta", "--family", "nn", "--d", "5", "--s", "2", "--M", "8,16,32"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let doc = json(&out);
    assert_eq!(doc["subcommand"], "rw-beta");
    assert!(doc["version"].as_str().unwrap().starts_with("lacelab "));
    assert_eq!(doc["params"]["M"], serde_json::json!([8, 16, 32]));
    let r = &doc["result"];
    assert_eq!(r["sequence"].as_array().unwrap().len(), 3);
    assert_eq!(r["divergent"], false);
    assert_eq!(r["finite_on_lattice"], true);

    let (_, out, _) = invoke(&["rw-beta", "--family", "nn", "--d", "1", "--s", "2", "--M", "16,32,64"]);
    assert_eq!(json(&out)["result"]["divergent"], true);
}

#[test]
fn dist_check_passes_and_fails() {
    let (code, out, _) = invoke(&[
        "dist-check",
        "--dist",
        r#"{"family":"uniform","d":5,"L":3}"#,
        "--grid-res",
        "8",
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(json(&out)["passed"], true);
    // The nearest-neighbor symbol reaches −1, so the upper-gap condition fails.
    let (code, out, err) = invoke(&["dist-check", "--family", "nn", "--d", "2"]);
    assert_eq!(code, EXIT_CHECK_FAILED);
    assert_eq!(json(&out)["passed"], false);
    assert!(err.contains("check failed"));
}

#[test]
fn beta_table_writes_csv_next_to_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.json");
    let (code, out, _) = invoke(&["beta-table", "--dims", "3,4,5", "--out", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());
    let csv = std::fs::read_to_string(dir.path().join("table.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,y,yerr,note"));
    assert_eq!(lines.count(), 3);
    let doc = json(&std::fs::read_to_string(path).unwrap());
    assert_eq!(doc["result"]["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let args = [
        "perc",
        "--family",
        "nn",
        "--d",
        "2",
        "--z",
        "0.4,0.8",
        "--M",
        "3",
        "--replicas",
        "200",
        "--seed",
        "11",
    ];
    let (c1, a, _) = invoke(&args);
    let (c2, b, _) = invoke(&args);
    assert_eq!((c1, c2), (EXIT_OK, EXIT_OK));
    assert_eq!(a, b);
    let doc = json(&a);
    assert_eq!(doc["seed"], 11);
    assert_eq!(doc["uncertainty"], "standard error");
    assert!(doc["result"]["points"][0]["exact"]["chi"].is_number());

    let ising = [
        "ising",
        "--J-spec",
        r#"{"d":1,"entries":[[[1],0.5],[[-1],0.5]]}"#,
        "--z",
        "0.3",
        "--M",
        "4",
        "--sweeps",
        "2000",
        "--seed",
        "5",
    ];
    let (c1, a, e) = invoke(&ising);
    let (_, b, _) = invoke(&ising);
    assert_eq!(c1, EXIT_OK, "{e}");
    assert_eq!(a, b);
}

#[test]
fn saw_emits_exact_counts() {
    let (code, out, _) = invoke(&["saw", "--family", "nn", "--d", "2", "--nmax", "6", "--z", "0.2"]);
    assert_eq!(code, EXIT_OK);
    let doc = json(&out);
    let counts: Vec<&str> = doc["result"]["walk_counts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(counts, ["1", "4", "12", "36", "100", "284", "780"]);
    assert_eq!(doc["result"]["reconstruction"]["exact"], true);
}

#[test]
fn free_model_diagnostics() {
    let (code, out, err) = invoke(&["diag", "--free", "--family", "nn", "--d", "3", "--M", "8", "--z", "0.5"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(json(&out)["uncertainty"], "exact");
    let (code, out, _) = invoke(&[
        "infrared", "--free", "--family", "uniform", "--d", "2", "--L", "2", "--M", "16",
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(json(&out)["checks"].as_array().unwrap().len(), 9);
    assert_eq!(invoke(&["diag", "--family", "nn", "--d", "3"]).0, EXIT_INVALID);
}

#[test]
fn experiment_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("exp.json");
    let out_path = dir.path().join("res.json");
    let body = serde_json::json!({
        "subcommand": "perc",
        "parameters": { "family": "nn", "d": 1, "z": [0.5], "M": 5, "replicas": 100 },
        "seed": 3,
        "output": out_path,
    });
    std::fs::write(&spec, body.to_string()).unwrap();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    assert_eq!(
        run_spec_file(&spec, &mut out, &mut err),
        EXIT_OK,
        "{}",
        String::from_utf8_lossy(&err)
    );
    let doc = json(&std::fs::read_to_string(&out_path).unwrap());
    assert_eq!(doc["seed"], 3);

    std::fs::write(&spec, r#"{"subcommand":"perc","params":{}}"#).unwrap();
    assert_eq!(run_spec_file(&spec, &mut out, &mut err), EXIT_INVALID);
}
