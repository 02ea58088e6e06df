use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn ctdgan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctdgan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn quick_fit(dir: &Path, extra: &[&str]) -> PathBuf {
    let data = data_dir();
    let out = dir.join("model.json");
    let (csv, schema) = (data.join("planted.csv"), data.join("planted.schema.json"));
    let mut args = vec![
        "--log",
        "quiet",
        "fit",
        "--data",
        s(&csv),
        "--schema",
        s(&schema),
        "--out",
        s(&out),
        "--epochs",
        "2",
        "--seed",
        "42",
    ];
    args.extend_from_slice(extra);
    let o = ctdgan(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn fit_then_inspect_reports_a_stochastic_probability_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let model = quick_fit(dir.path(), &["--plot", s(&dir.path().join("loss.svg"))]);
    assert!(std::fs::read_to_string(dir.path().join("loss.svg"))
        .unwrap()
        .starts_with("<svg"));
    let o = ctdgan(&["inspect", "--model", s(&model)]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("k: ") && text.contains("layout width: ") && text.contains("final losses"));

    let o = ctdgan(&["inspect", "--model", s(&model), "--json"]);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for row in doc["P_s"].as_array().unwrap() {
        let sum: f64 = row.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
        assert!((sum - 1.0).abs() <= 1e-12);
    }
    assert_eq!(doc["n_classes"], 2);
}

#[test]
fn sample_and_balance_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let model = quick_fit(dir.path(), &[]);
    let out = dir.path().join("s.csv");
    let o = ctdgan(&[
        "--log",
        "quiet",
        "sample",
        "--model",
        s(&model),
        "--n",
        "25",
        "--class",
        "minority",
        "--where",
        "shade=light",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x1,x2,shade,label");
    assert_eq!(lines.len(), 26);
    assert!(lines[1..].iter().all(|l| l.ends_with(",minority")));

    let bal = dir.path().join("b.csv");
    let o = ctdgan(&[
        "--log",
        "quiet",
        "balance",
        "--model",
        s(&model),
        "--data",
        s(&data_dir().join("planted.csv")),
        "--out",
        s(&bal),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&bal).unwrap();
    let minority = text.lines().filter(|l| l.ends_with(",minority")).count();
    let majority = text.lines().filter(|l| l.ends_with(",majority")).count();
    assert_eq!((majority, minority), (500, 500));
}

#[test]
fn infer_schema_matches_the_bundled_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("schema.json");
    let o = ctdgan(&[
        "infer-schema",
        "--data",
        s(&data_dir().join("planted.csv")),
        "--target",
        "label",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let inferred: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    let bundled: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data_dir().join("planted.schema.json")).unwrap()).unwrap();
    assert_eq!(inferred, bundled);
}

#[test]
fn usage_errors_exit_with_one() {
    let o = ctdgan(&["fit", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(ctdgan(&["--help"]).status.code(), Some(0));
    assert_eq!(ctdgan(&[]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let data = data_dir();
    let missing = ctdgan(&[
        "fit",
        "--data",
        "/nonexistent.csv",
        "--schema",
        s(&data.join("planted.schema.json")),
        "--out",
        s(&dir.path().join("m.json")),
    ]);
    assert_eq!(missing.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&missing.stderr);
    assert_eq!(stderr.lines().count(), 1, "{stderr}");

    let bad_cfg = ctdgan(&[
        "fit",
        "--data",
        s(&data.join("planted.csv")),
        "--schema",
        s(&data.join("planted.schema.json")),
        "--out",
        s(&dir.path().join("m.json")),
        "--batch-size",
        "15",
    ]);
    assert_eq!(bad_cfg.status.code(), Some(1));
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn stalled_sampling_exits_with_two_and_writes_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let model = quick_fit(dir.path(), &["--max-sample-attempts-factor", "1"]);
    let out = dir.path().join("s.csv");
    let o = ctdgan(&[
        "--log",
        "quiet",
        "sample",
        "--model",
        s(&model),
        "--n",
        "500",
        "--class",
        "minority",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let diag = dir.path().join("s.csv.diagnostic.json");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(diag).unwrap()).unwrap();
    assert_eq!(doc["command"], "sample");
    assert_eq!(doc["details"]["kind"], "acceptance_stalled");
    assert_eq!(doc["details"]["requested"], 500);
}

#[test]
fn evaluate_writes_report_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let data = data_dir();
    let out = dir.path().join("report.json");
    let plot = dir.path().join("bars.svg");
    let o = ctdgan(&[
        "--log",
        "quiet",
        "--threads",
        "1",
        "evaluate",
        "--protocol",
        "oversampling",
        "--data",
        s(&data.join("planted.csv")),
        "--schema",
        s(&data.join("planted.schema.json")),
        "--methods",
        "none,copy",
        "--seeds",
        "0",
        "--folds",
        "3",
        "--classifier",
        "1nn",
        "--out",
        s(&out),
        "--plot",
        s(&plot),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["protocol"], "oversampling");
    assert_eq!(doc["dataset"], "planted");
    assert_eq!(doc["methods"].as_array().unwrap().len(), 2);
    assert_eq!(doc["methods"][0]["cells"].as_array().unwrap().len(), 3);
    assert!(std::fs::read_to_string(plot).unwrap().contains("<rect"));

    let bad = ctdgan(&[
        "evaluate",
        "--protocol",
        "oversampling",
        "--data",
        s(&data.join("planted.csv")),
        "--schema",
        s(&data.join("planted.schema.json")),
        "--methods",
        "smote",
        "--out",
        s(&out),
    ]);
    assert_eq!(bad.status.code(), Some(1));
}
