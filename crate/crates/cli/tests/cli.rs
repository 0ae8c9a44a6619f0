use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/tei").join(name)
}

fn sciex(ws: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sciex"))
        .arg("--workspace")
        .arg(ws)
        .args(args)
        .env_remove("SCIEX_CONFIG")
        .env("SCIEX_EMBEDDER", "hash")
        .env("SCIEX_LLM", "stub")
        .env("SCIEX_STUB_MODE", "refuse")
        .output()
        .unwrap()
}

fn ok(ws: &Path, args: &[&str]) -> String {
    let out = sciex(ws, args);
    assert!(
        out.status.success(),
        "sciex {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(ws: &Path, args: &[&str]) -> serde_json::Value {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    serde_json::from_str(&ok(ws, &full)).unwrap()
}

#[test]
fn unknown_ids_fail_with_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = sciex(dir.path(), &["show", "does-not-exist"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[not_found]"), "{err}");

    let out = sciex(dir.path(), &["query", "-q", "x", "--source", "bogus", "--scope", "y"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid_argument"));
}

#[test]
fn library_listing_and_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    let lib = ok(ws, &["library", "create", "am"]).trim().to_owned();
    assert_eq!(lib.len(), 32);
    ok(ws, &["ingest", &lib, fixture("two_sections.tei.xml").to_str().unwrap()]);
    let libs = json(ws, &["library", "list"]);
    assert_eq!(libs[0]["id"], lib.as_str());
    assert_eq!(libs[0]["paper_count"], 1);

    let papers = json(ws, &["papers", &lib]);
    assert_eq!(papers[0]["paragraph_count"], 5);
    let again = json(ws, &["ingest", &lib, fixture("two_sections.tei.xml").to_str().unwrap()]);
    assert_eq!(again[0]["created"], false);
}

#[test]
fn rank_lines_show_score_and_id() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    let lib = ok(ws, &["library", "create", "am"]).trim().to_owned();
    ok(ws, &["ingest", &lib, fixture("rich.tei.xml").to_str().unwrap()]);
    let spec = json(ws, &["retrieval", "create", "--name", "heat", "-q", "thermistor temperature sensor"]);
    let id = spec["id"].as_str().unwrap();
    let text = ok(ws, &["retrieval", "rank", id, "--scope", &lib, "-k", "2"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let fields: Vec<&str> = lines[0].split_whitespace().collect();
    assert_eq!(fields[0], "1");
    assert!(fields[1].ends_with('%'));
    assert_eq!(fields[2].len(), 32);

    let hits = json(ws, &["retrieval", "rank", id, "--scope", &lib, "-k", "2"]);
    assert_eq!(hits[0]["paragraph_id"], fields[2]);
}

#[test]
fn label_correct_and_refusing_query() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    let lib = ok(ws, &["library", "create", "am"]).trim().to_owned();
    let ingested = json(ws, &["ingest", &lib, fixture("two_sections.tei.xml").to_str().unwrap()]);
    let pid = ingested[0]["paper"]["sections"][0]["paragraphs"][0]["id"].as_str().unwrap().to_owned();

    let rec = json(ws, &["label", &pid, "-c", "data", "-c", "2"]);
    assert_eq!(rec["labels"], serde_json::json!(["data", "model"]));
    let fix = json(ws, &["correct", &pid, "--text", "Melt pool images were recorded."]);
    assert_ne!(fix["paragraph"]["id"], pid.as_str());

    let ans = json(ws, &["query", "-q", "What was recorded?", "--scope", &lib, "-k", "2"]);
    assert_eq!(ans["refused"], true);
    assert_eq!(ans["local_refusal"], false);
    assert_eq!(ans["used_passages"].as_array().unwrap().len(), 2);
}

#[test]
fn text_search_reports_matches() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path();
    let lib = ok(ws, &["library", "create", "am"]).trim().to_owned();
    ok(ws, &["ingest", &lib, fixture("rich.tei.xml").to_str().unwrap()]);
    let out = json(ws, &["search", &lib, "-q", "SENSOR"]);
    assert_eq!(out["mode"], "text");
    assert!(!out["hits"].as_array().unwrap().is_empty());
    let out = json(ws, &["search", &lib, "-q", "SENSOR", "--case-sensitive"]);
    assert!(out["hits"].as_array().unwrap().is_empty());
}
