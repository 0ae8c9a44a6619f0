//! The CLI and the HTTP API drive the same workbench. Each case applies one
//! operation through both on identical copies of a workspace and diffs the
//! JSON they return.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use sciex_core::embedding::HashEmbedder;
use sciex_core::query::{StubLlm, StubMode};
use sciex_core::{Workbench, Workspace};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/tei").join(name)
}

fn cli(ws: &Path, args: &[&str]) -> Value {
    let out = Command::new(env!("CARGO_BIN_EXE_sciex"))
        .arg("--workspace")
        .arg(ws)
        .arg("--json")
        .args(args)
        .env_remove("SCIEX_CONFIG")
        .env("SCIEX_EMBEDDER", "hash")
        .env("SCIEX_LLM", "stub")
        .env("SCIEX_STUB_MODE", "echo")
        .output()
        .unwrap();
    assert!(out.status.success(), "sciex {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else if entry.file_name() != ".lock" {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

async fn api(ws: &Path, method: &str, uri: &str, body: Option<Value>) -> Value {
    let wb = Workbench::new(
        Workspace::open(ws).unwrap(),
        Box::new(HashEmbedder::new()),
        Box::new(StubLlm::new(StubMode::EchoFirstPassage)),
    );
    let app = sciex_service::router(Arc::new(wb), None);
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.oneshot(req.body(body).unwrap()).await.unwrap();
    assert!(resp.status().is_success(), "{method} {uri}: {}", resp.status());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    serde_json::from_slice(&bytes).unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    base: PathBuf,
    lib: String,
    sensing: String,
    paragraphs: Vec<String>,
}

fn seeded() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("base");
    let lib = cli(&base, &["library", "create", "am"])["id"].as_str().unwrap().to_owned();
    let ingested = cli(
        &base,
        &[
            "ingest",
            &lib,
            fixture("two_sections.tei.xml").to_str().unwrap(),
            fixture("rich.tei.xml").to_str().unwrap(),
        ],
    );
    let paragraphs: Vec<String> = ingested
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|r| r["paper"]["sections"].as_array().unwrap().clone())
        .flat_map(|s| s["paragraphs"].as_array().unwrap().clone())
        .map(|p| p["id"].as_str().unwrap().to_owned())
        .collect();
    let defaults = cli(&base, &["retrieval", "import-defaults"]);
    let sensing = defaults
        .as_array()
        .unwrap()
        .iter()
        .find(|d| d["category"] == "sensing")
        .unwrap()["id"]
        .as_str()
        .unwrap()
        .to_owned();
    let cats = ["data", "sensing", "model", "system"];
    for (i, p) in paragraphs.iter().enumerate() {
        cli(&base, &["label", p, "-c", cats[i % 4], "-c", cats[(i + 1) % 4]]);
    }
    Fixture {
        _dir: dir,
        base,
        lib,
        sensing,
        paragraphs,
    }
}

impl Fixture {
    fn fork(&self, name: &str) -> PathBuf {
        let to = self.base.parent().unwrap().join(name);
        copy_dir(&self.base, &to);
        to
    }
}

#[tokio::test]
async fn reads_match() {
    let f = seeded();
    let ws = f.fork("reads");
    let lib = &f.lib;

    let paper_id = cli(&ws, &["papers", lib])[0]["id"].as_str().unwrap().to_owned();
    let pairs: Vec<(Vec<&str>, String)> = vec![
        (vec!["library", "list"], "/libraries".into()),
        (vec!["papers", lib], format!("/libraries/{lib}/papers")),
        (vec!["show", &paper_id], format!("/papers/{paper_id}")),
        (vec!["retrieval", "show", &f.sensing], format!("/retrievals/{}", f.sensing)),
        (vec!["retrieval", "list"], "/retrievals".into()),
        (
            vec!["retrieval", "rank", &f.sensing, "--scope", lib, "-k", "4"],
            format!("/retrievals/{}/rank?scope={lib}&k=4", f.sensing),
        ),
        (
            vec!["search", &paper_id, "-q", "melt", "--mode", "text"],
            format!("/papers/{paper_id}/search?q=melt&mode=text"),
        ),
        (
            vec!["search", lib, "-q", "laser power", "--mode", "semantic", "-k", "3"],
            format!("/papers/{lib}/search?q=laser%20power&mode=semantic&k=3"),
        ),
    ];
    for (args, uri) in pairs {
        let a = cli(&ws, &args);
        let b = api(&ws, "GET", &uri, None).await;
        assert_eq!(a, b, "{args:?} vs {uri}");
    }
}

#[tokio::test]
async fn writes_match() {
    let f = seeded();
    let target = &f.paragraphs[2];
    let cases: Vec<(Vec<String>, &str, String, Value)> = vec![
        (
            vec!["retrieval".into(), "label".into(), f.sensing.clone(), "--neg".into(), target.clone()],
            "POST",
            format!("/retrievals/{}/labels", f.sensing),
            json!({"paragraph_id": target, "polarity": "negative"}),
        ),
        (
            ["retrieval", "weights", &f.sensing, "--a", "2", "--c", "0.5"].map(String::from).to_vec(),
            "PUT",
            format!("/retrievals/{}/weights", f.sensing),
            json!({"a": 2.0, "b": 1.0, "c": 0.5, "d": 1.0}),
        ),
        (
            ["label", target, "-c", "system"].map(String::from).to_vec(),
            "POST",
            "/labels".into(),
            json!({"paragraph_id": target, "labels": ["system"]}),
        ),
        (
            ["correct", target, "--text", "A rewritten paragraph on porosity."].map(String::from).to_vec(),
            "PATCH",
            format!("/paragraphs/{target}"),
            json!({"text": "A rewritten paragraph on porosity."}),
        ),
        (
            [
                "query",
                "-q",
                "Which sensor is sampled?",
                "--source",
                &format!("retrieval:{}", f.sensing),
                "--scope",
                &f.lib,
            ]
            .map(String::from)
            .to_vec(),
            "POST",
            "/query".into(),
            json!({"query": "Which sensor is sampled?", "source": format!("retrieval:{}", f.sensing), "scope": f.lib}),
        ),
    ];
    for (i, (args, method, uri, body)) in cases.into_iter().enumerate() {
        let via_cli = f.fork(&format!("cli{i}"));
        let via_api = f.fork(&format!("api{i}"));
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let a = cli(&via_cli, &args);
        let b = api(&via_api, method, &uri, Some(body)).await;
        assert_eq!(a, b, "{args:?} vs {method} {uri}");
        // the persisted state agrees too
        let la = cli(&via_cli, &["retrieval", "list"]);
        let lb = cli(&via_api, &["retrieval", "list"]);
        assert_eq!(la, lb);
    }
}

#[tokio::test]
async fn export_matches_and_training_reports_match() {
    let f = seeded();
    let ws = f.fork("export");
    let lib = &f.lib;
    let dir = tempfile::tempdir().unwrap();
    let jsonl = dir.path().join("d.jsonl");
    let out = Command::new(env!("CARGO_BIN_EXE_sciex"))
        .arg("--workspace")
        .arg(&ws)
        .args(["dataset", "export", lib, "--seed", "5", "--test-fraction", "0.3", "--out"])
        .arg(&jsonl)
        .output()
        .unwrap();
    assert!(out.status.success());
    let via_api = api(&ws, "GET", &format!("/datasets/export?library={lib}&seed=5&test_fraction=0.3"), None).await;
    let lines: Vec<Value> = fs::read_to_string(&jsonl)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(Value::Array(lines), via_api["records"]);

    let a = cli(&f.fork("train-cli"), &["train", "--library", lib, "--seed", "5", "--test-fraction", "0.3"]);
    let b = api(
        &f.fork("train-api"),
        "POST",
        "/classifier/train?sync=true",
        Some(json!({"library": lib, "seed": 5, "test_fraction": 0.3})),
    )
    .await;
    for key in ["report", "final_loss", "train_records", "test_records", "degenerate_heads"] {
        assert_eq!(a[key], b[key], "{key}");
    }
}

/// `dataset export` piped into `train --dataset` gives the same model as
/// training straight from the library with the same seed.
#[test]
fn export_then_train_equals_direct_train() {
    let f = seeded();
    let lib = &f.lib;
    let direct_ws = f.fork("direct");
    let piped_ws = f.fork("piped");
    let direct = cli(&direct_ws, &["train", "--library", lib, "--seed", "9"]);

    let jsonl = piped_ws.parent().unwrap().join("export.jsonl");
    cli(&piped_ws, &["dataset", "export", lib, "--seed", "9", "--out", jsonl.to_str().unwrap()]);
    let piped = cli(&piped_ws, &["train", "--dataset", jsonl.to_str().unwrap(), "--seed", "9"]);
    for key in ["report", "final_loss", "train_records", "test_records"] {
        assert_eq!(direct[key], piped[key], "{key}");
    }

    let model = |ws: &Path, id: &str| -> Value {
        let text = fs::read_to_string(ws.join("models").join(format!("{id}.json"))).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        v["model"]["heads"].clone()
    };
    assert_eq!(
        model(&direct_ws, direct["model_id"].as_str().unwrap()),
        model(&piped_ws, piped["model_id"].as_str().unwrap())
    );
}
