use std::io::{Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn kgrag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgrag")).args(args).output().unwrap()
}

fn write_manifest(dir: &Path) -> PathBuf {
    let body = serde_json::json!({
        "dataset": fixture("crew_gold.jsonl"),
        "corpus": fixture("crew_corpus.jsonl"),
        "kg": {
            "triples": [fixture("crew_triples.tsv")],
            "entity_aliases": fixture("crew_entities.tsv"),
            "relation_aliases": fixture("crew_relations.tsv"),
        },
        "provider": {"kind": "local-lexical"},
        "llm": {"kind": "scripted", "scripts": fixture("crew_scripts.jsonl")},
        "output_dir": "out",
        "parallelism": 2,
        "seed": 1,
    });
    let path = dir.join("manifest.json");
    std::fs::write(&path, body.to_string()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_score_report() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_manifest(dir.path());
    let out = kgrag(&["run", "--manifest", s(&manifest), "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["aggregate"]["em"], 1.0);
    assert_eq!(report["rows"][0]["t"], 3);

    let out_dir = dir.path().join("out");
    let rescored = dir.path().join("rescored");
    let out = kgrag(&[
        "score",
        "--trajectories",
        s(&out_dir.join("trajectories.jsonl")),
        "--gold",
        s(&fixture("crew_gold.jsonl")),
        "--out",
        s(&rescored),
        "--format",
        "json",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let again: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(again["aggregate"], report["aggregate"]);
    assert!(rescored.join("scores.jsonl").is_file());

    let out = kgrag(&["report", "--input", s(&out_dir.join("report.json")), "--format", "csv"]);
    assert!(out.status.success());
    let csv_path = dir.path().join("report.csv");
    std::fs::write(&csv_path, &out.stdout).unwrap();
    let out = kgrag(&["report", "--input", s(&csv_path), "--format", "table"]);
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("id"));
    assert!(table.contains("Skeleton Crew"));
    assert!(table.contains("100.0"));
}

#[test]
fn empty_dump_exits_with_no_work() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("empty.jsonl");
    std::fs::write(&dump, "").unwrap();
    let out = kgrag(&["score", "--trajectories", s(&dump), "--gold", s(&fixture("crew_gold.jsonl"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_manifest_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, r#"{"dataset": "nope.jsonl", "provider": {"kind": "web"}, "llm": {"kind": "scripted", "scripts": "x"}, "output_dir": "o"}"#).unwrap();
    let out = kgrag(&["run", "--manifest", s(&path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
}

fn post(port: u16, path: &str, body: &str) -> std::io::Result<String> {
    let mut stream = TcpStream::connect(("127.0.0.1", port))?;
    write!(
        stream,
        "POST {path} HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    let mut resp = String::new();
    stream.read_to_string(&mut resp)?;
    Ok(resp)
}

#[test]
fn kg_serve_answers_queries() {
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let mut child = Command::new(env!("CARGO_BIN_EXE_kgrag"))
        .args([
            "kg",
            "serve",
            "--triples",
            s(&fixture("crew_triples.tsv")),
            "--entity-aliases",
            s(&fixture("crew_entities.tsv")),
            "--relation-aliases",
            s(&fixture("crew_relations.tsv")),
            "--port",
            &port.to_string(),
        ])
        .spawn()
        .unwrap();
    let started = Instant::now();
    let resp = loop {
        match post(port, "/kg/search", r#"{"entity": ["Natalie Diaz"], "relation": ["award received"]}"#) {
            Ok(r) => break r,
            Err(_) if started.elapsed() < Duration::from_secs(20) => std::thread::sleep(Duration::from_millis(100)),
            Err(e) => {
                child.kill().ok();
                panic!("service never came up: {e}");
            }
        }
    };
    child.kill().ok();
    child.wait().ok();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.contains("Natalie Diaz | award received | 2018 MacArthur Fellowship"));
}
