use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

const SVF: &str = env!("CARGO_BIN_EXE_svf");

fn svf(args: &[&str]) -> Output {
    Command::new(SVF).args(args).env_remove("SVF_CACHE_DIR").output().unwrap()
}

fn ok(args: &[&str]) {
    let out = svf(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn checksums(dir: &Path) -> BTreeMap<PathBuf, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != "manifest.json" {
                let digest = hex::encode(Sha256::digest(fs::read(&path).unwrap()));
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), digest);
            }
        }
    }
    out
}

fn lines(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn synth_dir(root: &Path, seed: u64) -> PathBuf {
    let out = root.join(format!("scene{seed}"));
    ok(&["synth", "--seed", &seed.to_string(), "--objects", "6", "--frames", "12", "--out", p(&out)]);
    out
}

fn generate(root: &Path, scenes: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = root.join(name);
    let mut args = vec!["generate", "--scenes", p(scenes), "--out", p(&out), "--extra-vocabulary", "piano,oven"];
    args.extend_from_slice(extra);
    ok(&args);
    out
}

#[test]
fn help_and_usage_exit_codes() {
    assert!(svf(&["--help"]).status.success());
    assert!(svf(&["generate", "--help"]).status.success());
    assert_eq!(svf(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(svf(&["generate"]).status.code(), Some(2));
}

#[test]
fn synth_is_reproducible_and_loadable() {
    let root = tempfile::tempdir().unwrap();
    let a = root.path().join("a");
    let b = root.path().join("b");
    for d in [&a, &b] {
        ok(&["synth", "--seed", "7", "--objects", "5", "--frames", "20", "--out", p(d)]);
    }
    assert_eq!(checksums(&a), checksums(&b));
    assert!(a.join("manifest.json").is_file());
    let scene = svf::load_scene(&a).unwrap();
    assert_eq!((scene.frames.len(), scene.objects.len()), (20, 5));

    let out = svf(&["synth", "--objects", "10000", "--room-half-extent", "0.5", "--out", p(&root.path().join("c"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot place"));
}

#[test]
fn generate_flags_and_config() {
    let root = tempfile::tempdir().unwrap();
    let scenes = synth_dir(root.path(), 3);
    let cfg = root.path().join("gen.ini");
    fs::write(&cfg, "[generation]\nseed = 4\ncategories = counting\n").unwrap();
    let out = generate(root.path(), &scenes, "counting", &["--config", p(&cfg)]);
    let recs = lines(&out.join("dataset.jsonl"));
    assert!(!recs.is_empty());
    assert!(recs.iter().all(|r| r["category"] == "counting"));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "generate");
    assert_eq!(manifest["seed"], 4);

    // flags win over the file
    let out = generate(root.path(), &scenes, "override", &["--config", p(&cfg), "--categories", "grounding_3d", "--convention", "aabb"]);
    let recs = lines(&out.join("dataset.jsonl"));
    assert!(!recs.is_empty());
    assert!(recs.iter().all(|r| r["category"] == "grounding_3d" && r["convention"] == "aabb"));

    let a = generate(root.path(), &scenes, "a", &[]);
    let b = generate(root.path(), &scenes, "b", &["--jobs", "3"]);
    assert_eq!(fs::read(a.join("dataset.jsonl")).unwrap(), fs::read(b.join("dataset.jsonl")).unwrap());

    let bad = root.path().join("bad.ini");
    fs::write(&bad, "seeds = 4\n").unwrap();
    let out = svf(&["generate", "--scenes", p(&scenes), "--config", p(&bad), "--out", p(&root.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
}

const PANEL: &[&str] = &[
    "--judges",
    "local:seeded_random(0.5),local:seeded_random(0.5),local:seeded_random(0.5)",
    "--judges",
    "local:majority_class,local:always_wrong,local:seeded_random(0.3),local:seeded_random(0.7)",
];

fn filter(bench: &Path, out: &Path, extra: &[&str], cache: Option<&Path>) -> Output {
    let mut args = vec!["filter", "--benchmark", p(bench), "--out", p(out)];
    args.extend_from_slice(PANEL);
    args.extend_from_slice(extra);
    let mut cmd = Command::new(SVF);
    cmd.args(&args).env_remove("SVF_CACHE_DIR");
    if let Some(c) = cache {
        cmd.env("SVF_CACHE_DIR", c);
    }
    cmd.output().unwrap()
}

#[test]
fn filter_is_deterministic_and_resumable() {
    let root = tempfile::tempdir().unwrap();
    let scenes = synth_dir(root.path(), 5);
    let bench = generate(root.path(), &scenes, "g", &[]).join("dataset.jsonl");
    let a = root.path().join("fa");
    let b = root.path().join("fb");
    assert!(filter(&bench, &a, &["--jobs", "1"], None).status.success());
    assert!(filter(&bench, &b, &["--jobs", "8"], None).status.success());
    for f in ["kept.jsonl", "removed.jsonl"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let removed = lines(&a.join("removed.jsonl"));
    assert!(!removed.is_empty());
    assert!(removed.iter().all(|r| !r["category"].as_str().unwrap().starts_with("grounding")));

    // interrupted run: half the cache plus a torn line, in a relocated cache
    let cache = root.path().join("relocated");
    let c = root.path().join("fc");
    assert!(filter(&bench, &c, &[], Some(&cache)).status.success());
    assert!(!c.join("cache").exists());
    let log = cache.join("verdicts.jsonl");
    let text = fs::read_to_string(&log).unwrap();
    let all: Vec<&str> = text.lines().collect();
    let mut partial = all[..all.len() / 2].join("\n");
    partial.push_str("\n{\"query_sha256\":\"ab");
    fs::write(&log, partial).unwrap();
    assert!(filter(&bench, &c, &[], Some(&cache)).status.success());
    let summary: Value = serde_json::from_str(&fs::read_to_string(c.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["cached_verdicts_reused"], all.len() / 2);
    for f in ["kept.jsonl", "removed.jsonl"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(c.join(f)).unwrap());
    }

    let out = filter(&bench, &root.path().join("fd"), &["--threshold", "8"], None);
    assert_eq!(out.status.code(), Some(2));
}

/// Minimal HTTP/1.1 judge answering "Yes" to everything.
fn spawn_http_judge() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut s) = stream else { continue };
            std::thread::spawn(move || {
                let mut reader = BufReader::new(s.try_clone().unwrap());
                loop {
                    let mut len = 0usize;
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        return;
                    }
                    loop {
                        line.clear();
                        reader.read_line(&mut line).unwrap();
                        if line.trim().is_empty() {
                            break;
                        }
                        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                            len = v.trim().parse().unwrap();
                        }
                    }
                    let mut body = vec![0; len];
                    reader.read_exact(&mut body).unwrap();
                    let query: Value = serde_json::from_slice(&body).unwrap();
                    assert!(query["record_id"].is_string() && query["question"].is_string());
                    let reply = json!({"answer": "Yes"}).to_string();
                    let resp = format!(
                        "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{reply}",
                        reply.len()
                    );
                    if s.write_all(resp.as_bytes()).is_err() {
                        return;
                    }
                }
            });
        }
    });
    format!("http://{addr}/judge")
}

#[test]
fn http_judges_and_unreachable_endpoints() {
    let root = tempfile::tempdir().unwrap();
    let scenes = synth_dir(root.path(), 6);
    let bench = generate(root.path(), &scenes, "g", &["--categories", "binary_presence,counting"]).join("dataset.jsonl");
    let url = spawn_http_judge();
    let out = root.path().join("f");
    ok(&["filter", "--benchmark", p(&bench), "--judges", &format!("yes=http:{url}"), "--threshold", "1", "--out", p(&out)]);
    let verdicts = lines(&out.join("verdicts.jsonl"));
    assert!(!verdicts.is_empty());
    assert!(verdicts.iter().all(|v| v["judge_id"] == "yes" && v["raw_answer"] == "Yes"));
    let removed = lines(&out.join("removed.jsonl"));
    assert!(removed.iter().all(|r| r["answer_text"] == "Yes"));
    assert!(removed.iter().any(|r| r["category"] == "binary_presence"));

    let dead = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let out = root.path().join("dead");
    ok(&[
        "filter", "--benchmark", p(&bench), "--judges", &format!("http:http://{dead}/judge"),
        "--threshold", "1", "--timeout-s", "2", "--out", p(&out),
    ]);
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["removed"], 0);
    assert_eq!(summary["incomplete"].as_array().unwrap().len(), lines(&bench).len());
}

#[test]
fn eval_reports_and_schema_errors() {
    let root = tempfile::tempdir().unwrap();
    let scenes = synth_dir(root.path(), 8);
    let bench = generate(root.path(), &scenes, "g", &[]).join("dataset.jsonl");
    let preds = root.path().join("pred.jsonl");
    ok(&["oracle", "--benchmark", p(&bench), "--out", p(&preds)]);
    let report = root.path().join("report");
    ok(&["eval", "--benchmark", p(&bench), "--predictions", p(&preds), "--report", p(&report), "--scenes", p(&scenes)]);
    let r: Value = serde_json::from_str(&fs::read_to_string(report.join("report.json")).unwrap()).unwrap();
    assert_eq!(r["average"], 100.0);
    assert!(fs::read_to_string(report.join("report.txt")).unwrap().contains("average"));

    let empty = root.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    ok(&["eval", "--benchmark", p(&bench), "--predictions", p(&empty), "--report", p(&root.path().join("r0"))]);

    let bad = root.path().join("bad.jsonl");
    fs::write(&bad, "{\"record_id\":\"x\",\"raw_text\":\"1\"}\n{\"record_id\":\n").unwrap();
    let out = svf(&["eval", "--benchmark", p(&bench), "--predictions", p(&bad), "--report", p(&root.path().join("r1"))]);
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":2:"));
}

struct Server(std::process::Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn depth_serve_round_trip() {
    let root = tempfile::tempdir().unwrap();
    let scenes = synth_dir(root.path(), 9);
    let mut child = Command::new(SVF)
        .args(["depth-serve", "--scenes", p(&scenes), "--listen", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut first).unwrap();
    let _server = Server(child);
    let addr = first.trim().strip_prefix("listening on ").unwrap().to_string();

    let scene = svf::load_scene(&scenes).unwrap();
    let frame = &scene.frames[3];
    let b = frame.visible_objects[0].box2d.clamp_to_image(frame.intrinsics.width, frame.intrinsics.height).rounded();
    let expected = frame.depth(svf_core::DepthSource::Gt).unwrap().median_in_box(&b).unwrap();

    let mut s = TcpStream::connect(&addr).unwrap();
    let mut r = BufReader::new(s.try_clone().unwrap());
    let mut ask = |v: Value| -> Value {
        s.write_all(format!("{v}\n").as_bytes()).unwrap();
        let mut line = String::new();
        r.read_line(&mut line).unwrap();
        serde_json::from_str(&line).unwrap()
    };
    assert!(ask(json!({"op":"open_session","frame_id":"frame_9999","depth_source":"gt"}))["error"].is_string());
    let open = ask(json!({"op":"open_session","frame_id":frame.frame_id,"depth_source":"gt"}));
    let sid = open["session_id"].clone();
    let got = ask(json!({"op":"call","session_id":sid,"label":"thing","box":[b.x_min,b.y_min,b.x_max,b.y_max]}));
    assert_eq!(got["depth_m"].as_f64().unwrap(), expected);
    assert_eq!(ask(json!({"op":"close","session_id":sid}))["closed"], sid);
}
