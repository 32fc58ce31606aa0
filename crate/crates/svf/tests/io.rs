use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::Arc;

use serde_json::{json, Value};
use svf::config::{parse_config, ConfigError};
use svf::jsonl::{read_jsonl, JsonlError};
use svf::judges::{parse_panel, query_digest, VerdictCache};
use svf::scene_io::{decode_cavd, encode_cavd, load_scene, save_scene, SceneIoError};
use svf::service::DepthService;
use svf_core::blind::{BlindQuery, JudgeDescriptor, JudgeVerdict, MockPolicy};
use svf_core::qa::Convention;
use svf_core::scene::SceneError;
use svf_core::synth::{generate_synthetic_scene, SynthSpec};
use svf_core::{Category, DepthMap, Scene, Vec3};

fn synth(seed: u64) -> Scene {
    let spec = SynthSpec { noisy_sources: true, frames: 6, ..SynthSpec::default() };
    generate_synthetic_scene(seed, &spec).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * (1.0 + b.abs())
}

fn assert_scenes_match(a: &Scene, b: &Scene) {
    assert_eq!(a.video_id, b.video_id);
    assert_eq!(a.split, b.split);
    assert!(close(a.fps, b.fps));
    assert_eq!(a.objects.len(), b.objects.len());
    for (x, y) in a.objects.iter().zip(&b.objects) {
        assert_eq!((&x.object_id, &x.label, &x.color), (&y.object_id, &y.label, &y.color));
        assert!(close(x.box_world.yaw(), y.box_world.yaw()));
        for i in 0..3 {
            assert!(close(x.box_world.dims()[i], y.box_world.dims()[i]));
            assert!(close(x.box_world.center().to_array()[i], y.box_world.center().to_array()[i]));
        }
    }
    assert_eq!(a.frames.len(), b.frames.len());
    for (f, g) in a.frames.iter().zip(&b.frames) {
        assert_eq!(f.frame_id, g.frame_id);
        assert!(close(f.timestamp, g.timestamp));
        assert_eq!(f.intrinsics, g.intrinsics);
        for (p, q) in f.pose.to_row_major_3x4().iter().zip(g.pose.to_row_major_3x4()) {
            assert!(close(*p, q));
        }
        assert_eq!(f.depth, g.depth);
        assert_eq!(f.support_frames, g.support_frames);
        let ids = |fr: &svf_core::Frame| fr.visible_objects.iter().map(|v| v.object_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(f), ids(g));
    }
}

#[test]
fn scene_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scene = synth(5);
    save_scene(&scene, dir.path()).unwrap();
    let loaded = load_scene(dir.path()).unwrap();
    assert_scenes_match(&scene, &loaded);
    assert!(dir.path().join("frames/frame_0000.mono.cavd").is_file());
}

#[test]
fn cavd_layout_is_bit_exact() {
    let map = DepthMap::new(2, 1, vec![1.5, -1.0]).unwrap();
    let bytes = encode_cavd(&map);
    let mut expected = b"CAVD".to_vec();
    expected.extend(2u32.to_le_bytes());
    expected.extend(1u32.to_le_bytes());
    expected.extend(1.5f32.to_le_bytes());
    expected.extend((-1.0f32).to_le_bytes());
    assert_eq!(bytes, expected);
    assert_eq!(decode_cavd(&bytes).unwrap(), map);
    assert!(decode_cavd(&bytes[..bytes.len() - 1]).is_err());
    assert!(decode_cavd(b"XXXX\0\0\0\0\0\0\0\0").is_err());
}

fn saved(seed: u64) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    save_scene(&synth(seed), dir.path()).unwrap();
    dir
}

#[test]
fn depth_with_wrong_dimensions_is_rejected() {
    let dir = saved(1);
    let path = dir.path().join("frames/frame_0002.gt.cavd");
    fs::write(&path, encode_cavd(&DepthMap::filled(3, 3, 1.0))).unwrap();
    match load_scene(dir.path()) {
        Err(SceneIoError::Invalid { source: SceneError::IntrinsicsMismatch { frame_id, depth_width, .. }, .. }) => {
            assert_eq!(frame_id, "frame_0002");
            assert_eq!(depth_width, 3);
        }
        other => panic!("expected IntrinsicsMismatch, got {other:?}"),
    }
}

#[test]
fn missing_and_malformed_files() {
    let dir = saved(2);
    fs::remove_file(dir.path().join("scene.json")).unwrap();
    assert!(matches!(load_scene(dir.path()), Err(SceneIoError::MissingFile(_))));

    let dir = saved(2);
    fs::write(dir.path().join("frames/frame_0001.json"), "{\n  \"timestamp\": 1.0,\n  \"pose\": oops\n}").unwrap();
    match load_scene(dir.path()) {
        Err(SceneIoError::SchemaViolation { line, path, .. }) => {
            assert_eq!(line, 3);
            assert!(path.ends_with("frame_0001.json"));
        }
        other => panic!("expected SchemaViolation, got {other:?}"),
    }
}

#[test]
fn unknown_fields_are_ignored() {
    let dir = saved(3);
    let path = dir.path().join("scene.json");
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    v["capture_device"] = json!("phone");
    v["objects"][0]["confidence"] = json!(0.9);
    fs::write(&path, v.to_string()).unwrap();
    assert_eq!(load_scene(dir.path()).unwrap().objects.len(), synth(3).objects.len());
}

#[test]
fn jsonl_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.jsonl");
    fs::write(&path, "{\"record_id\":\"a\",\"raw_text\":\"Yes\"}\n\n{\"record_id\":\"b\"}\n").unwrap();
    match read_jsonl::<svf_core::Prediction>(&path) {
        Err(JsonlError::Schema { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected schema error, got {other:?}"),
    }
}

#[test]
fn config_file_parsing() {
    let c = parse_config(
        "[generation]\nseed = 9\ncategories = counting, grounding_2d\nconvention = aabb\nscale_aug = 1, 10\nextra_vocabulary = piano\n",
    )
    .unwrap();
    assert_eq!(c.seed, 9);
    assert_eq!(c.categories.iter().copied().collect::<Vec<_>>(), vec![Category::Counting, Category::Grounding2d]);
    assert_eq!(c.convention, Convention::Aabb);
    assert_eq!(c.scale_aug, Some((1.0, 10.0)));
    assert_eq!(c.extra_vocabulary, vec!["piano".to_string()]);
    assert!(matches!(parse_config("sed = 1\n"), Err(ConfigError::UnknownKey(_))));
    assert!(matches!(parse_config("[other]\nseed = 1\n"), Err(ConfigError::UnknownSection(_))));
    assert!(matches!(parse_config("seed = x\n"), Err(ConfigError::BadValue { .. })));
    assert!(matches!(parse_config("scale_aug = 0.5, 2\n"), Err(ConfigError::Invalid(_))));
}

#[test]
fn panel_ids_are_unique_and_explicit_names_win() {
    let panel = parse_panel(&[
        "local:always_wrong,local:always_wrong".into(),
        "gpt=http://127.0.0.1:1/judge".into(),
        "local:seeded_random(0.5)".into(),
    ])
    .unwrap();
    let ids: Vec<&str> = panel.iter().map(|(id, _)| id.as_str()).collect();
    assert_eq!(ids, ["local:always_wrong", "local:always_wrong#2", "gpt", "local:seeded_random(0.5)"]);
    assert_eq!(panel[2].1, JudgeDescriptor::Http("http://127.0.0.1:1/judge".into()));
    assert_eq!(panel[3].1, JudgeDescriptor::Local(MockPolicy::SeededRandom(0.5)));
    assert!(parse_panel(&["ftp:x".into()]).is_err());
}

#[test]
fn verdict_cache_last_write_wins_and_survives_torn_lines() {
    let dir = tempfile::tempdir().unwrap();
    let q = BlindQuery { record_id: "r1".into(), question: "How many chairs?".into(), choices: None };
    let d = query_digest(&q);
    let verdict = |correct| JudgeVerdict {
        record_id: "r1".into(),
        judge_id: "j".into(),
        raw_answer: "2".into(),
        correct,
        latency: 0.0,
        unparseable: false,
    };
    {
        let cache = VerdictCache::open(dir.path()).unwrap();
        cache.append(&d, &verdict(false)).unwrap();
        cache.append(&d, &verdict(true)).unwrap();
    }
    let mut f = fs::OpenOptions::new().append(true).open(dir.path().join("verdicts.jsonl")).unwrap();
    f.write_all(b"{\"query_sha").unwrap();
    drop(f);
    let cache = VerdictCache::open(dir.path()).unwrap();
    assert_eq!(cache.get("r1", "j", &d).map(|v| v.correct), Some(true));
    assert!(cache.get("r1", "j", "other-digest").is_none());
    cache.append(&d, &verdict(false)).unwrap();
    let cache = VerdictCache::open(dir.path()).unwrap();
    assert_eq!(cache.get("r1", "j", &d).map(|v| v.correct), Some(false));
}

/// Independent z-buffer: slab test per object in its local frame plus the
/// ground plane, evaluated at the same pixel coordinates as the renderer.
fn oracle_depth(scene: &Scene, frame: usize, u: u32, v: u32) -> Option<f64> {
    let f = &scene.frames[frame];
    let k = &f.intrinsics;
    let cam_dir = Vec3::new((u as f64 - k.cx) / k.fx, (v as f64 - k.cy) / k.fy, 1.0);
    let o = f.pose.translation();
    let d = f.pose.rotation().mul_vec(cam_dir);
    let mut best = f64::INFINITY;
    for obj in &scene.objects {
        let b = &obj.box_world;
        let (s, c) = b.yaw().sin_cos();
        let rel = o - b.center();
        // yaw about +y: local x = c*x - s*z, local z = s*x + c*z
        let lo = [c * rel.x - s * rel.z, rel.y, s * rel.x + c * rel.z];
        let ld = [c * d.x - s * d.z, d.y, s * d.x + c * d.z];
        let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut miss = false;
        for i in 0..3 {
            let h = b.dims()[i] / 2.0;
            if ld[i].abs() < 1e-15 {
                miss |= lo[i].abs() > h;
                continue;
            }
            let (a, e) = ((-h - lo[i]) / ld[i], (h - lo[i]) / ld[i]);
            t0 = t0.max(a.min(e));
            t1 = t1.min(a.max(e));
        }
        if !miss && t1 >= t0 && t0 > 0.0 {
            best = best.min(t0);
        }
    }
    if d.y > 1e-12 && -o.y / d.y > 0.0 {
        best = best.min(-o.y / d.y);
    }
    best.is_finite().then_some(best as f32 as f64)
}

fn oracle_median(scene: &Scene, frame: usize, b: [u32; 4]) -> f64 {
    let mut zs: Vec<f64> = (b[1]..b[3])
        .flat_map(|v| (b[0]..b[2]).map(move |u| (u, v)))
        .filter_map(|(u, v)| oracle_depth(scene, frame, u, v))
        .collect();
    zs.sort_by(f64::total_cmp);
    let n = zs.len();
    if n % 2 == 1 { zs[n / 2] } else { (zs[n / 2 - 1] + zs[n / 2]) / 2.0 }
}

fn object_box(scene: &Scene, frame: usize) -> [u32; 4] {
    let f = &scene.frames[frame];
    let b = f.visible_objects[0].box2d.clamp_to_image(f.intrinsics.width, f.intrinsics.height).rounded();
    [b.x_min as u32, b.y_min as u32, b.x_max as u32, b.y_max as u32]
}

#[test]
fn service_requests_match_the_analytic_median() {
    let scene = synth(11);
    let svc = DepthService::new(vec![scene.clone()]);
    let open = svc.handle(r#"{"op":"open_session","frame_id":"frame_0002","depth_source":"gt"}"#);
    let sid = open["session_id"].as_str().unwrap().to_string();
    let b = object_box(&scene, 2);
    let reply = svc.handle(&json!({"op":"call","session_id":sid,"label":"x","box":b}).to_string());
    let got = reply["depth_m"].as_f64().unwrap();
    assert!((got - oracle_median(&scene, 2, b)).abs() < 1e-5, "{got}");

    let outside = svc.handle(&json!({"op":"call","session_id":sid,"label":"x","box":[500,500,600,600]}).to_string());
    assert!(outside["error"].is_string());
    assert!(svc.handle(r#"{"op":"open_session","frame_id":"nope","depth_source":"gt"}"#)["error"].is_string());
    assert!(svc.handle("not json")["error"].is_string());
    assert!(svc.handle(r#"{"op":"open_session","frame_id":"frame_0002","depth_source":"lidar"}"#)["error"].is_string());
    assert_eq!(svc.handle(&json!({"op":"close","session_id":sid}).to_string())["closed"], json!(sid));
    assert!(svc.handle(&json!({"op":"close","session_id":sid}).to_string())["error"].is_string());
    assert_eq!(svc.open_sessions(), 0);
}

fn request(stream: &mut TcpStream, reader: &mut BufReader<TcpStream>, v: Value) -> Value {
    stream.write_all(format!("{v}\n").as_bytes()).unwrap();
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    serde_json::from_str(&line).unwrap()
}

#[test]
fn tcp_sessions_are_independent() {
    let scene = synth(12);
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let svc = Arc::new(DepthService::new(vec![scene.clone()]));
    std::thread::spawn(move || svc.serve(listener));

    let handles: Vec<_> = [1usize, 4]
        .into_iter()
        .map(|frame| {
            let scene = scene.clone();
            std::thread::spawn(move || {
                let mut s = TcpStream::connect(addr).unwrap();
                let mut r = BufReader::new(s.try_clone().unwrap());
                let bad = request(&mut s, &mut r, json!({"op":"open_session","frame_id":"missing"}));
                assert!(bad["error"].is_string());
                let fid = scene.frames[frame].frame_id.clone();
                let open = request(&mut s, &mut r, json!({"op":"open_session","frame_id":fid,"depth_source":"gt"}));
                let sid = open["session_id"].as_str().unwrap().to_string();
                let b = object_box(&scene, frame);
                for _ in 0..20 {
                    let got = request(&mut s, &mut r, json!({"op":"call","session_id":sid,"label":"o","box":b}));
                    assert!((got["depth_m"].as_f64().unwrap() - oracle_median(&scene, frame, b)).abs() < 1e-5);
                }
                request(&mut s, &mut r, json!({"op":"close","session_id":sid}))
            })
        })
        .collect();
    for h in handles {
        assert!(h.join().unwrap()["closed"].is_string());
    }
}

#[test]
fn scene_collections_load_in_name_order() {
    let root = tempfile::tempdir().unwrap();
    for (name, seed) in [("b", 2u64), ("a", 1)] {
        let spec = SynthSpec { video_id: format!("v{name}"), frames: 3, ..SynthSpec::default() };
        save_scene(&generate_synthetic_scene(seed, &spec).unwrap(), &root.path().join(name)).unwrap();
    }
    let scenes = svf::load_scenes(root.path()).unwrap();
    assert_eq!(scenes.iter().map(|s| s.video_id.as_str()).collect::<Vec<_>>(), ["va", "vb"]);
    assert!(svf::load_scenes(Path::new("/nonexistent-dir")).is_err());
}
