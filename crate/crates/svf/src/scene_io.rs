//! Scene directories on disk.
//!
//! ```text
//! <root>/scene.json
//! <root>/frames/<frame_id>.json
//! <root>/frames/<frame_id>.<gt|arkit|mono>.cavd
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use svf_core::scene::SceneError;
use svf_core::{CameraIntrinsics, DepthMap, DepthSource, Frame, ObjectAnnotation, RigidPose, Scene, Split};
use thiserror::Error;

pub const CAVD_MAGIC: &[u8; 4] = b"CAVD";

#[derive(Debug, Error)]
pub enum SceneIoError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    SchemaViolation {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    BadDepth { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: SceneError },
    #[error("{0} holds no scene directories")]
    NoScenes(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SceneIoError + '_ {
    move |source| {
        if source.kind() == io::ErrorKind::NotFound {
            SceneIoError::MissingFile(path.to_path_buf())
        } else {
            SceneIoError::Io { path: path.to_path_buf(), source }
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, SceneIoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| SceneIoError::SchemaViolation {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), SceneIoError> {
    fs::write(path, bytes).map_err(io_err(path))
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    video_id: String,
    fps: f64,
    split: Split,
    objects: Vec<ObjectAnnotation>,
}

#[derive(Serialize, Deserialize)]
struct FrameFile {
    timestamp: f64,
    #[serde(default)]
    image: String,
    intrinsics: CameraIntrinsics,
    pose: RigidPose,
}

/// Encodes a depth map in the `CAVD` binary layout.
pub fn encode_cavd(map: &DepthMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * map.values().len());
    out.extend_from_slice(CAVD_MAGIC);
    out.extend_from_slice(&map.width().to_le_bytes());
    out.extend_from_slice(&map.height().to_le_bytes());
    for v in map.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_cavd(bytes: &[u8]) -> Result<DepthMap, String> {
    if bytes.len() < 12 || &bytes[..4] != CAVD_MAGIC {
        return Err("missing CAVD header".into());
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let expected = (width as usize)
        .checked_mul(height as usize)
        .and_then(|n| n.checked_mul(4))
        .ok_or("depth dimensions overflow")?;
    let body = &bytes[12..];
    if body.len() != expected {
        return Err(format!("expected {expected} payload bytes for {width}x{height}, found {}", body.len()));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DepthMap::new(width, height, values).map_err(|e| e.to_string())
}

pub fn read_cavd(path: &Path) -> Result<DepthMap, SceneIoError> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(path))?;
    decode_cavd(&bytes).map_err(|message| SceneIoError::BadDepth { path: path.to_path_buf(), message })
}

pub fn write_cavd(path: &Path, map: &DepthMap) -> Result<(), SceneIoError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&encode_cavd(map)).map_err(io_err(path))
}

/// Loads and validates one scene directory, then recomputes visibility and
/// support frames.
pub fn load_scene(root: &Path) -> Result<Scene, SceneIoError> {
    let scene_path = root.join("scene.json");
    let head: SceneFile = read_json(&scene_path)?;
    let frames_dir = root.join("frames");
    let entries = fs::read_dir(&frames_dir).map_err(io_err(&frames_dir))?;
    let mut frame_files = Vec::new();
    for entry in entries {
        let path = entry.map_err(io_err(&frames_dir))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            frame_files.push(path);
        }
    }
    frame_files.sort();
    let mut frames = Vec::with_capacity(frame_files.len());
    for path in frame_files {
        let frame_id = path.file_stem().unwrap().to_string_lossy().into_owned();
        let file: FrameFile = read_json(&path)?;
        let mut depth = BTreeMap::new();
        for source in DepthSource::ALL {
            let dpath = frames_dir.join(format!("{frame_id}.{}.cavd", source.tag()));
            if dpath.exists() {
                depth.insert(source, read_cavd(&dpath)?);
            }
        }
        frames.push(Frame {
            frame_id,
            timestamp: file.timestamp,
            image: file.image,
            intrinsics: file.intrinsics,
            pose: file.pose,
            depth,
            visible_objects: Vec::new(),
            support_frames: Vec::new(),
        });
    }
    frames.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    Scene::new(head.video_id, head.fps, head.split, frames, head.objects)
        .map_err(|source| SceneIoError::Invalid { path: root.to_path_buf(), source })
}

pub fn save_scene(scene: &Scene, root: &Path) -> Result<(), SceneIoError> {
    let frames_dir = root.join("frames");
    fs::create_dir_all(&frames_dir).map_err(io_err(&frames_dir))?;
    let head = SceneFile {
        video_id: scene.video_id.clone(),
        fps: scene.fps,
        split: scene.split,
        objects: scene.objects.clone(),
    };
    let mut text = serde_json::to_string_pretty(&head).expect("scene serializes");
    text.push('\n');
    write_file(&root.join("scene.json"), text.as_bytes())?;
    for f in &scene.frames {
        let file = FrameFile {
            timestamp: f.timestamp,
            image: f.image.clone(),
            intrinsics: f.intrinsics,
            pose: f.pose,
        };
        let mut text = serde_json::to_string_pretty(&file).expect("frame serializes");
        text.push('\n');
        write_file(&frames_dir.join(format!("{}.json", f.frame_id)), text.as_bytes())?;
        for (source, map) in &f.depth {
            write_cavd(&frames_dir.join(format!("{}.{}.cavd", f.frame_id, source.tag())), map)?;
        }
    }
    Ok(())
}

/// Loads `root` as a single scene when it holds `scene.json`, otherwise every
/// immediate subdirectory that does, in name order.
pub fn load_scenes(root: &Path) -> Result<Vec<Scene>, SceneIoError> {
    if root.join("scene.json").is_file() {
        return Ok(vec![load_scene(root)?]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(io_err(root))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("scene.json").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(SceneIoError::NoScenes(root.to_path_buf()));
    }
    dirs.iter().map(|d| load_scene(d)).collect()
}
