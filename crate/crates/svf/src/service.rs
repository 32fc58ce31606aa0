//! Depth tool service: line-delimited JSON over TCP.
//!
//! ```text
//! {"op":"open_session","frame_id":"f0003","depth_source":"gt"}  -> {"session_id":"s1"}
//! {"op":"call","session_id":"s1","label":"chair","box":[10,20,40,60]} -> {"depth_m":2.41}
//! {"op":"close","session_id":"s1"}                              -> {"closed":"s1"}
//! ```
//!
//! Any failure answers `{"error": "..."}` and leaves the connection open.
//! `open_session` also takes an optional `video_id` to disambiguate frame
//! ids shared by several scenes.

use std::collections::BTreeMap;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use serde::Deserialize;
use serde_json::{json, Value};
use svf_core::tool::ToolSession;
use svf_core::{Box2D, DepthSource, Scene};

#[derive(Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Request {
    OpenSession {
        frame_id: String,
        #[serde(default = "default_source")]
        depth_source: String,
        #[serde(default)]
        video_id: Option<String>,
    },
    Call {
        session_id: String,
        #[serde(default)]
        label: String,
        #[serde(rename = "box")]
        bbox: [f64; 4],
    },
    Close {
        session_id: String,
    },
}

fn default_source() -> String {
    "gt".into()
}

pub struct DepthService {
    scenes: Vec<Scene>,
    sessions: Mutex<BTreeMap<String, ToolSession>>,
    next_id: AtomicU64,
}

fn error(message: impl std::fmt::Display) -> Value {
    json!({ "error": message.to_string() })
}

impl DepthService {
    pub fn new(scenes: Vec<Scene>) -> Self {
        DepthService {
            scenes,
            sessions: Mutex::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn open_sessions(&self) -> usize {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    /// Answers one request line.
    pub fn handle(&self, line: &str) -> Value {
        let request: Request = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => return error(format!("bad request: {e}")),
        };
        match request {
            Request::OpenSession { frame_id, depth_source, video_id } => {
                self.open(&frame_id, &depth_source, video_id.as_deref())
            }
            Request::Call { session_id, label, bbox } => {
                let Ok(b) = Box2D::new(bbox[0], bbox[1], bbox[2], bbox[3]) else {
                    return error("box must be finite with x_min <= x_max and y_min <= y_max");
                };
                let mut sessions = self.sessions.lock().unwrap_or_else(|e| e.into_inner());
                let Some(session) = sessions.get_mut(&session_id) else {
                    return error(format!("unknown session `{session_id}`"));
                };
                let call = svf_core::tool::ToolCall { label, bbox: b, span: 0..0 };
                match session.answer_call(&call) {
                    Ok(m) => json!({ "depth_m": m }),
                    Err(e) => error(e),
                }
            }
            Request::Close { session_id } => {
                let removed = self.sessions.lock().unwrap_or_else(|e| e.into_inner()).remove(&session_id);
                match removed {
                    Some(_) => json!({ "closed": session_id }),
                    None => error(format!("unknown session `{session_id}`")),
                }
            }
        }
    }

    fn open(&self, frame_id: &str, source: &str, video_id: Option<&str>) -> Value {
        let source: DepthSource = match source.parse() {
            Ok(s) => s,
            Err(e) => return error(e),
        };
        let matches: Vec<&Scene> = self
            .scenes
            .iter()
            .filter(|s| video_id.is_none_or(|v| s.video_id == v))
            .filter(|s| s.frame(frame_id).is_some())
            .collect();
        let scene = match matches.as_slice() {
            [one] => *one,
            [] => return error(format!("unknown frame `{frame_id}`")),
            _ => return error(format!("frame `{frame_id}` exists in several scenes; pass video_id")),
        };
        let Some(depth) = scene.frame(frame_id).and_then(|f| f.depth(source)) else {
            return error(format!("frame `{frame_id}` has no {source} depth"));
        };
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let session = ToolSession::new(id.clone(), frame_id.into(), source, depth.clone());
        self.sessions.lock().unwrap_or_else(|e| e.into_inner()).insert(id.clone(), session);
        json!({ "session_id": id })
    }

    fn serve_connection(&self, stream: TcpStream) -> io::Result<()> {
        let mut writer = stream.try_clone()?;
        for line in BufReader::new(stream).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut reply = self.handle(&line).to_string();
            reply.push('\n');
            writer.write_all(reply.as_bytes())?;
        }
        Ok(())
    }

    /// Accepts connections until the listener fails; one thread per client.
    pub fn serve(self: Arc<Self>, listener: TcpListener) -> io::Result<()> {
        for stream in listener.incoming() {
            let stream = stream?;
            let service = Arc::clone(&self);
            thread::spawn(move || {
                if let Err(e) = service.serve_connection(stream) {
                    log::warn!("depth service connection: {e}");
                }
            });
        }
        Ok(())
    }
}
