//! Judge transports and the on-disk verdict cache.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use svf_core::blind::{BlindQuery, Judge, JudgeDescriptor, JudgeError, JudgeVerdict, MockJudge};
use svf_core::QaRecord;
use thiserror::Error;

pub const HTTP_RETRIES: usize = 2;
pub const CACHE_ENV: &str = "SVF_CACHE_DIR";
pub const CACHE_FILE: &str = "verdicts.jsonl";

/// Judge behind an HTTP endpoint that accepts a JSON [`BlindQuery`] and
/// replies `{"answer": "..."}`.
pub struct HttpJudge {
    id: String,
    url: String,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct HttpReply {
    answer: String,
}

impl HttpJudge {
    pub fn new(id: String, url: String, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpJudge { id, url, agent }
    }
}

impl Judge for HttpJudge {
    fn judge_id(&self) -> &str {
        &self.id
    }

    fn answer(&self, query: &BlindQuery) -> Result<String, JudgeError> {
        let mut last = JudgeError::Unreachable(String::new());
        for attempt in 0..=HTTP_RETRIES {
            let sent = self
                .agent
                .post(&self.url)
                .send_json(query)
                .and_then(|mut r| r.body_mut().read_json::<HttpReply>());
            match sent {
                Ok(reply) => return Ok(reply.answer),
                Err(ureq::Error::Timeout(_)) => last = JudgeError::Timeout,
                Err(e) => {
                    log::debug!("judge {} attempt {attempt}: {e}", self.id);
                    last = JudgeError::Unreachable(e.to_string());
                }
            }
        }
        Err(last)
    }
}

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("bad judge descriptor `{0}`: {1}")]
    Descriptor(String, String),
}

/// A named judge descriptor. `name=local:always_wrong` sets the id
/// explicitly; otherwise the descriptor text is the id and repeats get a
/// `#2`, `#3`, ... suffix.
pub fn parse_panel(specs: &[String]) -> Result<Vec<(String, JudgeDescriptor)>, PanelError> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for raw in specs.iter().flat_map(|s| s.split(',')).map(str::trim).filter(|s| !s.is_empty()) {
        let (name, desc) = match raw.split_once('=') {
            Some((n, d)) if !n.contains(':') => (Some(n.trim().to_string()), d.trim()),
            _ => (None, raw),
        };
        let descriptor: JudgeDescriptor =
            desc.parse().map_err(|e: String| PanelError::Descriptor(raw.into(), e))?;
        let id = name.unwrap_or_else(|| {
            let n = seen.entry(desc.to_string()).or_insert(0);
            *n += 1;
            if *n == 1 {
                desc.to_string()
            } else {
                format!("{desc}#{n}")
            }
        });
        out.push((id, descriptor));
    }
    Ok(out)
}

pub fn build_judge(
    id: &str,
    descriptor: &JudgeDescriptor,
    benchmark: &[QaRecord],
    reference: &[QaRecord],
    timeout: Duration,
) -> Box<dyn Judge + Send + Sync> {
    match descriptor {
        JudgeDescriptor::Local(policy) => Box::new(MockJudge::new(id.into(), *policy, benchmark, reference)),
        JudgeDescriptor::Http(url) => Box::new(HttpJudge::new(id.into(), url.clone(), timeout)),
    }
}

/// Hash of what a judge is shown, so cached verdicts for an edited record
/// are not reused.
pub fn query_digest(query: &BlindQuery) -> String {
    let bytes = serde_json::to_vec(query).expect("query serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    query_sha256: String,
    #[serde(flatten)]
    verdict: JudgeVerdict,
}

/// Append-only verdict log keyed by `(record_id, judge_id)`; the last line
/// for a key wins.
pub struct VerdictCache {
    path: PathBuf,
    entries: BTreeMap<(String, String), (String, JudgeVerdict)>,
    file: Mutex<fs::File>,
}

impl VerdictCache {
    /// Cache directory: `$SVF_CACHE_DIR` when set, else `default_dir`.
    pub fn location(default_dir: &Path) -> PathBuf {
        std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| default_dir.to_path_buf())
    }

    pub fn open(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(CACHE_FILE);
        let mut entries = BTreeMap::new();
        if path.exists() {
            for line in BufReader::new(fs::File::open(&path)?).lines() {
                let line = line?;
                // a torn final line from an interrupted run is dropped
                let Ok(entry) = serde_json::from_str::<CacheLine>(&line) else {
                    continue;
                };
                let key = (entry.verdict.record_id.clone(), entry.verdict.judge_id.clone());
                entries.insert(key, (entry.query_sha256, entry.verdict));
            }
        }
        let torn = fs::read(&path).map(|b| b.last().is_some_and(|c| *c != b'\n')).unwrap_or(false);
        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        if torn {
            // keep the next append off the torn line
            file.write_all(b"\n")?;
        }
        Ok(VerdictCache { path, entries, file: Mutex::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, record_id: &str, judge_id: &str, digest: &str) -> Option<&JudgeVerdict> {
        self.entries
            .get(&(record_id.to_string(), judge_id.to_string()))
            .filter(|(d, _)| d == digest)
            .map(|(_, v)| v)
    }

    /// Appends one verdict; safe to call from several threads.
    pub fn append(&self, digest: &str, verdict: &JudgeVerdict) -> io::Result<()> {
        let mut line = serde_json::to_string(&CacheLine {
            query_sha256: digest.into(),
            verdict: verdict.clone(),
        })
        .expect("verdict serializes");
        line.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
        f.write_all(line.as_bytes())?;
        f.flush()
    }
}
