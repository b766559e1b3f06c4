use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{OracleError, RecordedResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TranscriptMode {
    /// Serve recorded entries; call the provider and persist on a miss.
    Record,
    /// Serve recorded entries only; a miss is an error.
    Replay,
    /// Always call the provider; nothing is read or written.
    Passthrough,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    digest: String,
    request: serde_json::Value,
    response: RecordedResponse,
}

/// Directory of `<digest>.json` files, one per distinct request.
#[derive(Debug)]
pub struct Transcript {
    dir: Option<PathBuf>,
    mode: TranscriptMode,
    entries: Mutex<BTreeMap<String, RecordedResponse>>,
    live_calls: AtomicU64,
    hits: AtomicU64,
}

impl Transcript {
    /// Opens (and for `Record`, creates) the transcript directory.
    pub fn open(dir: impl AsRef<Path>, mode: TranscriptMode) -> Result<Transcript, OracleError> {
        let dir = dir.as_ref().to_path_buf();
        let io = |e: std::io::Error| OracleError::TranscriptIo(format!("{}: {e}", dir.display()));
        let mut entries = BTreeMap::new();
        match mode {
            TranscriptMode::Passthrough => {}
            TranscriptMode::Record => {
                fs::create_dir_all(&dir).map_err(io)?;
                load_into(&dir, &mut entries)?;
            }
            TranscriptMode::Replay => {
                if !dir.is_dir() {
                    return Err(OracleError::TranscriptIo(format!(
                        "replay directory {} does not exist",
                        dir.display()
                    )));
                }
                load_into(&dir, &mut entries)?;
            }
        }
        Ok(Transcript {
            dir: Some(dir),
            mode,
            entries: Mutex::new(entries),
            live_calls: AtomicU64::new(0),
            hits: AtomicU64::new(0),
        })
    }

    /// In-memory transcript (nothing persisted). Useful for counting calls.
    pub fn in_memory(mode: TranscriptMode) -> Transcript {
        Transcript {
            dir: None,
            mode,
            entries: Mutex::new(BTreeMap::new()),
            live_calls: AtomicU64::new(0),
            hits: AtomicU64::new(0),
        }
    }

    pub fn mode(&self) -> TranscriptMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("transcript lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Provider calls made through this transcript.
    pub fn live_calls(&self) -> u64 {
        self.live_calls.load(Ordering::Relaxed)
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub(crate) fn fetch<R: Serialize>(
        &self,
        digest: &str,
        request: &R,
        live: impl FnOnce() -> Result<RecordedResponse, OracleError>,
    ) -> Result<RecordedResponse, OracleError> {
        if self.mode != TranscriptMode::Passthrough {
            if let Some(r) = self.entries.lock().expect("transcript lock").get(digest) {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Ok(r.clone());
            }
        }
        if self.mode == TranscriptMode::Replay {
            return Err(OracleError::MissingTranscript {
                digest: digest.to_string(),
            });
        }
        // The lock is not held across the provider call so rows can be
        // labeled concurrently; racing identical requests just rewrite the
        // same bytes.
        let response = live()?;
        self.live_calls.fetch_add(1, Ordering::Relaxed);
        if self.mode == TranscriptMode::Record {
            let mut entries = self.entries.lock().expect("transcript lock");
            if let Some(dir) = &self.dir {
                let entry = Entry {
                    digest: digest.to_string(),
                    request: serde_json::to_value(request)
                        .map_err(|e| OracleError::TranscriptIo(e.to_string()))?,
                    response: response.clone(),
                };
                let path = dir.join(format!("{digest}.json"));
                let bytes = serde_json::to_vec_pretty(&entry)
                    .map_err(|e| OracleError::TranscriptIo(e.to_string()))?;
                fs::write(&path, bytes)
                    .map_err(|e| OracleError::TranscriptIo(format!("{}: {e}", path.display())))?;
            }
            entries.insert(digest.to_string(), response.clone());
        }
        Ok(response)
    }
}

fn load_into(dir: &Path, entries: &mut BTreeMap<String, RecordedResponse>) -> Result<(), OracleError> {
    let io = |e: std::io::Error| OracleError::TranscriptIo(format!("{}: {e}", dir.display()));
    for item in fs::read_dir(dir).map_err(io)? {
        let path = item.map_err(io)?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let raw = fs::read(&path).map_err(|e| OracleError::TranscriptIo(format!("{}: {e}", path.display())))?;
        let entry: Entry = serde_json::from_slice(&raw)
            .map_err(|e| OracleError::TranscriptIo(format!("{}: {e}", path.display())))?;
        entries.insert(entry.digest, entry.response);
    }
    Ok(())
}
