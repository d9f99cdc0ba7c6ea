//! Replay backend: serves recorded responses keyed by canonical dialogue
//! hash, plus the recording wrapper that captures fixtures from any backend.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{canonical_hash, Backend, CompletionParams, LlmDialogue};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct FixtureLine {
    hash: String,
    response: String,
}

/// Serves fixture responses by dialogue hash. A hash may appear on several
/// lines; responses are then served in file order, with the last one sticking
/// for any further calls. This keeps identical runs identical while letting
/// scripted scenarios (same prompt, different round) play out.
pub struct ReplayBackend {
    queues: Mutex<BTreeMap<String, VecDeque<String>>>,
}

impl ReplayBackend {
    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut queues: BTreeMap<String, VecDeque<String>> = BTreeMap::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fixture: FixtureLine = serde_json::from_str(&line).map_err(|e| Error::Record {
                path: path.to_path_buf(),
                line: idx + 1,
                detail: e.to_string(),
            })?;
            queues.entry(fixture.hash).or_default().push_back(fixture.response);
        }
        Ok(ReplayBackend {
            queues: Mutex::new(queues),
        })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        let mut queues: BTreeMap<String, VecDeque<String>> = BTreeMap::new();
        for (hash, response) in pairs {
            queues.entry(hash).or_default().push_back(response);
        }
        ReplayBackend {
            queues: Mutex::new(queues),
        }
    }
}

impl Backend for ReplayBackend {
    fn complete(&self, dialogue: &LlmDialogue, _params: &CompletionParams) -> Result<String> {
        let hash = canonical_hash(dialogue);
        let mut queues = self.queues.lock().expect("replay lock");
        let queue = queues
            .get_mut(&hash)
            .ok_or_else(|| Error::FixtureMiss { hash: hash.clone() })?;
        if queue.len() > 1 {
            Ok(queue.pop_front().expect("non-empty queue"))
        } else {
            queue
                .front()
                .cloned()
                .ok_or(Error::FixtureMiss { hash })
        }
    }

    fn name(&self) -> &'static str {
        "replay"
    }
}

/// Wraps a backend and appends every completed (hash, response) pair to a
/// fixture file, so test fixtures can be captured from live runs.
pub struct RecordingBackend {
    inner: Box<dyn Backend>,
    sink: Mutex<fs::File>,
}

impl RecordingBackend {
    pub fn create(inner: Box<dyn Backend>, path: &Path) -> Result<Self> {
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(RecordingBackend {
            inner,
            sink: Mutex::new(file),
        })
    }
}

impl Backend for RecordingBackend {
    fn complete(&self, dialogue: &LlmDialogue, params: &CompletionParams) -> Result<String> {
        let response = self.inner.complete(dialogue, params)?;
        let line = serde_json::to_string(&FixtureLine {
            hash: canonical_hash(dialogue),
            response: response.clone(),
        })?;
        let mut sink = self.sink.lock().expect("record lock");
        writeln!(sink, "{line}").map_err(|e| Error::io("<record sink>", e))?;
        Ok(response)
    }

    fn name(&self) -> &'static str {
        self.inner.name()
    }
}
