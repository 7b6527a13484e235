use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{ChatProvider, ChatReply, ChatRequest, ProviderError, ProviderUsage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub request_fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_id: Option<String>,
    pub response: String,
    pub usage: ProviderUsage,
}

/// Ordered entries of a JSONL replay file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayLog {
    pub entries: Vec<ReplayEntry>,
}

impl ReplayLog {
    pub fn from_jsonl(input: &str) -> Result<Self, ProviderError> {
        let mut entries = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ReplayEntry = serde_json::from_str(line)
                .map_err(|e| ProviderError::Io(format!("replay log line {}: {e}", lineno + 1)))?;
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProviderError::Io(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("replay entry"));
            out.push('\n');
        }
        out
    }
}

struct Cursor {
    entries: Vec<ReplayEntry>,
    next: usize,
}

/// Answers requests from a [`ReplayLog`].
///
/// Entries sharing a fingerprint are consumed in log order; once a
/// fingerprint's entries are exhausted its last entry keeps being served, so
/// a single recording covers repeated identical requests.
pub struct ReplayProvider {
    id: String,
    by_fingerprint: Mutex<HashMap<String, Cursor>>,
}

impl ReplayProvider {
    pub fn new(log: ReplayLog) -> Self {
        let mut by_fingerprint: HashMap<String, Cursor> = HashMap::new();
        for entry in log.entries {
            by_fingerprint
                .entry(entry.request_fingerprint.clone())
                .or_insert_with(|| Cursor {
                    entries: Vec::new(),
                    next: 0,
                })
                .entries
                .push(entry);
        }
        Self {
            id: "replay".to_owned(),
            by_fingerprint: Mutex::new(by_fingerprint),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        Ok(Self::new(ReplayLog::load(path)?))
    }
}

impl ChatProvider for ReplayProvider {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, ProviderError> {
        let fingerprint = request.fingerprint();
        let mut map = self.by_fingerprint.lock().expect("replay lock");
        let Some(cursor) = map.get_mut(&fingerprint) else {
            return Err(ProviderError::UnrecordedRequest {
                fingerprint,
                template_id: request.template_id.clone(),
            });
        };
        let pos = cursor.next.min(cursor.entries.len() - 1);
        cursor.next = (cursor.next + 1).min(cursor.entries.len());
        let entry = &cursor.entries[pos];
        Ok(ChatReply {
            text: entry.response.clone(),
            usage: entry.usage,
        })
    }

    fn id(&self) -> &str {
        &self.id
    }
}

/// Shared JSONL sink; every recorded call is appended and flushed.
pub struct RecordSink {
    writer: Mutex<BufWriter<File>>,
}

impl RecordSink {
    pub fn create(path: &Path) -> Result<Arc<Self>, ProviderError> {
        let file = File::create(path)
            .map_err(|e| ProviderError::Io(format!("{}: {e}", path.display())))?;
        Ok(Arc::new(Self {
            writer: Mutex::new(BufWriter::new(file)),
        }))
    }

    fn append(&self, entry: &ReplayEntry) -> Result<(), ProviderError> {
        let mut w = self.writer.lock().expect("record lock");
        let line = serde_json::to_string(entry).expect("replay entry");
        writeln!(w, "{line}")
            .and_then(|_| w.flush())
            .map_err(|e| ProviderError::Io(format!("recording: {e}")))
    }
}

/// Wraps a provider and appends every successful exchange to a sink.
pub struct RecordingProvider<P> {
    inner: P,
    sink: Arc<RecordSink>,
}

impl<P: ChatProvider> RecordingProvider<P> {
    pub fn new(inner: P, sink: Arc<RecordSink>) -> Self {
        Self { inner, sink }
    }
}

impl<P: ChatProvider> ChatProvider for RecordingProvider<P> {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, ProviderError> {
        let reply = self.inner.chat(request)?;
        self.sink.append(&ReplayEntry {
            request_fingerprint: request.fingerprint(),
            template_id: Some(request.template_id.clone()),
            response: reply.text.clone(),
            usage: reply.usage,
        })?;
        Ok(reply)
    }

    fn id(&self) -> &str {
        self.inner.id()
    }
}
