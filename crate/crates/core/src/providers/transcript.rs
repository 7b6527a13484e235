use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    fingerprint, ChatProvider, ChatReply, ChatRequest, Embedded, Embedder, ProviderError,
    ProviderUsage,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Annotate,
    PredictHops,
    Embed,
    Plan,
    Read,
    Judge,
    Attribute,
    Refine,
    Answer,
    AccJudge,
    DenseRetrieve,
    SparseRetrieve,
}

impl CallKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CallKind::Annotate => "annotate",
            CallKind::PredictHops => "predict_hops",
            CallKind::Embed => "embed",
            CallKind::Plan => "plan",
            CallKind::Read => "read",
            CallKind::Judge => "judge",
            CallKind::Attribute => "attribute",
            CallKind::Refine => "refine",
            CallKind::Answer => "answer",
            CallKind::AccJudge => "acc_judge",
            CallKind::DenseRetrieve => "dense_retrieve",
            CallKind::SparseRetrieve => "sparse_retrieve",
        }
    }

    pub fn is_verification(self) -> bool {
        matches!(self, CallKind::Judge | CallKind::Attribute)
    }

    pub fn is_retrieval(self) -> bool {
        matches!(self, CallKind::DenseRetrieve | CallKind::SparseRetrieve)
    }
}

impl fmt::Display for CallKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub step: Option<usize>,
    pub kind: CallKind,
    pub template_id: String,
    pub fingerprint: Option<String>,
    pub detail: Option<String>,
    pub usage: ProviderUsage,
}

impl TranscriptEvent {
    /// Stable one-line rendering used for golden comparisons.
    pub fn line(&self) -> String {
        let step = self.step.map_or_else(|| "-".to_owned(), |s| s.to_string());
        let fp = self
            .fingerprint
            .as_deref()
            .map_or("-", |f| &f[..f.len().min(16)]);
        let mut line = format!("{step} {} {} {fp}", self.kind, self.template_id);
        if let Some(detail) = &self.detail {
            line.push(' ');
            line.push_str(detail);
        }
        line
    }
}

/// Ordered log of every provider call and retrieval made for one query,
/// with the usage each call reported.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    events: Vec<TranscriptEvent>,
    #[serde(skip)]
    step: Option<usize>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Plan step that subsequent events are attributed to.
    pub fn set_step(&mut self, step: Option<usize>) {
        self.step = step;
    }

    pub fn chat(
        &mut self,
        kind: CallKind,
        provider: &dyn ChatProvider,
        request: &ChatRequest,
    ) -> Result<ChatReply, ProviderError> {
        let result = provider.chat(request);
        let (usage, detail) = match &result {
            Ok(reply) => (reply.usage, None),
            Err(_) => (ProviderUsage::default(), Some("failed".to_owned())),
        };
        self.events.push(TranscriptEvent {
            step: self.step,
            kind,
            template_id: request.template_id.clone(),
            fingerprint: Some(request.fingerprint()),
            detail,
            usage,
        });
        result
    }

    pub fn embed(
        &mut self,
        embedder: &dyn Embedder,
        texts: &[String],
    ) -> Result<Embedded, ProviderError> {
        let result = embedder.embed(texts);
        let (usage, mut detail) = match &result {
            Ok(e) => (e.usage, format!("n={}", texts.len())),
            Err(_) => (ProviderUsage::default(), "failed".to_owned()),
        };
        detail.push_str(&format!(" via={}", embedder.id()));
        self.events.push(TranscriptEvent {
            step: self.step,
            kind: CallKind::Embed,
            template_id: super::embed::EMBED_TEMPLATE.to_owned(),
            fingerprint: Some(fingerprint(super::embed::EMBED_TEMPLATE, &texts.join("\n"))),
            detail: Some(detail),
            usage,
        });
        result
    }

    /// Records a local event (retrieval) that consumed no provider usage.
    pub fn note(&mut self, kind: CallKind, label: &str, detail: impl Into<String>) {
        self.events.push(TranscriptEvent {
            step: self.step,
            kind,
            template_id: label.to_owned(),
            fingerprint: None,
            detail: Some(detail.into()),
            usage: ProviderUsage::default(),
        });
    }

    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<TranscriptEvent> {
        self.events
    }

    pub fn usage(&self) -> ProviderUsage {
        self.events.iter().map(|e| e.usage).sum()
    }

    pub fn count(&self, kind: CallKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn lines(&self) -> Vec<String> {
        self.events.iter().map(TranscriptEvent::line).collect()
    }
}
