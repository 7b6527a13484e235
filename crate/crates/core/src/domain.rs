//! Value types shared across the pipeline.
//!
//! Everything here is immutable after construction and serializes to JSON
//! with stable field names; reports, replay fixtures and golden files all
//! depend on those names.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::Tokenizer;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("question text is empty")]
    EmptyQuestion,
    #[error("hop label {0} is outside 1..=4")]
    HopLabelRange(i64),
    #[error("plan has no steps")]
    EmptyPlan,
    #[error("plan step indices must be contiguous from 1; found {found} at position {position}")]
    PlanIndices { position: usize, found: usize },
    #[error("invalid verifier configuration: {0}")]
    Verifier(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionOrigin {
    Original,
    SubQuestion,
    Refined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub origin: QuestionOrigin,
}

impl Question {
    /// Builds a question; the text is stored trimmed and must not be empty.
    pub fn new(
        id: impl Into<String>,
        text: impl AsRef<str>,
        origin: QuestionOrigin,
    ) -> Result<Self, DomainError> {
        let text = text.as_ref().trim();
        if text.is_empty() {
            return Err(DomainError::EmptyQuestion);
        }
        Ok(Self {
            id: id.into(),
            text: text.to_owned(),
            origin,
        })
    }

    pub fn original(id: impl Into<String>, text: impl AsRef<str>) -> Result<Self, DomainError> {
        Self::new(id, text, QuestionOrigin::Original)
    }

    /// Same id, new wording, origin `Refined`.
    pub fn refined(&self, text: impl AsRef<str>) -> Result<Self, DomainError> {
        Self::new(self.id.clone(), text, QuestionOrigin::Refined)
    }
}

/// Predicted or annotated number of reasoning hops, always in `1..=4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct HopLabel(u8);

impl HopLabel {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 4;

    pub fn new(value: i64) -> Result<Self, DomainError> {
        if (Self::MIN as i64..=Self::MAX as i64).contains(&value) {
            Ok(Self(value as u8))
        } else {
            Err(DomainError::HopLabelRange(value))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    pub fn all() -> impl Iterator<Item = HopLabel> {
        (Self::MIN..=Self::MAX).map(HopLabel)
    }
}

impl TryFrom<i64> for HopLabel {
    type Error = DomainError;
    fn try_from(value: i64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<HopLabel> for u8 {
    fn from(label: HopLabel) -> u8 {
        label.0
    }
}

impl fmt::Display for HopLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Retrieve,
    Answer,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Retrieve => "Retrieve",
            Action::Answer => "Answer",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Retrieve" => Some(Action::Retrieve),
            "Answer" => Some(Action::Answer),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    pub index: usize,
    pub thought: String,
    pub question: Question,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    pub source_exemplar_ids: Vec<String>,
}

impl Plan {
    pub fn new(
        steps: Vec<PlanStep>,
        source_exemplar_ids: Vec<String>,
    ) -> Result<Self, DomainError> {
        if steps.is_empty() {
            return Err(DomainError::EmptyPlan);
        }
        for (position, step) in steps.iter().enumerate() {
            if step.index != position + 1 {
                return Err(DomainError::PlanIndices {
                    position,
                    found: step.index,
                });
            }
        }
        Ok(Self {
            steps,
            source_exemplar_ids,
        })
    }

    /// The original question as a one-step `Retrieve` plan.
    pub fn single_step(question: &Question) -> Self {
        let step = PlanStep {
            index: 1,
            thought: String::new(),
            question: Question {
                id: format!("{}#1", question.id),
                text: question.text.clone(),
                origin: QuestionOrigin::SubQuestion,
            },
            action: Action::Retrieve,
        };
        Self {
            steps: vec![step],
            source_exemplar_ids: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Serializes the steps back into the strict JSON array format the
    /// planner parses.
    pub fn to_json_array(&self) -> String {
        let items: Vec<serde_json::Value> = self
            .steps
            .iter()
            .map(|s| {
                serde_json::json!({
                    "Thought": s.thought,
                    "Question": s.question.text,
                    "Action": s.action.as_str(),
                })
            })
            .collect();
        serde_json::to_string_pretty(&items).expect("plan json")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub body: String,
    pub token_count: usize,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        title: impl Into<String>,
        body: impl Into<String>,
        tokenizer: &dyn Tokenizer,
    ) -> Self {
        let mut doc = Self {
            id: id.into(),
            title: title.into(),
            body: body.into(),
            token_count: 0,
        };
        doc.token_count = tokenizer.count(&doc.indexed_text());
        doc
    }

    /// Title and body concatenated into the single text block that is
    /// indexed, embedded and shown to the reader.
    pub fn indexed_text(&self) -> String {
        match (self.title.trim().is_empty(), self.body.trim().is_empty()) {
            (true, _) => self.body.clone(),
            (false, true) => self.title.clone(),
            (false, false) => format!("{}\n{}", self.title, self.body),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Citation {
    pub source_ordinal: usize,
    pub document_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationSet {
    pub entries: Vec<Citation>,
}

impl CitationSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ordinals(&self) -> Vec<usize> {
        self.entries.iter().map(|c| c.source_ordinal).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntermediateAnswer {
    pub question_ref: Question,
    pub text: String,
    pub citations: CitationSet,
    pub revised: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    #[serde(rename = "accuracy_A")]
    pub accuracy: f64,
    #[serde(rename = "consistency_F")]
    pub consistency: f64,
    pub alpha: f64,
    #[serde(rename = "score_Cq")]
    pub score: f64,
    pub accepted: bool,
    pub hop_used: f64,
}

impl ConfidenceReport {
    /// Re-derives the blended score and gate from the stored fields.
    pub fn is_consistent(&self, threshold: f64) -> bool {
        let blended = self.accuracy * self.alpha + self.consistency * (1.0 - self.alpha);
        (blended - self.score).abs() <= 1e-12 && self.accepted == (self.score >= threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step_index: usize,
    pub action: Action,
    pub thought: String,
    pub question: Question,
    pub answer: IntermediateAnswer,
    /// One entry per citation, in citation order.
    pub evidence_texts: Vec<String>,
    /// Gate report on the first answer; absent when review is disabled or
    /// could not be scored.
    pub confidence: Option<ConfidenceReport>,
    /// Report on the revised answer after fallback. Recorded only.
    pub revised_confidence: Option<ConfidenceReport>,
    pub verification_error: Option<String>,
}

/// Step indices start at 1 and have no gaps.
pub fn is_gap_free_chain(records: &[TrajectoryRecord]) -> bool {
    records
        .iter()
        .enumerate()
        .all(|(i, r)| r.step_index == i + 1 && r.evidence_texts.len() == r.answer.citations.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifierConfig {
    #[serde(rename = "C_t")]
    pub threshold: f64,
    pub h0: f64,
    pub gamma: f64,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        Self {
            threshold: 0.65,
            h0: 3.5,
            gamma: 1.5,
        }
    }
}

impl VerifierConfig {
    pub fn new(threshold: f64, h0: f64, gamma: f64) -> Result<Self, DomainError> {
        let cfg = Self {
            threshold,
            h0,
            gamma,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(DomainError::Verifier(format!(
                "C_t must be in [0,1], got {}",
                self.threshold
            )));
        }
        if !(self.h0 > 0.0 && self.h0.is_finite()) {
            return Err(DomainError::Verifier(format!(
                "h0 must be > 0, got {}",
                self.h0
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(DomainError::Verifier(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}
