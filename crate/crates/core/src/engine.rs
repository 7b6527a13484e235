//! The per-query control loop: profile, plan, then act and review each
//! step before generating the final answer from the trajectory.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::citations::extract_citations;
use crate::complexity::{ComplexityProfile, ComplexityProfiler};
use crate::domain::{
    Action, ConfidenceReport, Document, IntermediateAnswer, Plan, PlanStep, Question,
    TrajectoryRecord, VerifierConfig,
};
use crate::error::Error;
use crate::exemplars::ExemplarStore;
use crate::planner::{generate_plan, PlannerConfig};
use crate::providers::{
    CallKind, ChatProvider, ChatRequest, Embedder, ProviderUsage, Transcript, TranscriptEvent,
};
use crate::retrieval::{
    dense_retrieve, sparse_retrieve, CorpusIndex, RankedDocument, RetrievalConfig,
};
use crate::review::{confidence, judge_accuracy, map_attribution, score_attribution};
use crate::templates::{TemplateSet, ANSWER_GENERATION, REFINE_QUESTION, STEP_EXECUTION};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    /// Treat the original question as a one-step plan.
    pub no_plan: bool,
    /// Skip judge and attribution calls; no fallback can happen.
    pub no_review: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineSettings {
    pub verifier: VerifierConfig,
    pub retrieval: RetrievalConfig,
    pub planner: PlannerConfig,
    pub ablation: Ablation,
    /// Rank exemplars by embedding similarity within a hop bucket.
    pub exemplar_similarity: bool,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            verifier: VerifierConfig::default(),
            retrieval: RetrievalConfig::default(),
            planner: PlannerConfig::default(),
            ablation: Ablation::default(),
            exemplar_similarity: true,
        }
    }
}

/// Model-backed collaborators, one per role.
#[derive(Clone)]
pub struct Providers {
    pub generator: Arc<dyn ChatProvider>,
    pub judge: Arc<dyn ChatProvider>,
    pub attributor: Arc<dyn ChatProvider>,
    pub embedder: Arc<dyn Embedder>,
}

impl Providers {
    /// Same chat provider for every role.
    pub fn shared(chat: Arc<dyn ChatProvider>, embedder: Arc<dyn Embedder>) -> Self {
        Self {
            generator: chat.clone(),
            judge: chat.clone(),
            attributor: chat,
            embedder,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub trajectory: TrajectoryRecord,
    pub fallback_triggered: bool,
    pub provider_usage: Vec<ProviderUsage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub question: Question,
    pub final_answer: String,
    pub trajectories: Vec<TrajectoryRecord>,
    pub plan: Plan,
    pub plan_attempts: u32,
    pub plan_rejections: Vec<String>,
    pub profile: ComplexityProfile,
    pub total_usage: ProviderUsage,
    pub transcript: Vec<TranscriptEvent>,
    pub warnings: Vec<String>,
}

impl QueryResult {
    pub fn transcript_lines(&self) -> Vec<String> {
        self.transcript.iter().map(TranscriptEvent::line).collect()
    }
}

/// A failed query, with whatever was completed before the failure.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("query {question_id}: {error}")]
pub struct QueryError {
    pub question_id: String,
    pub error: Error,
    pub partial_trajectory: Vec<TrajectoryRecord>,
    pub transcript: Vec<TranscriptEvent>,
    pub warnings: Vec<String>,
}

pub struct Engine {
    pub settings: EngineSettings,
    pub profiler: ComplexityProfiler,
    pub exemplars: Option<Arc<ExemplarStore>>,
    pub index: Arc<CorpusIndex>,
    pub templates: Arc<TemplateSet>,
    pub providers: Providers,
}

/// `Source i:` blocks in presentation order.
pub fn render_sources(documents: &[&Document]) -> String {
    documents
        .iter()
        .enumerate()
        .map(|(i, d)| format!("Source {}:\n{}", i + 1, d.indexed_text()))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_trajectory(records: &[TrajectoryRecord]) -> String {
    records
        .iter()
        .map(|r| {
            let mut block = format!(
                "Trajectory {}:\nThought: {}\nQuestion: {}\nAnswer: {}",
                r.step_index, r.thought, r.question.text, r.answer.text
            );
            if !r.evidence_texts.is_empty() {
                block.push_str("\nEvidence:");
                for e in &r.evidence_texts {
                    block.push_str("\n- ");
                    block.push_str(&e.replace('\n', " "));
                }
            }
            block
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Drops an echoed answer cue and surrounding whitespace.
pub fn clean_final_answer(reply: &str) -> String {
    let mut text = reply.trim();
    for cue in ["so the answer is:", "answer:"] {
        if text.len() >= cue.len() && text[..cue.len()].eq_ignore_ascii_case(cue) {
            text = text[cue.len()..].trim();
            break;
        }
    }
    text.to_owned()
}

fn hit_list(hits: &[RankedDocument<'_>]) -> String {
    let ids: Vec<&str> = hits.iter().map(|h| h.document.id.as_str()).collect();
    format!("hits={}", ids.join(","))
}

struct Reading {
    answer: IntermediateAnswer,
    evidence: Vec<String>,
}

struct Review {
    report: Option<ConfidenceReport>,
    error: Option<String>,
}

impl Engine {
    pub fn run_query(&self, question: &Question) -> Result<QueryResult, QueryError> {
        let mut transcript = Transcript::new();
        let mut warnings = Vec::new();
        let mut trajectories = Vec::new();
        match self.run_inner(question, &mut transcript, &mut warnings, &mut trajectories) {
            Ok((final_answer, plan, profile, plan_attempts, plan_rejections)) => Ok(QueryResult {
                question: question.clone(),
                final_answer,
                total_usage: transcript.usage(),
                trajectories,
                plan,
                plan_attempts,
                plan_rejections,
                profile,
                transcript: transcript.into_events(),
                warnings,
            }),
            Err(error) => Err(QueryError {
                question_id: question.id.clone(),
                error,
                partial_trajectory: trajectories,
                transcript: transcript.into_events(),
                warnings,
            }),
        }
    }

    #[allow(clippy::type_complexity)]
    fn run_inner(
        &self,
        question: &Question,
        transcript: &mut Transcript,
        warnings: &mut Vec<String>,
        trajectories: &mut Vec<TrajectoryRecord>,
    ) -> Result<(String, Plan, ComplexityProfile, u32, Vec<String>), Error> {
        let profile = self.profiler.profile(question, transcript, warnings)?;

        let (plan, attempts, rejections) = if self.settings.ablation.no_plan {
            (Plan::single_step(question), 0, Vec::new())
        } else {
            let store = self.exemplars.as_deref();
            let query_embedding = match store {
                Some(s) if self.settings.exemplar_similarity && s.has_embeddings() => {
                    match &profile.embedding_hq {
                        Some(e) => Some(e.clone()),
                        None => transcript
                            .embed(
                                self.providers.embedder.as_ref(),
                                std::slice::from_ref(&question.text),
                            )?
                            .vectors
                            .pop(),
                    }
                }
                _ => None,
            };
            let outcome = generate_plan(
                question,
                &profile,
                store,
                query_embedding.as_deref(),
                &self.templates,
                self.providers.generator.as_ref(),
                &self.settings.planner,
                transcript,
            )?;
            for r in &outcome.rejections {
                warnings.push(format!("plan attempt rejected: {r}"));
            }
            (outcome.plan, outcome.attempts, outcome.rejections)
        };

        let hop = profile.hop_label.as_f64();
        let mut current: Option<Question> = None;
        for (pos, step) in plan.steps.iter().enumerate() {
            transcript.set_step(Some(step.index));
            let step_question = current.take().unwrap_or_else(|| step.question.clone());
            let outcome = self
                .execute_step(
                    step,
                    &step_question,
                    hop,
                    trajectories,
                    transcript,
                    warnings,
                )
                .map_err(|e| Error::at_step(step.index, e))?;
            trajectories.push(outcome.trajectory);
            if let Some(next) = plan.steps.get(pos + 1) {
                current = Some(self.refine_next_question(
                    trajectories,
                    &next.question,
                    transcript,
                    warnings,
                ));
            }
        }
        transcript.set_step(None);

        let prompt = self.templates.get(ANSWER_GENERATION)?.render(&[
            ("trajectory", &render_trajectory(trajectories)),
            ("question", &question.text),
        ])?;
        let reply = transcript.chat(
            CallKind::Answer,
            self.providers.generator.as_ref(),
            &ChatRequest::new(ANSWER_GENERATION, prompt),
        )?;
        Ok((
            clean_final_answer(&reply.text),
            plan,
            profile,
            attempts,
            rejections,
        ))
    }

    /// One act-and-review step. `question` is the possibly refined wording
    /// of `step.question`.
    pub fn execute_step(
        &self,
        step: &PlanStep,
        question: &Question,
        hop: f64,
        prior: &[TrajectoryRecord],
        transcript: &mut Transcript,
        warnings: &mut Vec<String>,
    ) -> Result<StepOutcome, Error> {
        let start = transcript.events().len();
        let cfg = &self.settings.retrieval;

        if step.action == Action::Answer {
            // Answered from the trajectory alone; nothing retrieved, nothing
            // to verify against.
            let reading = self.read(
                question,
                &render_trajectory(prior),
                &[],
                transcript,
                warnings,
            )?;
            warnings.push(format!(
                "step {} is an Answer action: answered from the trajectory without retrieval or verification",
                step.index
            ));
            return Ok(StepOutcome {
                trajectory: self.record(step, question, reading, None, None, None),
                fallback_triggered: false,
                provider_usage: usage_since(transcript, start),
            });
        }

        let hits = dense_retrieve(
            question,
            &self.index,
            self.providers.embedder.as_ref(),
            cfg,
            transcript,
        )?;
        transcript.note(CallKind::DenseRetrieve, "dense", hit_list(&hits));
        let docs: Vec<&Document> = hits.iter().map(|h| h.document).collect();
        let reading = self.read(
            question,
            &render_sources(&docs),
            &docs,
            transcript,
            warnings,
        )?;

        if self.settings.ablation.no_review {
            return Ok(StepOutcome {
                trajectory: self.record(step, question, reading, None, None, None),
                fallback_triggered: false,
                provider_usage: usage_since(transcript, start),
            });
        }

        let first = self.review(question, &reading, hop, transcript);
        let accepted = first.report.as_ref().is_some_and(|r| r.accepted);
        if accepted {
            return Ok(StepOutcome {
                trajectory: self.record(step, question, reading, first.report, None, None),
                fallback_triggered: false,
                provider_usage: usage_since(transcript, start),
            });
        }
        if let Some(e) = &first.error {
            warnings.push(format!("step {}: verification failed: {e}", step.index));
        }

        let sparse = sparse_retrieve(question, &self.index, cfg);
        transcript.note(CallKind::SparseRetrieve, "bm25", hit_list(&sparse));
        let docs: Vec<&Document> = sparse.iter().map(|h| h.document).collect();
        let mut revised = self.read(
            question,
            &render_sources(&docs),
            &docs,
            transcript,
            warnings,
        )?;
        revised.answer.revised = true;

        // Recorded for analysis only; the revised answer is kept either way.
        let second = self.review(question, &revised, hop, transcript);
        if let Some(e) = &second.error {
            warnings.push(format!(
                "step {}: revised answer could not be scored: {e}",
                step.index
            ));
        }
        Ok(StepOutcome {
            trajectory: self.record(
                step,
                question,
                revised,
                first.report,
                second.report,
                first.error,
            ),
            fallback_triggered: true,
            provider_usage: usage_since(transcript, start),
        })
    }

    /// Rewords `next` using the trajectory so far. Empty replies and
    /// provider errors keep the original wording.
    pub fn refine_next_question(
        &self,
        prior: &[TrajectoryRecord],
        next: &Question,
        transcript: &mut Transcript,
        warnings: &mut Vec<String>,
    ) -> Question {
        let prompt = match self.templates.get(REFINE_QUESTION).and_then(|t| {
            t.render(&[
                ("trajectory", &render_trajectory(prior)),
                ("question", &next.text),
            ])
        }) {
            Ok(p) => p,
            Err(e) => {
                warnings.push(format!("refinement skipped: {e}"));
                return next.clone();
            }
        };
        let request = ChatRequest::new(REFINE_QUESTION, prompt);
        match transcript.chat(
            CallKind::Refine,
            self.providers.generator.as_ref(),
            &request,
        ) {
            Ok(reply) => match next.refined(&reply.text) {
                Ok(q) => q,
                Err(_) => {
                    warnings.push(format!(
                        "empty refinement for {}; original wording kept",
                        next.id
                    ));
                    next.clone()
                }
            },
            Err(e) => {
                warnings.push(format!(
                    "refinement failed for {} ({e}); original wording kept",
                    next.id
                ));
                next.clone()
            }
        }
    }

    fn read(
        &self,
        question: &Question,
        sources: &str,
        presented: &[&Document],
        transcript: &mut Transcript,
        warnings: &mut Vec<String>,
    ) -> Result<Reading, Error> {
        let prompt = self
            .templates
            .get(STEP_EXECUTION)?
            .render(&[("sources", sources), ("question", &question.text)])?;
        let reply = transcript.chat(
            CallKind::Read,
            self.providers.generator.as_ref(),
            &ChatRequest::new(STEP_EXECUTION, prompt),
        )?;
        let text = reply.text.trim().to_owned();
        let extraction = extract_citations(&text, presented);
        warnings.extend(extraction.warnings);
        let evidence = extraction
            .citations
            .entries
            .iter()
            .map(|c| presented[c.source_ordinal - 1].indexed_text())
            .collect();
        Ok(Reading {
            answer: IntermediateAnswer {
                question_ref: question.clone(),
                text,
                citations: extraction.citations,
                revised: false,
            },
            evidence,
        })
    }

    /// Judge and attribution over the cited evidence. Either failing
    /// leaves the step without a report, which the gate treats as rejected.
    fn review(
        &self,
        question: &Question,
        reading: &Reading,
        hop: f64,
        transcript: &mut Transcript,
    ) -> Review {
        let context = reading.evidence.join("\n");
        let answer = &reading.answer.text;
        let scored = judge_accuracy(
            self.providers.judge.as_ref(),
            &self.templates,
            question,
            answer,
            &context,
            transcript,
        )
        .and_then(|a| {
            let verdict = score_attribution(
                self.providers.attributor.as_ref(),
                &self.templates,
                question,
                answer,
                &context,
                transcript,
            )?;
            confidence(a, map_attribution(verdict), hop, &self.settings.verifier)
        });
        match scored {
            Ok(report) => Review {
                report: Some(report),
                error: None,
            },
            Err(e) => Review {
                report: None,
                error: Some(e.to_string()),
            },
        }
    }

    fn record(
        &self,
        step: &PlanStep,
        question: &Question,
        reading: Reading,
        confidence: Option<ConfidenceReport>,
        revised_confidence: Option<ConfidenceReport>,
        verification_error: Option<String>,
    ) -> TrajectoryRecord {
        TrajectoryRecord {
            step_index: step.index,
            action: step.action,
            thought: step.thought.clone(),
            question: question.clone(),
            answer: reading.answer,
            evidence_texts: reading.evidence,
            confidence,
            revised_confidence,
            verification_error,
        }
    }
}

fn usage_since(transcript: &Transcript, start: usize) -> Vec<ProviderUsage> {
    transcript.events()[start..]
        .iter()
        .filter(|e| e.fingerprint.is_some())
        .map(|e| e.usage)
        .collect()
}
