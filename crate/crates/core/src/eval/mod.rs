//! Dataset runs and metrics: exact match, judge accuracy, mean response
//! time per query (RTPQ) and mean tokens per query (CTPQ).

mod dataset;
pub mod sweep;

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Question;
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::providers::{CallKind, ChatProvider, ChatRequest, Transcript};
use crate::templates::{TemplateSet, ANSWER_EQUIVALENCE};
use crate::text::strip_punctuation;

pub use dataset::{load_dataset, parse_dataset, DatasetFormat, DatasetRecord};

/// Lowercase, drop punctuation and the articles a/an/the, collapse
/// whitespace.
pub fn normalize_answer(s: &str) -> String {
    strip_punctuation(&s.to_lowercase())
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn exact_match(prediction: &str, gold_answers: &[String]) -> u8 {
    let p = normalize_answer(prediction);
    u8::from(gold_answers.iter().any(|g| normalize_answer(g) == p))
}

/// Binary answer-equivalence verdict from the judge. Anything other than
/// yes/no scores 0 and returns a warning.
pub fn judge_acc(
    prediction: &str,
    gold_answers: &[String],
    question: &str,
    judge: &dyn ChatProvider,
    templates: &TemplateSet,
    transcript: &mut Transcript,
) -> (u8, Option<String>) {
    let prompt = match templates.get(ANSWER_EQUIVALENCE).and_then(|t| {
        t.render(&[
            ("question", question),
            ("gold", &gold_answers.join(" | ")),
            ("prediction", prediction),
        ])
    }) {
        Ok(p) => p,
        Err(e) => return (0, Some(format!("acc judge skipped: {e}"))),
    };
    let request = ChatRequest::new(ANSWER_EQUIVALENCE, prompt);
    match transcript.chat(CallKind::AccJudge, judge, &request) {
        Ok(reply) => {
            let verdict = reply
                .text
                .trim()
                .trim_matches(|c: char| !c.is_ascii_alphanumeric())
                .to_ascii_lowercase();
            match verdict.as_str() {
                "yes" => (1, None),
                "no" => (0, None),
                _ => (
                    0,
                    Some(format!(
                        "acc judge reply {:?} is not yes/no; scored 0",
                        reply.text
                    )),
                ),
            }
        }
        Err(e) => (0, Some(format!("acc judge failed: {e}; scored 0"))),
    }
}

/// How per-query response time is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatencySource {
    WallClock,
    /// Sum of provider-reported latencies; used for replayed runs so
    /// reports stay reproducible.
    Logged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchOptions {
    pub workers: usize,
    pub latency: LatencySource,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            latency: LatencySource::WallClock,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRow {
    pub id: String,
    pub question: String,
    pub prediction: String,
    pub gold_answers: Vec<String>,
    pub em: u8,
    pub acc: u8,
    pub latency_seconds: f64,
    pub tokens: u64,
    pub plan_steps: usize,
    pub fallbacks: usize,
    pub verification_calls: usize,
    pub error: Option<String>,
    pub warnings: Vec<String>,
    pub transcript: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub em: f64,
    pub acc: f64,
    pub rtpq_seconds: f64,
    pub ctpq_tokens: f64,
    pub n_queries: usize,
    pub per_query: Vec<QueryRow>,
}

/// Order-independent mean: values are summed in sorted order.
fn mean(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values.into_iter().sum::<f64>() / n
}

impl MetricsReport {
    pub fn from_rows(per_query: Vec<QueryRow>) -> Self {
        let col = |f: fn(&QueryRow) -> f64| mean(per_query.iter().map(f).collect());
        Self {
            em: col(|r| f64::from(r.em)),
            acc: col(|r| f64::from(r.acc)),
            rtpq_seconds: col(|r| r.latency_seconds),
            ctpq_tokens: col(|r| r.tokens as f64),
            n_queries: per_query.len(),
            per_query,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>6} {:>6} {:>10} {:>12}",
            "queries", "EM", "Acc", "RTPQ(s)", "CTPQ(tok)"
        );
        let _ = writeln!(
            out,
            "{:<8} {:>6.3} {:>6.3} {:>10.3} {:>12.1}",
            self.n_queries, self.em, self.acc, self.rtpq_seconds, self.ctpq_tokens
        );
        out.push('\n');
        let _ = writeln!(
            out,
            "{:<16} {:>3} {:>3} {:>6} {:>5}  prediction",
            "id", "EM", "Acc", "tokens", "steps"
        );
        for r in &self.per_query {
            let mut pred = r.prediction.replace('\n', " ");
            if let Some(e) = &r.error {
                pred = format!("ERROR: {e}");
            }
            let _ = writeln!(
                out,
                "{:<16} {:>3} {:>3} {:>6} {:>5}  {}",
                r.id, r.em, r.acc, r.tokens, r.plan_steps, pred
            );
        }
        out
    }
}

/// Runs every record through `engine`, scoring EM and judge accuracy.
/// Rows keep dataset order regardless of worker count; a failed record
/// scores 0 on both metrics and carries its diagnostic.
pub fn run_benchmark(
    engine: &Engine,
    records: &[DatasetRecord],
    acc_judge: &dyn ChatProvider,
    options: BenchOptions,
) -> Result<MetricsReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let rows: Vec<QueryRow> = pool.install(|| {
        records
            .par_iter()
            .map(|r| evaluate_record(engine, r, acc_judge, options.latency))
            .collect()
    });
    Ok(MetricsReport::from_rows(rows))
}

pub fn evaluate_record(
    engine: &Engine,
    record: &DatasetRecord,
    acc_judge: &dyn ChatProvider,
    latency: LatencySource,
) -> QueryRow {
    let started = Instant::now();
    let mut row = QueryRow {
        id: record.id.clone(),
        question: record.question.clone(),
        prediction: String::new(),
        gold_answers: record.gold_answers.clone(),
        em: 0,
        acc: 0,
        latency_seconds: 0.0,
        tokens: 0,
        plan_steps: 0,
        fallbacks: 0,
        verification_calls: 0,
        error: None,
        warnings: Vec::new(),
        transcript: Vec::new(),
    };
    let question = match Question::original(&record.id, &record.question) {
        Ok(q) => q,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let (events, logged_latency) = match engine.run_query(&question) {
        Ok(result) => {
            row.prediction = result.final_answer.clone();
            row.em = exact_match(&result.final_answer, &record.gold_answers);
            row.plan_steps = result.plan.len();
            row.fallbacks = result
                .trajectories
                .iter()
                .filter(|t| t.answer.revised)
                .count();
            row.tokens = result.total_usage.total_tokens();
            row.warnings = result.warnings;
            let latency = result.total_usage.latency_seconds;
            (result.transcript, latency)
        }
        Err(e) => {
            row.error = Some(e.error.to_string());
            row.warnings = e.warnings;
            let usage: crate::providers::ProviderUsage =
                e.transcript.iter().map(|ev| ev.usage).sum();
            row.tokens = usage.total_tokens();
            (e.transcript, usage.latency_seconds)
        }
    };
    row.verification_calls = events.iter().filter(|e| e.kind.is_verification()).count();
    row.transcript = events.iter().map(|e| e.line()).collect();
    row.latency_seconds = match latency {
        LatencySource::WallClock => started.elapsed().as_secs_f64(),
        LatencySource::Logged => logged_latency,
    };

    if row.error.is_none() {
        // Scored separately so the judge does not count toward CTPQ/RTPQ.
        let mut acc_transcript = Transcript::new();
        let (acc, warning) = judge_acc(
            &row.prediction,
            &record.gold_answers,
            &record.question,
            acc_judge,
            &engine.templates,
            &mut acc_transcript,
        );
        row.acc = acc;
        row.warnings.extend(warning);
        row.transcript.extend(acc_transcript.lines());
    }
    row
}
