//! Dual verification: accuracy score A from a judge, factual consistency F
//! from an attribution verdict, blended by a hop-dependent logistic weight.
//!
//! ```text
//! alpha(h) = 1 / (1 + exp(gamma * (h - h0)))
//! C_q      = A * alpha(h) + F * (1 - alpha(h))
//! accept   = C_q >= C_t
//! ```

use thiserror::Error;

use crate::domain::{ConfidenceReport, Question, VerifierConfig};
use crate::providers::{
    parse_accuracy, AttributionVerdict, CallKind, ChatProvider, ChatRequest, ProviderError,
    Transcript,
};
use crate::templates::{TemplateError, TemplateSet, ANSWER_VERIFICATION, ATTRIBUTION};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReviewError {
    #[error("accuracy {0} is outside [0, 1]")]
    AccuracyRange(f64),
    #[error("consistency {0} is not one of 0, 0.5, 1")]
    ConsistencyValue(f64),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

/// Weight on accuracy; strictly decreasing in `hop`, 0.5 at `h0`.
pub fn alpha(hop: f64, config: &VerifierConfig) -> f64 {
    1.0 / (1.0 + (config.gamma * (hop - config.h0)).exp())
}

pub fn confidence(
    accuracy: f64,
    consistency: f64,
    hop: f64,
    config: &VerifierConfig,
) -> Result<ConfidenceReport, ReviewError> {
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(ReviewError::AccuracyRange(accuracy));
    }
    if ![0.0, 0.5, 1.0].contains(&consistency) {
        return Err(ReviewError::ConsistencyValue(consistency));
    }
    let a = alpha(hop, config);
    let score = accuracy * a + consistency * (1.0 - a);
    Ok(ConfidenceReport {
        accuracy,
        consistency,
        alpha: a,
        score,
        accepted: score >= config.threshold,
        hop_used: hop,
    })
}

pub fn map_attribution(verdict: AttributionVerdict) -> f64 {
    match verdict {
        AttributionVerdict::Contradictory => 0.0,
        AttributionVerdict::Extrapolatory => 0.5,
        AttributionVerdict::Attributable => 1.0,
    }
}

/// Asks the judge for a correctness score of `answer` given `context`.
pub fn judge_accuracy(
    provider: &dyn ChatProvider,
    templates: &TemplateSet,
    question: &Question,
    answer: &str,
    context: &str,
    transcript: &mut Transcript,
) -> Result<f64, ReviewError> {
    let prompt = templates.get(ANSWER_VERIFICATION)?.render(&[
        ("question", &question.text),
        ("answer", answer),
        ("context", context),
    ])?;
    let reply = transcript.chat(
        CallKind::Judge,
        provider,
        &ChatRequest::new(ANSWER_VERIFICATION, prompt),
    )?;
    Ok(parse_accuracy(&reply.text)?)
}

/// Asks the attribution scorer whether `context` supports `answer`.
pub fn score_attribution(
    provider: &dyn ChatProvider,
    templates: &TemplateSet,
    question: &Question,
    answer: &str,
    context: &str,
    transcript: &mut Transcript,
) -> Result<AttributionVerdict, ReviewError> {
    let prompt = templates.get(ATTRIBUTION)?.render(&[
        ("question", &question.text),
        ("answer", answer),
        ("context", context),
    ])?;
    let reply = transcript.chat(
        CallKind::Attribute,
        provider,
        &ChatRequest::new(ATTRIBUTION, prompt),
    )?;
    Ok(AttributionVerdict::parse(&reply.text)?)
}
