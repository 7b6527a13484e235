//! Question complexity: handcrafted features, fused representation, and
//! hop-count prediction.
//!
//! The feature vector is `[f_len, f_ent, f_dep, f_mse]`: token count,
//! named-entity count, maximum dependency depth in edges, and mean word
//! sense entropy in bits. When an embedder is configured the predictor sees
//! `[embedding ; features]`, otherwise the features alone.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{HopLabel, Question};
use crate::providers::{CallKind, ChatProvider, ChatRequest, Embedder, ProviderError, Transcript};

pub const ANNOTATE_TEMPLATE: &str = "annotate";
pub const PREDICT_TEMPLATE: &str = "hop_predict";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComplexityError {
    #[error("empty sentence")]
    EmptySentence,
    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error("analyzer: {0}")]
    Analyzer(String),
    #[error("predictor model: {0}")]
    Model(String),
    #[error("feature dimension mismatch: model expects {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SenseEntry {
    Count(usize),
    Distribution(Vec<f64>),
}

/// Sense distributions `P(s | w)` keyed by lowercased lemma.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SenseLexicon {
    senses: HashMap<String, Vec<f64>>,
}

impl SenseLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a word with `k` equally likely senses.
    pub fn insert_uniform(&mut self, lemma: &str, k: usize) -> Result<(), ComplexityError> {
        if k == 0 {
            return Err(ComplexityError::Lexicon(format!("{lemma}: zero senses")));
        }
        self.senses
            .insert(lemma.to_lowercase(), vec![1.0 / k as f64; k]);
        Ok(())
    }

    pub fn insert_distribution(
        &mut self,
        lemma: &str,
        probabilities: Vec<f64>,
    ) -> Result<(), ComplexityError> {
        if probabilities.is_empty() {
            return Err(ComplexityError::Lexicon(format!(
                "{lemma}: empty distribution"
            )));
        }
        if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(ComplexityError::Lexicon(format!(
                "{lemma}: probabilities must lie in [0,1]"
            )));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ComplexityError::Lexicon(format!(
                "{lemma}: probabilities sum to {sum}"
            )));
        }
        self.senses.insert(lemma.to_lowercase(), probabilities);
        Ok(())
    }

    /// JSON object mapping lemma to either a sense count (uniform) or an
    /// explicit probability list.
    pub fn from_json(input: &str) -> Result<Self, ComplexityError> {
        let raw: HashMap<String, SenseEntry> =
            serde_json::from_str(input).map_err(|e| ComplexityError::Lexicon(e.to_string()))?;
        let mut lexicon = Self::new();
        for (lemma, entry) in raw {
            match entry {
                SenseEntry::Count(k) => lexicon.insert_uniform(&lemma, k)?,
                SenseEntry::Distribution(p) => lexicon.insert_distribution(&lemma, p)?,
            }
        }
        Ok(lexicon)
    }

    pub fn load(path: &Path) -> Result<Self, ComplexityError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ComplexityError::Lexicon(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn senses(&self, lemma: &str) -> Option<&[f64]> {
        self.senses.get(&lemma.to_lowercase()).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.senses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.senses.is_empty()
    }
}

/// Entropy of a word's sense distribution in bits; 0 for unknown words.
pub fn word_sense_entropy(word: &str, lexicon: &SenseLexicon) -> f64 {
    let Some(dist) = lexicon.senses(word) else {
        return 0.0;
    };
    let h: f64 = dist
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| -p * p.log2())
        .sum();
    if h > 0.0 {
        h
    } else {
        0.0
    }
}

/// Mean word sense entropy over the tokens.
pub fn sentence_mse(tokens: &[String], lexicon: &SenseLexicon) -> Result<f64, ComplexityError> {
    if tokens.is_empty() {
        return Err(ComplexityError::EmptySentence);
    }
    // Summing in sorted order makes the result independent of token order.
    let mut entropies: Vec<f64> = tokens
        .iter()
        .map(|t| word_sense_entropy(t, lexicon))
        .collect();
    entropies.sort_by(f64::total_cmp);
    Ok(entropies.iter().sum::<f64>() / tokens.len() as f64)
}

/// Output of a linguistic analyzer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Analysis {
    pub tokens: Vec<String>,
    pub entities: usize,
    pub depth: usize,
}

pub trait LinguisticAnalyzer: Send + Sync {
    fn analyze(
        &self,
        question: &Question,
        transcript: &mut Transcript,
    ) -> Result<Analysis, ComplexityError>;

    fn id(&self) -> &str;
}

const SUBORDINATORS: &[&str] = &[
    "that", "which", "who", "whom", "whose", "where", "when", "while", "because", "although",
    "though", "if", "since", "after", "before", "until", "unless", "whereas", "whether",
];

/// Approximate analyzer.
///
/// Entities are capitalised tokens other than the first plus 4-digit
/// numbers. Depth is the number of non-initial subordinating markers plus
/// the number of commas; it approximates clause nesting, not a parse.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicAnalyzer;

impl HeuristicAnalyzer {
    pub fn analyze_text(text: &str) -> Analysis {
        let words: Vec<&str> = text
            .split_whitespace()
            .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
            .filter(|w| !w.is_empty())
            .collect();
        let mut entities = 0;
        let mut markers = 0;
        for (i, w) in words.iter().enumerate() {
            let is_year = w.len() == 4 && w.bytes().all(|b| b.is_ascii_digit());
            let capitalised = i > 0 && w.chars().next().is_some_and(char::is_uppercase);
            if is_year || capitalised {
                entities += 1;
            }
            if i > 0 && SUBORDINATORS.contains(&w.to_lowercase().as_str()) {
                markers += 1;
            }
        }
        let commas = text.matches(',').count();
        Analysis {
            tokens: words.iter().map(|w| w.to_lowercase()).collect(),
            entities,
            depth: markers + commas,
        }
    }
}

impl LinguisticAnalyzer for HeuristicAnalyzer {
    fn analyze(
        &self,
        question: &Question,
        _: &mut Transcript,
    ) -> Result<Analysis, ComplexityError> {
        Ok(Self::analyze_text(&question.text))
    }

    fn id(&self) -> &str {
        "heuristic"
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EntityField {
    Count(usize),
    Names(Vec<String>),
}

impl EntityField {
    fn count(&self) -> usize {
        match self {
            EntityField::Count(n) => *n,
            EntityField::Names(names) => names.iter().collect::<BTreeSet<_>>().len(),
        }
    }
}

#[derive(Deserialize)]
struct AnnotationRecord {
    question_id: String,
    tokens: Vec<String>,
    entities: EntityField,
    depth: usize,
}

#[derive(Deserialize)]
struct RemoteAnnotation {
    tokens: Vec<String>,
    entities: EntityField,
    depth: usize,
}

/// Precomputed annotations from a JSONL sidecar
/// `{question_id, tokens, entities, depth}`; `entities` is a count or a
/// list of (distinct) names.
#[derive(Debug, Clone, Default)]
pub struct AnnotationAnalyzer {
    by_id: HashMap<String, Analysis>,
}

impl AnnotationAnalyzer {
    pub fn from_jsonl(input: &str) -> Result<Self, ComplexityError> {
        let mut by_id = HashMap::new();
        for (lineno, line) in input.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: AnnotationRecord = serde_json::from_str(line).map_err(|e| {
                ComplexityError::Analyzer(format!("annotation line {}: {e}", lineno + 1))
            })?;
            by_id.insert(
                rec.question_id,
                Analysis {
                    tokens: rec.tokens,
                    entities: rec.entities.count(),
                    depth: rec.depth,
                },
            );
        }
        Ok(Self { by_id })
    }

    pub fn load(path: &Path) -> Result<Self, ComplexityError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ComplexityError::Analyzer(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }
}

impl LinguisticAnalyzer for AnnotationAnalyzer {
    fn analyze(
        &self,
        question: &Question,
        _: &mut Transcript,
    ) -> Result<Analysis, ComplexityError> {
        self.by_id.get(&question.id).cloned().ok_or_else(|| {
            ComplexityError::Analyzer(format!("no annotation for question {}", question.id))
        })
    }

    fn id(&self) -> &str {
        "annotations"
    }
}

/// External annotator reached through the common provider contract: the
/// question text goes out under template `annotate`, a JSON
/// `{tokens, entities, depth}` object comes back.
pub struct RemoteAnalyzer {
    provider: Arc<dyn ChatProvider>,
}

impl RemoteAnalyzer {
    pub fn new(provider: Arc<dyn ChatProvider>) -> Self {
        Self { provider }
    }
}

impl LinguisticAnalyzer for RemoteAnalyzer {
    fn analyze(
        &self,
        question: &Question,
        transcript: &mut Transcript,
    ) -> Result<Analysis, ComplexityError> {
        let request = ChatRequest::new(ANNOTATE_TEMPLATE, question.text.clone());
        let reply = transcript
            .chat(CallKind::Annotate, self.provider.as_ref(), &request)
            .map_err(|e| ComplexityError::Analyzer(e.to_string()))?;
        let parsed: RemoteAnnotation = serde_json::from_str(reply.text.trim())
            .map_err(|e| ComplexityError::Analyzer(format!("annotator reply: {e}")))?;
        Ok(Analysis {
            tokens: parsed.tokens,
            entities: parsed.entities.count(),
            depth: parsed.depth,
        })
    }

    fn id(&self) -> &str {
        self.provider.id()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityFeatures {
    pub f_len: usize,
    pub f_ent: usize,
    pub f_dep: usize,
    pub f_mse: f64,
}

impl ComplexityFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.f_len as f64,
            self.f_ent as f64,
            self.f_dep as f64,
            self.f_mse,
        ]
    }
}

pub fn extract_features(
    question: &Question,
    analyzer: &dyn LinguisticAnalyzer,
    lexicon: &SenseLexicon,
    transcript: &mut Transcript,
) -> Result<ComplexityFeatures, ComplexityError> {
    let analysis = analyzer.analyze(question, transcript)?;
    let f_mse = sentence_mse(&analysis.tokens, lexicon)?;
    Ok(ComplexityFeatures {
        f_len: analysis.tokens.len(),
        f_ent: analysis.entities,
        f_dep: analysis.depth,
        f_mse,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureNorm {
    pub mean: f64,
    pub stddev: f64,
}

/// Multinomial-linear hop classifier: `argmax_k (W[k] · norm(z) + b[k])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorModel {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub normalization: Vec<FeatureNorm>,
}

impl PredictorModel {
    /// Built-in features-only model. It scores class `k` as
    /// `k·s − k²/2` with `s = 1 + (f_ent + f_dep)/2`, which picks the hop
    /// count nearest to `s`.
    pub fn baseline() -> Self {
        let weights = (1..=4)
            .map(|k| {
                let k = k as f64;
                vec![0.0, 0.5 * k, 0.5 * k, 0.0]
            })
            .collect();
        let bias = (1..=4)
            .map(|k| {
                let k = k as f64;
                k - k * k / 2.0
            })
            .collect();
        Self {
            weights,
            bias,
            normalization: vec![
                FeatureNorm {
                    mean: 0.0,
                    stddev: 1.0
                };
                4
            ],
        }
    }

    pub fn from_json(input: &str) -> Result<Self, ComplexityError> {
        let model: Self =
            serde_json::from_str(input).map_err(|e| ComplexityError::Model(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self, ComplexityError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ComplexityError::Model(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn dimension(&self) -> usize {
        self.normalization.len()
    }

    pub fn validate(&self) -> Result<(), ComplexityError> {
        if self.weights.len() != 4 || self.bias.len() != 4 {
            return Err(ComplexityError::Model(format!(
                "expected 4 classes, got {} weight rows and {} biases",
                self.weights.len(),
                self.bias.len()
            )));
        }
        let d = self.dimension();
        if let Some(row) = self.weights.iter().find(|r| r.len() != d) {
            return Err(ComplexityError::Model(format!(
                "weight row has {} entries, normalization has {d}",
                row.len()
            )));
        }
        if self
            .normalization
            .iter()
            .any(|n| !(n.stddev > 0.0 && n.stddev.is_finite() && n.mean.is_finite()))
        {
            return Err(ComplexityError::Model("stddev must be positive".to_owned()));
        }
        Ok(())
    }

    pub fn scores(&self, z: &[f64]) -> Result<[f64; 4], ComplexityError> {
        if z.len() != self.dimension() {
            return Err(ComplexityError::Dimension {
                expected: self.dimension(),
                found: z.len(),
            });
        }
        let normalized: Vec<f64> = z
            .iter()
            .zip(&self.normalization)
            .map(|(x, n)| (x - n.mean) / n.stddev)
            .collect();
        let mut scores = [0.0; 4];
        for (k, score) in scores.iter_mut().enumerate() {
            *score = self.bias[k]
                + self.weights[k]
                    .iter()
                    .zip(&normalized)
                    .map(|(w, x)| w * x)
                    .sum::<f64>();
        }
        Ok(scores)
    }
}

/// Index of the best score as a hop label; ties go to the smaller label.
pub fn argmax_hop(scores: &[f64; 4]) -> HopLabel {
    let mut best = 0;
    for k in 1..4 {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    HopLabel::new(best as i64 + 1).expect("index in range")
}

pub trait HopPredictor: Send + Sync {
    fn predict(
        &self,
        question: &Question,
        z: &[f64],
        transcript: &mut Transcript,
    ) -> Result<HopLabel, ComplexityError>;

    fn id(&self) -> &str;
}

#[derive(Debug, Clone)]
pub struct LinearHopPredictor {
    model: PredictorModel,
}

impl LinearHopPredictor {
    pub fn new(model: PredictorModel) -> Result<Self, ComplexityError> {
        model.validate()?;
        Ok(Self { model })
    }

    pub fn baseline() -> Self {
        Self {
            model: PredictorModel::baseline(),
        }
    }

    pub fn model(&self) -> &PredictorModel {
        &self.model
    }
}

impl HopPredictor for LinearHopPredictor {
    fn predict(
        &self,
        _: &Question,
        z: &[f64],
        _: &mut Transcript,
    ) -> Result<HopLabel, ComplexityError> {
        Ok(argmax_hop(&self.model.scores(z)?))
    }

    fn id(&self) -> &str {
        "linear"
    }
}

/// Remote classifier over the provider contract: template `hop_predict`,
/// prompt `{"question": ..., "z": [...]}`, reply an integer in 1..=4.
pub struct RemoteHopPredictor {
    provider: Arc<dyn ChatProvider>,
}

impl RemoteHopPredictor {
    pub fn new(provider: Arc<dyn ChatProvider>) -> Self {
        Self { provider }
    }
}

impl HopPredictor for RemoteHopPredictor {
    fn predict(
        &self,
        question: &Question,
        z: &[f64],
        transcript: &mut Transcript,
    ) -> Result<HopLabel, ComplexityError> {
        let prompt = serde_json::json!({ "question": question.text, "z": z }).to_string();
        let request = ChatRequest::new(PREDICT_TEMPLATE, prompt);
        let reply = transcript.chat(CallKind::PredictHops, self.provider.as_ref(), &request)?;
        let value: i64 = reply
            .text
            .trim()
            .parse()
            .map_err(|_| ProviderError::Parse {
                what: "hop label",
                reply: reply.text.clone(),
            })?;
        HopLabel::new(value).map_err(|e| ComplexityError::Model(e.to_string()))
    }

    fn id(&self) -> &str {
        self.provider.id()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityProfile {
    pub f_len: usize,
    pub f_ent: usize,
    pub f_dep: usize,
    pub f_mse: f64,
    pub embedding_hq: Option<Vec<f64>>,
    pub hop_label: HopLabel,
    pub predictor: String,
    pub embedding_source: Option<String>,
    /// True when prediction failed and the fallback hop was used.
    pub hop_defaulted: bool,
}

impl ComplexityProfile {
    pub fn features(&self) -> ComplexityFeatures {
        ComplexityFeatures {
            f_len: self.f_len,
            f_ent: self.f_ent,
            f_dep: self.f_dep,
            f_mse: self.f_mse,
        }
    }
}

pub struct ComplexityProfiler {
    pub analyzer: Arc<dyn LinguisticAnalyzer>,
    pub lexicon: Arc<SenseLexicon>,
    pub predictor: Arc<dyn HopPredictor>,
    pub embedder: Option<Arc<dyn Embedder>>,
    pub fallback_hop: HopLabel,
}

impl ComplexityProfiler {
    pub fn baseline() -> Self {
        Self {
            analyzer: Arc::new(HeuristicAnalyzer),
            lexicon: Arc::new(SenseLexicon::new()),
            predictor: Arc::new(LinearHopPredictor::baseline()),
            embedder: None,
            fallback_hop: HopLabel::new(2).expect("2 is a hop label"),
        }
    }

    /// Features, optional embedding and hop label. Analyzer failures are
    /// errors; embedding or prediction failures fall back to
    /// `fallback_hop` with a warning.
    pub fn profile(
        &self,
        question: &Question,
        transcript: &mut Transcript,
        warnings: &mut Vec<String>,
    ) -> Result<ComplexityProfile, ComplexityError> {
        let features =
            extract_features(question, self.analyzer.as_ref(), &self.lexicon, transcript)?;
        let mut embedding = None;
        let mut predicted = None;
        let mut failure = None;
        if let Some(embedder) = &self.embedder {
            match transcript.embed(embedder.as_ref(), std::slice::from_ref(&question.text)) {
                Ok(mut e) => embedding = e.vectors.pop(),
                Err(e) => failure = Some(ComplexityError::from(e)),
            }
        }
        if failure.is_none() {
            let mut z = embedding.clone().unwrap_or_default();
            z.extend(features.to_vec());
            match self.predictor.predict(question, &z, transcript) {
                Ok(label) => predicted = Some(label),
                Err(e) => failure = Some(e),
            }
        }
        if let Some(e) = &failure {
            warnings.push(format!(
                "hop prediction failed ({e}); using hop {}",
                self.fallback_hop
            ));
        }
        Ok(ComplexityProfile {
            f_len: features.f_len,
            f_ent: features.f_ent,
            f_dep: features.f_dep,
            f_mse: features.f_mse,
            embedding_hq: embedding,
            hop_label: predicted.unwrap_or(self.fallback_hop),
            predictor: self.predictor.id().to_owned(),
            embedding_source: self.embedder.as_ref().map(|e| e.id().to_owned()),
            hop_defaulted: predicted.is_none(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{FnProvider, HashingEmbedder};

    fn lexicon() -> SenseLexicon {
        let mut l = SenseLexicon::new();
        l.insert_uniform("bank", 2).unwrap();
        l.insert_uniform("run", 4).unwrap();
        l.insert_uniform("paris", 1).unwrap();
        l.insert_distribution("set", vec![0.5, 0.25, 0.25]).unwrap();
        l
    }

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn entropy_examples() {
        let l = lexicon();
        assert_eq!(word_sense_entropy("paris", &l), 0.0);
        assert_eq!(word_sense_entropy("bank", &l), 1.0);
        assert_eq!(word_sense_entropy("Bank", &l), 1.0);
        assert_eq!(word_sense_entropy("set", &l), 1.5);
        assert_eq!(word_sense_entropy("unknown", &l), 0.0);
    }

    #[test]
    fn sentence_mse_examples() {
        let l = lexicon();
        assert_eq!(sentence_mse(&toks(&["paris", "paris"]), &l).unwrap(), 0.0);
        assert_eq!(sentence_mse(&toks(&["bank", "run"]), &l).unwrap(), 1.5);
        assert_eq!(sentence_mse(&toks(&["zzz", "bank"]), &l).unwrap(), 0.5);
        assert_eq!(sentence_mse(&[], &l), Err(ComplexityError::EmptySentence));
    }

    #[test]
    fn lexicon_json_accepts_counts_and_distributions() {
        let l = SenseLexicon::from_json(r#"{"Bank": 2, "set": [0.5, 0.25, 0.25]}"#).unwrap();
        assert_eq!(l.senses("bank").unwrap(), &[0.5, 0.5]);
        assert!(SenseLexicon::from_json(r#"{"x": [0.5, 0.4]}"#).is_err());
        assert!(SenseLexicon::from_json(r#"{"x": 0}"#).is_err());
        assert!(SenseLexicon::from_json(r#"{"x": [1.5, -0.5]}"#).is_err());
    }

    #[test]
    fn single_entity_annotation() {
        let a = AnnotationAnalyzer::from_jsonl(
            r#"{"question_id":"q1","tokens":["Paris"],"entities":["Paris"],"depth":0}"#,
        )
        .unwrap();
        let q = Question::original("q1", "Paris").unwrap();
        let f = extract_features(&q, &a, &lexicon(), &mut Transcript::new()).unwrap();
        assert_eq!((f.f_len, f.f_ent, f.f_dep, f.f_mse), (1, 1, 0, 0.0));
    }

    #[test]
    fn annotation_values_pass_through() {
        let a = AnnotationAnalyzer::from_jsonl(
            r#"{"question_id":"q2","tokens":["a","b","c"],"entities":2,"depth":5}"#,
        )
        .unwrap();
        let q = Question::original("q2", "a b c").unwrap();
        let f = extract_features(&q, &a, &lexicon(), &mut Transcript::new()).unwrap();
        assert_eq!((f.f_dep, f.f_ent), (5, 2));
        let missing = Question::original("other", "x").unwrap();
        let err = extract_features(&missing, &a, &lexicon(), &mut Transcript::new()).unwrap_err();
        assert!(err.to_string().contains("no annotation for question other"));
    }

    #[test]
    fn heuristic_counts_capitalised_and_years() {
        let a = HeuristicAnalyzer::analyze_text("Who directed the film that won in 1999?");
        assert_eq!(a.entities, 1);
        assert_eq!(a.tokens.len(), 8);
        assert_eq!(a.depth, 1);
        let b = HeuristicAnalyzer::analyze_text("Where was the director of Inception, born?");
        assert_eq!(b.entities, 1);
        assert_eq!(b.depth, 1);
    }

    #[test]
    fn remote_analyzer_parses_reply_and_surfaces_errors() {
        let ok = RemoteAnalyzer::new(Arc::new(FnProvider::new("ann", |_: &ChatRequest| {
            Ok(r#"{"tokens":["x","y"],"entities":["A","A","B"],"depth":3}"#.to_owned())
        })));
        let q = Question::original("q", "x y").unwrap();
        let mut t = Transcript::new();
        let a = ok.analyze(&q, &mut t).unwrap();
        assert_eq!((a.entities, a.depth), (2, 3));
        assert_eq!(t.count(CallKind::Annotate), 1);

        let down = RemoteAnalyzer::new(Arc::new(FnProvider::new("ann", |_: &ChatRequest| {
            Err(ProviderError::Io("connection refused".into()))
        })));
        let err = down.analyze(&q, &mut t).unwrap_err();
        assert!(err.to_string().contains("connection refused"));
    }

    fn bias_only(bias: [f64; 4]) -> PredictorModel {
        PredictorModel {
            weights: vec![vec![0.0; 4]; 4],
            bias: bias.to_vec(),
            normalization: vec![
                FeatureNorm {
                    mean: 0.0,
                    stddev: 1.0
                };
                4
            ],
        }
    }

    #[test]
    fn predict_examples() {
        let q = Question::original("q", "x").unwrap();
        let mut t = Transcript::new();
        let p = LinearHopPredictor::new(bias_only([0.0, 1.0, 0.0, 0.0])).unwrap();
        assert_eq!(
            p.predict(&q, &[1.0, 2.0, 3.0, 4.0], &mut t).unwrap().get(),
            2
        );

        let tied = LinearHopPredictor::new(bias_only([0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_eq!(tied.predict(&q, &[0.0; 4], &mut t).unwrap().get(), 2);

        let mut m = bias_only([0.0; 4]);
        for k in 0..4 {
            m.weights[k][0] = (k + 1) as f64;
        }
        let p = LinearHopPredictor::new(m.clone()).unwrap();
        assert_eq!(
            m.scores(&[3.0, 0.0, 0.0, 0.0]).unwrap(),
            [3.0, 6.0, 9.0, 12.0]
        );
        assert_eq!(
            p.predict(&q, &[3.0, 0.0, 0.0, 0.0], &mut t).unwrap().get(),
            4
        );

        assert!(matches!(
            p.predict(&q, &[1.0; 5], &mut t),
            Err(ComplexityError::Dimension {
                expected: 4,
                found: 5
            })
        ));
    }

    #[test]
    fn model_validation() {
        let mut m = PredictorModel::baseline();
        m.normalization[1].stddev = 0.0;
        assert!(m.validate().is_err());
        let mut m = PredictorModel::baseline();
        m.bias.pop();
        assert!(m.validate().is_err());
        let json = serde_json::to_string(&PredictorModel::baseline()).unwrap();
        assert_eq!(
            PredictorModel::from_json(&json).unwrap(),
            PredictorModel::baseline()
        );
    }

    #[test]
    fn baseline_picks_nearest_hop() {
        let m = PredictorModel::baseline();
        let hop = |ent: f64, dep: f64| argmax_hop(&m.scores(&[5.0, ent, dep, 0.3]).unwrap()).get();
        assert_eq!(hop(0.0, 0.0), 1);
        assert_eq!(hop(1.0, 1.0), 2);
        assert_eq!(hop(2.0, 2.0), 3);
        assert_eq!(hop(4.0, 5.0), 4);
    }

    #[test]
    fn profiler_falls_back_on_prediction_failure() {
        let mut profiler = ComplexityProfiler::baseline();
        // The baseline model has no room for embedding dimensions.
        profiler.embedder = Some(Arc::new(HashingEmbedder::new(8)));
        let q = Question::original("q", "Who founded Acme in 1999?").unwrap();
        let mut warnings = Vec::new();
        let p = profiler
            .profile(&q, &mut Transcript::new(), &mut warnings)
            .unwrap();
        assert!(p.hop_defaulted);
        assert_eq!(p.hop_label.get(), 2);
        assert_eq!(p.embedding_hq.as_ref().map(Vec::len), Some(8));
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("dimension mismatch"));
    }

    #[test]
    fn remote_predictor_errors() {
        let q = Question::original("q", "x").unwrap();
        let bad = RemoteHopPredictor::new(Arc::new(FnProvider::new("hp", |_: &ChatRequest| {
            Ok("seven".to_owned())
        })));
        assert!(bad.predict(&q, &[0.0], &mut Transcript::new()).is_err());
        let good = RemoteHopPredictor::new(Arc::new(FnProvider::new("hp", |r: &ChatRequest| {
            assert!(r.filled_prompt.contains("\"z\":[0.5]"));
            Ok(" 3\n".to_owned())
        })));
        assert_eq!(
            good.predict(&q, &[0.5], &mut Transcript::new())
                .unwrap()
                .get(),
            3
        );
    }
}
