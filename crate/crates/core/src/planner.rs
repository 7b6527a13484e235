//! Plan prompt assembly, strict-JSON plan parsing, and plan generation with
//! one corrective retry.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::complexity::ComplexityProfile;
use crate::domain::{Action, Plan, PlanStep, Question, QuestionOrigin};
use crate::exemplars::{ExemplarCase, ExemplarError, ExemplarStore};
use crate::providers::{CallKind, ChatProvider, ChatRequest, ProviderError, Transcript};
use crate::templates::{PromptTemplate, TemplateError, TemplateSet, PLAN_GENERATION};

pub const DEFAULT_MAX_STEPS: usize = 8;
const KEYS: [&str; 3] = ["Thought", "Question", "Action"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("plan is not valid JSON: {0}")]
    Json(String),
    #[error("invalid plan: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanningError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Exemplars(#[from] ExemplarError),
    #[error("planning failed after {attempts} attempts: {last}")]
    Rejected { attempts: u32, last: PlanError },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Exemplars per prompt; 0 gives a zero-shot prompt.
    pub exemplar_k: usize,
    pub max_steps: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            exemplar_k: 1,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

/// Removes a surrounding Markdown code fence, with or without a language
/// tag.
pub fn strip_code_fences(raw: &str) -> &str {
    let t = raw.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    let rest = rest.trim_end();
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

pub fn parse_plan(raw: &str) -> Result<Plan, PlanError> {
    parse_plan_with(raw, "plan", DEFAULT_MAX_STEPS)
}

/// Parses a JSON array of `{Thought, Question, Action}` objects. Steps get
/// indices `1..=m` and question ids `{parent_id}#{index}`.
pub fn parse_plan_with(raw: &str, parent_id: &str, max_steps: usize) -> Result<Plan, PlanError> {
    let value: Value =
        serde_json::from_str(strip_code_fences(raw)).map_err(|e| PlanError::Json(e.to_string()))?;
    let Value::Array(items) = value else {
        return Err(PlanError::Validation(
            "plan must be a JSON array".to_owned(),
        ));
    };
    if items.is_empty() {
        return Err(PlanError::Validation("incomplete plan".to_owned()));
    }
    if items.len() > max_steps {
        return Err(PlanError::Validation(format!(
            "plan has {} steps; the limit is {max_steps}",
            items.len()
        )));
    }
    let mut steps = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let index = i + 1;
        let invalid = |msg: String| PlanError::Validation(format!("step {index}: {msg}"));
        let Value::Object(fields) = item else {
            return Err(invalid("not an object".to_owned()));
        };
        if let Some(extra) = fields.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(invalid(format!("unexpected key {extra:?}")));
        }
        let mut strings = [""; 3];
        for (slot, key) in strings.iter_mut().zip(KEYS) {
            *slot = match fields.get(key) {
                Some(Value::String(s)) => s.as_str(),
                Some(_) => return Err(invalid(format!("{key} must be a string"))),
                None => return Err(invalid(format!("missing key {key}"))),
            };
        }
        let [thought, question, action] = strings;
        let action = Action::parse(action.trim())
            .ok_or_else(|| invalid(format!("unknown action {action:?}")))?;
        let question = Question::new(
            format!("{parent_id}#{index}"),
            question,
            QuestionOrigin::SubQuestion,
        )
        .map_err(|_| invalid("empty question".to_owned()))?;
        steps.push(PlanStep {
            index,
            thought: thought.to_owned(),
            question,
            action,
        });
    }
    Plan::new(steps, Vec::new()).map_err(|e| PlanError::Validation(e.to_string()))
}

/// Exemplar block entry: the exemplar question followed by its plan.
pub fn render_exemplar(case: &ExemplarCase) -> String {
    format!(
        "Question: {}\nPlan:\n{}",
        case.question_text,
        case.plan_json.trim()
    )
}

pub fn render_plan_prompt(
    template: &PromptTemplate,
    exemplars: &[&ExemplarCase],
    question: &Question,
) -> Result<String, TemplateError> {
    template.require(&["exemplars", "question"])?;
    let block = exemplars
        .iter()
        .map(|c| render_exemplar(c))
        .collect::<Vec<_>>()
        .join("\n\n");
    template.render(&[("exemplars", &block), ("question", &question.text)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub plan: Plan,
    pub attempts: u32,
    /// Parse or validation errors of rejected attempts.
    pub rejections: Vec<String>,
}

/// Selects exemplars for the profile's hop label, renders the prompt and
/// asks the generator for a plan. A rejected reply is retried once with the
/// error appended to the prompt.
#[allow(clippy::too_many_arguments)]
pub fn generate_plan(
    question: &Question,
    profile: &ComplexityProfile,
    store: Option<&ExemplarStore>,
    query_embedding: Option<&[f64]>,
    templates: &TemplateSet,
    provider: &dyn ChatProvider,
    config: &PlannerConfig,
    transcript: &mut Transcript,
) -> Result<PlanOutcome, PlanningError> {
    let exemplars = match (store, config.exemplar_k) {
        (_, 0) | (None, _) => Vec::new(),
        (Some(s), k) => s.select(profile.hop_label, k, query_embedding)?,
    };
    let template = templates.get(PLAN_GENERATION)?;
    let base_prompt = render_plan_prompt(template, &exemplars, question)?;
    let exemplar_ids: Vec<String> = exemplars.iter().map(|c| c.id.clone()).collect();

    let mut prompt = base_prompt.clone();
    let mut rejections = Vec::new();
    for attempt in 1..=2u32 {
        let request = ChatRequest::new(PLAN_GENERATION, prompt.clone());
        let reply = transcript.chat(CallKind::Plan, provider, &request)?;
        match parse_plan_with(&reply.text, &question.id, config.max_steps) {
            Ok(mut plan) => {
                plan.source_exemplar_ids = exemplar_ids;
                return Ok(PlanOutcome {
                    plan,
                    attempts: attempt,
                    rejections,
                });
            }
            Err(e) if attempt == 1 => {
                prompt = format!(
                    "{base_prompt}\n\nYour previous plan was rejected: {e}\nOutput the complete plan again using the strict JSON format."
                );
                rejections.push(e.to_string());
            }
            Err(e) => {
                return Err(PlanningError::Rejected {
                    attempts: attempt,
                    last: e,
                })
            }
        }
    }
    unreachable!("loop returns on the second attempt")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexity::ComplexityProfiler;
    use crate::domain::HopLabel;
    use crate::providers::{ProviderUsage, ReplayEntry, ReplayLog, ReplayProvider};

    const ONE_STEP: &str = r#"[{"Thought":"t","Question":"q1","Action":"Retrieve"}]"#;

    #[test]
    fn parses_one_step_plan() {
        let plan = parse_plan(ONE_STEP).unwrap();
        assert_eq!(plan.len(), 1);
        let s = &plan.steps[0];
        assert_eq!(
            (
                s.index,
                s.thought.as_str(),
                s.question.text.as_str(),
                s.action
            ),
            (1, "t", "q1", Action::Retrieve)
        );
        assert_eq!(s.question.origin, QuestionOrigin::SubQuestion);
    }

    #[test]
    fn unknown_action_is_a_validation_error() {
        let raw = r#"[{"Thought":"t","Question":"q1","Action":"Search"}]"#;
        assert!(matches!(parse_plan(raw), Err(PlanError::Validation(m)) if m.contains("Search")));
    }

    #[test]
    fn fenced_payload_parses_identically() {
        let fenced = format!("```json\n{ONE_STEP}\n```");
        assert_eq!(parse_plan(&fenced).unwrap(), parse_plan(ONE_STEP).unwrap());
        let inline = format!("```json {ONE_STEP} ```");
        assert_eq!(parse_plan(&inline).unwrap(), parse_plan(ONE_STEP).unwrap());
        let bare = format!("```\n{ONE_STEP}```");
        assert_eq!(parse_plan(&bare).unwrap(), parse_plan(ONE_STEP).unwrap());
    }

    #[test]
    fn structural_rejections() {
        assert_eq!(
            parse_plan("[]"),
            Err(PlanError::Validation("incomplete plan".into()))
        );
        assert!(matches!(parse_plan("[{"), Err(PlanError::Json(_))));
        assert!(matches!(
            parse_plan(r#"{"Thought":"t"}"#),
            Err(PlanError::Validation(_))
        ));
        let missing = r#"[{"Thought":"t","Action":"Answer"}]"#;
        assert!(
            matches!(parse_plan(missing), Err(PlanError::Validation(m)) if m.contains("missing key Question"))
        );
        let extra = r#"[{"Thought":"t","Question":"q","Action":"Answer","Why":"x"}]"#;
        assert!(matches!(parse_plan(extra), Err(PlanError::Validation(_))));
        let typed = r#"[{"Thought":1,"Question":"q","Action":"Answer"}]"#;
        assert!(matches!(parse_plan(typed), Err(PlanError::Validation(_))));
        let blank = r#"[{"Thought":"","Question":"  ","Action":"Answer"}]"#;
        assert!(matches!(parse_plan(blank), Err(PlanError::Validation(_))));
    }

    #[test]
    fn step_cap() {
        let step = r#"{"Thought":"t","Question":"q","Action":"Retrieve"}"#;
        let nine = format!("[{}]", vec![step; 9].join(","));
        assert!(
            matches!(parse_plan(&nine), Err(PlanError::Validation(m)) if m.contains("limit is 8"))
        );
        assert_eq!(parse_plan_with(&nine, "p", 9).unwrap().len(), 9);
    }

    fn case(id: &str) -> ExemplarCase {
        ExemplarCase {
            id: id.to_owned(),
            hop_label: HopLabel::new(2).unwrap(),
            question_text: "Who is X?".to_owned(),
            plan_json: ONE_STEP.to_owned(),
        }
    }

    #[test]
    fn renders_by_substitution() {
        let t = PromptTemplate::new("p", "{exemplars}|{question}");
        let e = case("e1");
        let q = Question::original("q", "who?").unwrap();
        let out = render_plan_prompt(&t, &[&e], &q).unwrap();
        assert_eq!(out, format!("{}|who?", render_exemplar(&e)));
        assert_eq!(render_plan_prompt(&t, &[], &q).unwrap(), "|who?");

        let no_question = PromptTemplate::new("p", "{exemplars}");
        assert!(matches!(
            render_plan_prompt(&no_question, &[], &q),
            Err(TemplateError::MissingPlaceholder { name, .. }) if name == "question"
        ));
    }

    fn profile() -> ComplexityProfile {
        let q = Question::original("q", "Who directed Film X?").unwrap();
        ComplexityProfiler::baseline()
            .profile(&q, &mut Transcript::new(), &mut Vec::new())
            .unwrap()
    }

    fn entry(prompt: &str, response: &str) -> ReplayEntry {
        ReplayEntry {
            request_fingerprint: crate::providers::fingerprint(PLAN_GENERATION, prompt),
            template_id: None,
            response: response.to_owned(),
            usage: ProviderUsage::default(),
        }
    }

    fn setup() -> (Question, TemplateSet, String) {
        let q = Question::original("q", "Who directed Film X?").unwrap();
        let templates = TemplateSet::default();
        let prompt = render_plan_prompt(templates.get(PLAN_GENERATION).unwrap(), &[], &q).unwrap();
        (q, templates, prompt)
    }

    #[test]
    fn replayed_two_step_plan() {
        let (q, templates, prompt) = setup();
        let two = r#"[{"Thought":"a","Question":"Which film is X?","Action":"Retrieve"},
                      {"Thought":"b","Question":"Who directed it?","Action":"Retrieve"}]"#;
        let provider = ReplayProvider::new(ReplayLog {
            entries: vec![entry(&prompt, two)],
        });
        let out = generate_plan(
            &q,
            &profile(),
            None,
            None,
            &templates,
            &provider,
            &PlannerConfig::default(),
            &mut Transcript::new(),
        )
        .unwrap();
        assert_eq!(out.plan.len(), 2);
        assert_eq!(out.attempts, 1);
        assert_eq!(out.plan.steps[1].question.id, "q#2");
    }

    #[test]
    fn retry_after_malformed_reply() {
        let (q, templates, prompt) = setup();
        let first_err = parse_plan("not json").unwrap_err();
        let retry_prompt = format!(
            "{prompt}\n\nYour previous plan was rejected: {first_err}\nOutput the complete plan again using the strict JSON format."
        );
        let provider = ReplayProvider::new(ReplayLog {
            entries: vec![entry(&prompt, "not json"), entry(&retry_prompt, ONE_STEP)],
        });
        let mut t = Transcript::new();
        let out = generate_plan(
            &q,
            &profile(),
            None,
            None,
            &templates,
            &provider,
            &PlannerConfig::default(),
            &mut t,
        )
        .unwrap();
        assert_eq!(out.attempts, 2);
        assert_eq!(out.rejections.len(), 1);
        assert_eq!(t.count(CallKind::Plan), 2);
    }

    #[test]
    fn double_failure_is_a_planning_error() {
        let (q, templates, _) = setup();
        let provider = crate::providers::FnProvider::new("g", |_: &ChatRequest| {
            Ok(r#"[{"Thought":"t","Question":"q","Action":"Search"}]"#.to_owned())
        });
        let err = generate_plan(
            &q,
            &profile(),
            None,
            None,
            &templates,
            &provider,
            &PlannerConfig::default(),
            &mut Transcript::new(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            PlanningError::Rejected {
                attempts: 2,
                last: PlanError::Validation(_)
            }
        ));
    }
}
