//! Prompt templates with `{name}` placeholders.
//!
//! A placeholder is a `{` followed by one or more `[a-z_]` characters and a
//! `}`; any other brace is literal text, so JSON examples inside templates
//! need no escaping. Values are substituted in a single pass and are never
//! re-scanned.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

pub const PLAN_GENERATION: &str = "plan_generation";
pub const STEP_EXECUTION: &str = "step_execution";
pub const ANSWER_VERIFICATION: &str = "answer_verification";
pub const ATTRIBUTION: &str = "attribution";
pub const REFINE_QUESTION: &str = "refine_question";
pub const ANSWER_GENERATION: &str = "answer_generation";
pub const ANSWER_EQUIVALENCE: &str = "answer_equivalence";

const DEFAULTS: &[(&str, &str)] = &[
    (
        PLAN_GENERATION,
        include_str!("../templates/plan_generation.txt"),
    ),
    (
        STEP_EXECUTION,
        include_str!("../templates/step_execution.txt"),
    ),
    (
        ANSWER_VERIFICATION,
        include_str!("../templates/answer_verification.txt"),
    ),
    (ATTRIBUTION, include_str!("../templates/attribution.txt")),
    (
        REFINE_QUESTION,
        include_str!("../templates/refine_question.txt"),
    ),
    (
        ANSWER_GENERATION,
        include_str!("../templates/answer_generation.txt"),
    ),
    (
        ANSWER_EQUIVALENCE,
        include_str!("../templates/answer_equivalence.txt"),
    ),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template {template}: placeholder {{{name}}} has no value")]
    Unresolved { template: String, name: String },
    #[error("template {template}: required placeholder {{{name}}} is missing")]
    MissingPlaceholder { template: String, name: String },
    #[error("no template registered for id {0}")]
    UnknownTemplate(String),
    #[error("reading template {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: String,
    pub body: String,
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn pieces(body: &str) -> Vec<Piece<'_>> {
    let bytes = body.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let mut j = i + 1;
            while j < bytes.len() && (bytes[j].is_ascii_lowercase() || bytes[j] == b'_') {
                j += 1;
            }
            if j > i + 1 && j < bytes.len() && bytes[j] == b'}' {
                if start < i {
                    out.push(Piece::Text(&body[start..i]));
                }
                out.push(Piece::Slot(&body[i + 1..j]));
                i = j + 1;
                start = i;
                continue;
            }
        }
        i += 1;
    }
    if start < body.len() {
        out.push(Piece::Text(&body[start..]));
    }
    out
}

impl PromptTemplate {
    pub fn new(id: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            body: body.into(),
        }
    }

    /// Placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut names = Vec::new();
        for p in pieces(&self.body) {
            if let Piece::Slot(name) = p {
                if !names.contains(&name) {
                    names.push(name);
                }
            }
        }
        names
    }

    pub fn require(&self, names: &[&str]) -> Result<(), TemplateError> {
        let present = self.placeholders();
        for name in names {
            if !present.contains(name) {
                return Err(TemplateError::MissingPlaceholder {
                    template: self.id.clone(),
                    name: (*name).to_owned(),
                });
            }
        }
        Ok(())
    }

    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.body.len());
        for p in pieces(&self.body) {
            match p {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(name) => {
                    let value = values
                        .iter()
                        .find(|(k, _)| *k == name)
                        .map(|(_, v)| *v)
                        .ok_or_else(|| TemplateError::Unresolved {
                            template: self.id.clone(),
                            name: name.to_owned(),
                        })?;
                    out.push_str(value);
                }
            }
        }
        Ok(out)
    }
}

/// Templates keyed by id.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<String, PromptTemplate>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        let templates = DEFAULTS
            .iter()
            .map(|(id, body)| ((*id).to_owned(), PromptTemplate::new(*id, *body)))
            .collect();
        Self { templates }
    }
}

impl TemplateSet {
    /// Defaults, overridden by any `<template_id>.txt` found in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = Self::default();
        let ids: Vec<String> = set.templates.keys().cloned().collect();
        for id in ids {
            let path = dir.join(format!("{id}.txt"));
            if path.exists() {
                let body = std::fs::read_to_string(&path).map_err(|e| TemplateError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                set.insert(PromptTemplate::new(id, body));
            }
        }
        Ok(set)
    }

    pub fn insert(&mut self, template: PromptTemplate) {
        self.templates.insert(template.id.clone(), template);
    }

    pub fn get(&self, id: &str) -> Result<&PromptTemplate, TemplateError> {
        self.templates
            .get(id)
            .ok_or_else(|| TemplateError::UnknownTemplate(id.to_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitutes_named_slots_only() {
        let t = PromptTemplate::new("t", r#"[{ "a": 1 }] {x} and {y}{x} {Not} {}"#);
        assert_eq!(t.placeholders(), vec!["x", "y"]);
        let out = t.render(&[("x", "X"), ("y", "{x}")]).unwrap();
        assert_eq!(out, r#"[{ "a": 1 }] X and {x}X {Not} {}"#);
    }

    #[test]
    fn unresolved_slot_is_an_error() {
        let t = PromptTemplate::new("t", "{a} {b}");
        assert_eq!(
            t.render(&[("a", "1")]),
            Err(TemplateError::Unresolved {
                template: "t".into(),
                name: "b".into()
            })
        );
    }

    #[test]
    fn defaults_expose_expected_slots() {
        let set = TemplateSet::default();
        let expect: &[(&str, &[&str])] = &[
            (PLAN_GENERATION, &["exemplars", "question"]),
            (STEP_EXECUTION, &["sources", "question"]),
            (ANSWER_VERIFICATION, &["question", "answer", "context"]),
            (ATTRIBUTION, &["question", "answer", "context"]),
            (REFINE_QUESTION, &["trajectory", "question"]),
            (ANSWER_GENERATION, &["trajectory", "question"]),
            (ANSWER_EQUIVALENCE, &["question", "gold", "prediction"]),
        ];
        for (id, slots) in expect {
            let t = set.get(id).unwrap();
            assert_eq!(&t.placeholders(), slots, "{id}");
        }
        let plan = set.get(PLAN_GENERATION).unwrap();
        assert!(plan
            .body
            .contains("only choose an action from the list:[Retrieve, Answer]"));
        assert!(plan.body.contains("Don't output incomplete plan."));
    }

    #[test]
    fn directory_overrides_replace_defaults() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("answer_verification.txt"), "score {answer}").unwrap();
        let set = TemplateSet::with_overrides(dir.path()).unwrap();
        assert_eq!(set.get(ANSWER_VERIFICATION).unwrap().body, "score {answer}");
        assert!(set
            .get(PLAN_GENERATION)
            .unwrap()
            .body
            .contains("Strict JSON"));
        assert!(matches!(
            set.get("nope"),
            Err(TemplateError::UnknownTemplate(_))
        ));
    }
}
