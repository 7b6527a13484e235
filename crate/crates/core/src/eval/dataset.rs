use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub question: String,
    pub gold_answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_refs: Option<Vec<String>>,
}

/// Source layout of a dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// JSONL of [`DatasetRecord`].
    Native,
    /// JSON array of `{_id, question, answer, supporting_facts?}`; also
    /// covers 2WikiMultiHopQA, which shares the layout.
    Hotpot,
    /// JSONL of `{id, question, answer, answer_aliases?}`.
    Musique,
    /// JSON `{Data: [{QuestionId, Question, Answer: {Value, Aliases}}]}`.
    TriviaQa,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "native" | "jsonl" => Ok(DatasetFormat::Native),
            "hotpotqa" | "hotpot" | "2wiki" | "2wikimultihopqa" => Ok(DatasetFormat::Hotpot),
            "musique" => Ok(DatasetFormat::Musique),
            "triviaqa" | "trivia" => Ok(DatasetFormat::TriviaQa),
            other => Err(Error::Dataset(format!("unknown dataset format {other:?}"))),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetFormat::Native => "native",
            DatasetFormat::Hotpot => "hotpotqa",
            DatasetFormat::Musique => "musique",
            DatasetFormat::TriviaQa => "triviaqa",
        })
    }
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<DatasetRecord>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_dataset(&text, format)
}

pub fn parse_dataset(input: &str, format: DatasetFormat) -> Result<Vec<DatasetRecord>> {
    let records = match format {
        DatasetFormat::Native => jsonl(input)?
            .into_iter()
            .map(|(line, v)| {
                serde_json::from_value::<DatasetRecord>(v)
                    .map_err(|e| Error::Dataset(format!("line {line}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?,
        DatasetFormat::Hotpot => {
            let rows: Vec<Value> = serde_json::from_str(input)
                .map_err(|e| Error::Dataset(format!("expected a JSON array: {e}")))?;
            rows.iter()
                .enumerate()
                .map(|(i, v)| {
                    let id =
                        str_field(v, &["_id", "id"]).unwrap_or_else(|| format!("row{}", i + 1));
                    let refs = v
                        .get("supporting_facts")
                        .and_then(Value::as_array)
                        .map(|facts| {
                            let mut titles: Vec<String> = facts
                                .iter()
                                .filter_map(|f| f.get(0).and_then(Value::as_str).map(str::to_owned))
                                .collect();
                            titles.dedup();
                            titles
                        });
                    record(id, v, vec![str_field(v, &["answer"])], refs, i + 1)
                })
                .collect::<Result<Vec<_>>>()?
        }
        DatasetFormat::Musique => jsonl(input)?
            .into_iter()
            .map(|(line, v)| {
                let id = str_field(&v, &["id"]).unwrap_or_else(|| format!("row{line}"));
                let mut gold = vec![str_field(&v, &["answer"])];
                gold.extend(string_list(&v, "answer_aliases").into_iter().map(Some));
                record(id, &v, gold, None, line)
            })
            .collect::<Result<Vec<_>>>()?,
        DatasetFormat::TriviaQa => {
            let root: Value = serde_json::from_str(input)
                .map_err(|e| Error::Dataset(format!("expected a JSON object: {e}")))?;
            let rows = root
                .get("Data")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Dataset("missing Data array".into()))?;
            rows.iter()
                .enumerate()
                .map(|(i, v)| {
                    let id =
                        str_field(v, &["QuestionId"]).unwrap_or_else(|| format!("row{}", i + 1));
                    let answer = v.get("Answer").cloned().unwrap_or(Value::Null);
                    let mut gold = vec![str_field(&answer, &["Value"])];
                    gold.extend(string_list(&answer, "Aliases").into_iter().map(Some));
                    let q = Value::Object(
                        [(
                            "question".to_owned(),
                            v.get("Question").cloned().unwrap_or(Value::Null),
                        )]
                        .into_iter()
                        .collect(),
                    );
                    record(id, &q, gold, None, i + 1)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    for r in &records {
        if r.gold_answers.is_empty() {
            return Err(Error::Dataset(format!(
                "record {} has no gold answers",
                r.id
            )));
        }
        if r.question.trim().is_empty() {
            return Err(Error::Dataset(format!(
                "record {} has an empty question",
                r.id
            )));
        }
    }
    Ok(records)
}

fn jsonl(input: &str) -> Result<Vec<(usize, Value)>> {
    input
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|v| (i + 1, v))
                .map_err(|e| Error::Dataset(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

fn str_field(v: &Value, keys: &[&str]) -> Option<String> {
    keys.iter().find_map(|k| match v.get(*k)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    })
}

fn string_list(v: &Value, key: &str) -> Vec<String> {
    v.get(key)
        .and_then(Value::as_array)
        .map(|a| {
            a.iter()
                .filter_map(Value::as_str)
                .map(str::to_owned)
                .collect()
        })
        .unwrap_or_default()
}

fn record(
    id: String,
    v: &Value,
    gold: Vec<Option<String>>,
    corpus_refs: Option<Vec<String>>,
    line: usize,
) -> Result<DatasetRecord> {
    let question = str_field(v, &["question"])
        .ok_or_else(|| Error::Dataset(format!("record {line}: missing question")))?;
    let mut gold_answers: Vec<String> = Vec::new();
    for g in gold.into_iter().flatten() {
        if !g.trim().is_empty() && !gold_answers.contains(&g) {
            gold_answers.push(g);
        }
    }
    Ok(DatasetRecord {
        id,
        question,
        gold_answers,
        corpus_refs,
    })
}
