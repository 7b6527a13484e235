//! Deterministic stand-in for the generator, judge and attribution models,
//! plus the small corpora the integration tests and fixtures use.

#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;
use std::sync::Arc;

use parrag_core::complexity::ComplexityProfiler;
use parrag_core::engine::{Engine, EngineSettings, Providers};
use parrag_core::exemplars::ExemplarStore;
use parrag_core::providers::{
    ChatProvider, ChatRequest, FnProvider, HashingEmbedder, ProviderError,
};
use parrag_core::retrieval::{parse_corpus, CorpusIndex};
use parrag_core::templates::TemplateSet;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixtures().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

/// Reader rule: when the query contains `query`, answer with `answer`
/// citing the first presented source containing `evidence`.
pub struct ReadRule {
    pub query: &'static str,
    pub evidence: &'static str,
    pub answer: &'static str,
}

pub struct Script {
    /// (question, plan JSON)
    pub plans: Vec<(&'static str, &'static str)>,
    pub reads: Vec<ReadRule>,
    /// (question, refined question)
    pub refinements: Vec<(&'static str, &'static str)>,
}

pub const NOT_FOUND: &str = "I could not find it.";

fn last_line_value<'a>(prompt: &'a str, prefix: &str) -> &'a str {
    prompt
        .lines()
        .rev()
        .find_map(|l| l.strip_prefix(prefix))
        .unwrap_or("")
        .trim()
}

fn sources(prompt: &str) -> Vec<String> {
    let body = prompt.rsplit("# Examples end.\n").next().unwrap_or("");
    let mut out: Vec<String> = Vec::new();
    for line in body.lines() {
        if line.starts_with("Query: ") {
            break;
        }
        let is_header = line
            .strip_prefix("Source ")
            .and_then(|r| r.strip_suffix(':'))
            .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()));
        if is_header {
            out.push(String::new());
        } else if let Some(last) = out.last_mut() {
            last.push_str(line);
            last.push('\n');
        }
    }
    out
}

fn strip_citations(text: &str) -> String {
    let mut out = String::new();
    let mut depth = 0;
    for c in text.chars() {
        match c {
            '[' => depth += 1,
            ']' if depth > 0 => depth -= 1,
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .trim_end_matches(['.', ' '])
        .to_owned()
}

impl Script {
    pub fn reply(&self, req: &ChatRequest) -> String {
        let p = &req.filled_prompt;
        match req.template_id.as_str() {
            "plan_generation" => {
                let q = last_line_value(p, "Question: ");
                self.plans
                    .iter()
                    .find(|(k, _)| *k == q)
                    .map(|(_, plan)| (*plan).to_owned())
                    .unwrap_or_else(|| {
                        serde_json::json!([{"Thought": "Look it up.", "Question": q, "Action": "Retrieve"}])
                            .to_string()
                    })
            }
            "step_execution" => {
                let q = last_line_value(p, "Query: ");
                let srcs = sources(p);
                for rule in self.reads.iter().filter(|r| q.contains(r.query)) {
                    if let Some(i) = srcs.iter().position(|s| s.contains(rule.evidence)) {
                        return rule.answer.replace("{n}", &(i + 1).to_string());
                    }
                }
                NOT_FOUND.to_owned()
            }
            "answer_verification" => {
                let a = last_line_value(p, "Answer: ");
                if a.contains('[') { "0.9" } else { "0.2" }.to_owned()
            }
            "attribution" => {
                let claim = last_line_value(p, "Claim: ");
                if claim.contains('[') {
                    "Attributable"
                } else {
                    "Contradictory"
                }
                .to_owned()
            }
            "refine_question" => {
                let q = last_line_value(p, "Question: ");
                self.refinements
                    .iter()
                    .find(|(k, _)| *k == q)
                    .map(|(_, r)| (*r).to_owned())
                    .unwrap_or_else(|| q.to_owned())
            }
            "answer_generation" => {
                let last = p
                    .split("Trajectories:\n")
                    .nth(1)
                    .and_then(|t| t.lines().rev().find_map(|l| l.strip_prefix("Answer: ")))
                    .unwrap_or("I don't know");
                format!("So the answer is: {}", strip_citations(last))
            }
            "answer_equivalence" => {
                let pred = last_line_value(p, "Predicted answer: ").to_lowercase();
                let gold = last_line_value(p, "Reference answers: ").to_lowercase();
                let hit = gold.split(" | ").any(|g| !g.is_empty() && pred.contains(g));
                if hit { "yes" } else { "no" }.to_owned()
            }
            other => panic!("unscripted template {other}"),
        }
    }

    pub fn provider(
        self: Arc<Self>,
    ) -> FnProvider<impl Fn(&ChatRequest) -> Result<String, ProviderError> + Send + Sync> {
        FnProvider::new("scripted", move |r: &ChatRequest| Ok(self.reply(r)))
    }
}

// Two-hop episode: step 1 is answered from dense retrieval, step 2's dense
// hits lack the birth record so verification fails and BM25 recovers it.

pub const EPISODE_QUESTION: &str = "Where was the director of Film X born?";

pub const EPISODE_PLAN: &str = r#"[{"Thought":"Find who directed the film.","Question":"Who directed Film X?","Action":"Retrieve"},{"Thought":"Find the birthplace of that director.","Question":"Where was the director of Film X born?","Action":"Retrieve"}]"#;

pub const EPISODE_CORPUS: &str = r#"{"id":"film-x","title":"Film X","text":"Film X is a drama directed by Anna Berg."}
{"id":"berg-birth","title":"Anna Berg biography","text":"Anna Berg was born in Oslo in 1961."}
{"id":"where-1","title":"Where was Anna Berg?","text":"Where was Anna Berg? Where was she? Where was Berg?"}
{"id":"where-2","title":"Where was it","text":"Where was it, Anna wondered. Where was Anna Berg going."}
{"id":"harbour","title":"Harbour","text":"The harbour was where ships were built and where trade was done."}
{"id":"festival","title":"Festival","text":"The festival was held where the river meets the sea."}
"#;

pub const EPISODE_EXEMPLARS: &str = r#"{"id":"ex-1a","hop_label":1,"question_text":"What year did the Tower open?","plan_json":"[{\"Thought\":\"Look up the opening.\",\"Question\":\"What year did the Tower open?\",\"Action\":\"Retrieve\"}]"}
{"id":"ex-2a","hop_label":2,"question_text":"Who founded the company that makes Widget Y?","plan_json":"[{\"Thought\":\"Find the maker.\",\"Question\":\"Which company makes Widget Y?\",\"Action\":\"Retrieve\"},{\"Thought\":\"Find the founder.\",\"Question\":\"Who founded that company?\",\"Action\":\"Retrieve\"}]"}
{"id":"ex-2b","hop_label":2,"question_text":"In which city was the author of Book Z born?","plan_json":"[{\"Thought\":\"Find the author.\",\"Question\":\"Who wrote Book Z?\",\"Action\":\"Retrieve\"},{\"Thought\":\"Find the birthplace.\",\"Question\":\"Where was that author born?\",\"Action\":\"Retrieve\"}]"}
{"id":"ex-3a","hop_label":3,"question_text":"What river flows through the capital of the country where Band Q formed?","plan_json":"[{\"Thought\":\"Find the country.\",\"Question\":\"Where did Band Q form?\",\"Action\":\"Retrieve\"},{\"Thought\":\"Find the capital.\",\"Question\":\"What is the capital of that country?\",\"Action\":\"Retrieve\"},{\"Thought\":\"Find the river.\",\"Question\":\"What river flows through that capital?\",\"Action\":\"Retrieve\"}]"}
{"id":"ex-4a","hop_label":4,"question_text":"Who coached the team whose stadium is in the birthplace of the architect of Hall W?","plan_json":"[{\"Thought\":\"Architect.\",\"Question\":\"Who designed Hall W?\",\"Action\":\"Retrieve\"},{\"Thought\":\"Birthplace.\",\"Question\":\"Where was the architect born?\",\"Action\":\"Retrieve\"},{\"Thought\":\"Team.\",\"Question\":\"Which team plays in that city?\",\"Action\":\"Retrieve\"},{\"Thought\":\"Coach.\",\"Question\":\"Who coached that team?\",\"Action\":\"Answer\"}]"}
"#;

pub fn episode_script() -> Script {
    Script {
        plans: vec![(EPISODE_QUESTION, EPISODE_PLAN)],
        reads: vec![
            ReadRule {
                query: "Who directed Film X",
                evidence: "directed by Anna Berg",
                answer: "Anna Berg [{n}].",
            },
            ReadRule {
                query: "Anna Berg born",
                evidence: "born in Oslo",
                answer: "Oslo [{n}].",
            },
        ],
        refinements: vec![(EPISODE_QUESTION, "Where was Anna Berg born?")],
    }
}

pub const EPISODE_TOP_K: usize = 2;

pub fn episode_settings() -> EngineSettings {
    let mut s = EngineSettings::default();
    s.retrieval.top_k = EPISODE_TOP_K;
    s
}

/// Engine over the episode corpus with every chat role served by `chat`.
pub fn episode_engine(chat: Arc<dyn ChatProvider>, settings: EngineSettings) -> Engine {
    let embedder = Arc::new(HashingEmbedder::default());
    let docs = parse_corpus(EPISODE_CORPUS).unwrap();
    let index = CorpusIndex::build(docs, Some(embedder.as_ref())).unwrap();
    let mut store = ExemplarStore::from_jsonl(EPISODE_EXEMPLARS).unwrap();
    store.embed_with(embedder.as_ref()).unwrap();
    Engine {
        settings,
        profiler: ComplexityProfiler::baseline(),
        exemplars: Some(Arc::new(store)),
        index: Arc::new(index),
        templates: Arc::new(TemplateSet::default()),
        providers: Providers::shared(chat, embedder),
    }
}

// Ten single-fact questions. Eight predictions match gold exactly, one
// carries extra words (EM 0, Acc 1) and one finds nothing (EM 0, Acc 0).

pub const BENCH_CORPUS: &str = r#"{"id":"c1","title":"Veltria","text":"The capital of Veltria is Osmund."}
{"id":"c2","title":"Lake Morrow","text":"Lake Morrow has a depth of 212 metres."}
{"id":"c3","title":"The Glass Orchard","text":"The Glass Orchard was written by Ines Calder."}
{"id":"c4","title":"Pell Bridge","text":"Pell Bridge opened in 1887."}
{"id":"c5","title":"Tamsin Rook","text":"Tamsin Rook plays the cello."}
{"id":"c6","title":"Mount Ferrow","text":"Mount Ferrow is 4,102 metres tall."}
{"id":"c7","title":"Harlan Vose","text":"Harlan Vose was born in Oslo, Norway."}
{"id":"c8","title":"Kestrel Line","text":"The Kestrel Line runs between Dunmore and Ashby."}
{"id":"c9","title":"Quillon Prize","text":"The Quillon Prize is awarded for poetry."}
{"id":"c10","title":"Brannock","text":"Brannock is a coastal town."}
"#;

pub const BENCH_DATASET: &str = r#"{"id":"b01","question":"What is the capital of Veltria?","gold_answers":["Osmund"]}
{"id":"b02","question":"How deep is Lake Morrow?","gold_answers":["212 metres"]}
{"id":"b03","question":"Who wrote The Glass Orchard?","gold_answers":["Ines Calder"]}
{"id":"b04","question":"When did Pell Bridge open?","gold_answers":["1887"]}
{"id":"b05","question":"Which instrument does Tamsin Rook play?","gold_answers":["cello","the cello"]}
{"id":"b06","question":"How tall is Mount Ferrow?","gold_answers":["4,102 metres"]}
{"id":"b07","question":"Where was Harlan Vose born?","gold_answers":["Oslo"]}
{"id":"b08","question":"Which towns does the Kestrel Line connect?","gold_answers":["Dunmore and Ashby"]}
{"id":"b09","question":"What is the Quillon Prize awarded for?","gold_answers":["poetry"]}
{"id":"b10","question":"What is the population of Brannock?","gold_answers":["3,400"]}
"#;

pub const BENCH_EM: f64 = 0.8;
pub const BENCH_ACC: f64 = 0.9;

pub fn bench_script() -> Script {
    Script {
        plans: vec![],
        reads: vec![
            ReadRule {
                query: "capital of Veltria",
                evidence: "capital of Veltria",
                answer: "Osmund [{n}].",
            },
            ReadRule {
                query: "Lake Morrow",
                evidence: "depth of 212",
                answer: "212 metres [{n}].",
            },
            ReadRule {
                query: "Glass Orchard",
                evidence: "written by",
                answer: "Ines Calder [{n}].",
            },
            ReadRule {
                query: "Pell Bridge",
                evidence: "opened in",
                answer: "1887 [{n}].",
            },
            ReadRule {
                query: "Tamsin Rook",
                evidence: "cello",
                answer: "The cello [{n}].",
            },
            ReadRule {
                query: "Mount Ferrow",
                evidence: "metres tall",
                answer: "4,102 metres [{n}].",
            },
            ReadRule {
                query: "Harlan Vose",
                evidence: "born in",
                answer: "Oslo, Norway [{n}].",
            },
            ReadRule {
                query: "Kestrel Line",
                evidence: "runs between",
                answer: "Dunmore and Ashby [{n}].",
            },
            ReadRule {
                query: "Quillon Prize",
                evidence: "awarded for",
                answer: "Poetry [{n}].",
            },
        ],
        refinements: vec![],
    }
}
