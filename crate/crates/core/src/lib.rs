//! Plan-then-act-and-review retrieval-augmented generation for multi-hop
//! question answering.
//!
//! A query flows through the crate in a fixed order:
//!
//! 1. [`complexity`] extracts linguistic features and predicts a hop label.
//! 2. [`exemplars`] picks plan demonstrations with a matching hop label.
//! 3. [`planner`] renders the plan prompt, calls the generator and parses
//!    the strict-JSON plan.
//! 4. [`engine`] executes each step: dense retrieval, cited reading, dual
//!    verification ([`review`]), sparse fallback, question refinement, and
//!    finally answer generation over the accumulated trajectory.
//! 5. [`eval`] drives whole datasets through the engine and aggregates
//!    EM / Acc / RTPQ / CTPQ, plus the verifier hyperparameter sweep.
//!
//! Every model-backed capability sits behind [`providers`], which also ships
//! a fingerprinted record/replay implementation so full episodes run offline
//! and byte-reproducibly.

pub mod citations;
pub mod complexity;
pub mod config;
pub mod domain;
pub mod engine;
pub mod error;
pub mod eval;
pub mod exemplars;
pub mod planner;
pub mod providers;
pub mod retrieval;
pub mod review;
pub mod templates;
pub mod text;

pub use domain::{
    Action, Citation, CitationSet, ConfidenceReport, Document, HopLabel, IntermediateAnswer, Plan,
    PlanStep, Question, QuestionOrigin, TrajectoryRecord, VerifierConfig,
};
pub use engine::{Ablation, Engine, EngineSettings, QueryResult};
pub use error::{Error, Result};
