use thiserror::Error;

use crate::complexity::ComplexityError;
use crate::domain::DomainError;
use crate::exemplars::ExemplarError;
use crate::planner::PlanningError;
use crate::providers::ProviderError;
use crate::retrieval::RetrievalError;
use crate::review::ReviewError;
use crate::templates::TemplateError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Complexity(#[from] ComplexityError),
    #[error(transparent)]
    Exemplar(#[from] ExemplarError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Planning(#[from] PlanningError),
    #[error(transparent)]
    Review(#[from] ReviewError),
    #[error("step {step}: {source}")]
    Step { step: usize, source: Box<Error> },
    #[error("config: {0}")]
    Config(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("{0}")]
    Io(String),
}

impl Error {
    pub(crate) fn at_step(step: usize, source: impl Into<Error>) -> Self {
        Error::Step {
            step,
            source: Box::new(source.into()),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
