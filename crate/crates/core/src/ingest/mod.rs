//! Turning saved profile pages into curated knowledge-graph triples.

mod llm;
mod profile;
mod queue;
mod rules;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generate::GenError;
use crate::kg::ValidationError;

pub use llm::{extract_triples_llm, extraction_prompt, ExtractionReport, EXTRACTION_TEMPLATE_VERSION};
pub use profile::{parse_profile_page, EntityProfile, ParsedProfile, Section, DESCRIPTION_SECTION};
pub use queue::{CandidateTriple, CurationQueue, Decision, Extractor, PromotionReport, Status};
pub use rules::{extract_triples_pattern, Rule, RuleKind, RuleSet};

/// Recoverable conditions reported alongside a result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum IngestWarning {
    /// The page had no headings; its whole body is the `description` section.
    NoSections,
    /// None of the returned lines parsed as a triple.
    AllLinesMalformed { lines: usize },
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("document has no text")]
    EmptyDocument,
    #[error("entity id is empty")]
    EmptyEntity,
    #[error("rule line {line}: {reason}")]
    InvalidRule { line: usize, reason: String },
    #[error("no candidate with id {0}")]
    UnknownCandidate(usize),
    #[error("candidate {id} is already {status}")]
    AlreadyDecided { id: usize, status: Status },
    #[error("candidate {id} cannot be accepted: {source}")]
    ValidationFailedOnAccept { id: usize, source: ValidationError },
    #[error("queue line {line}: {reason}")]
    CorruptQueue { line: usize, reason: String },
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
