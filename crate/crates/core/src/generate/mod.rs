//! Candidate generation against a pluggable backend and best-of-N selection.

mod backend;
mod http;
mod sample;
mod select;

use thiserror::Error;

pub use backend::{prompt_hash, BackendDescriptor, CompletionRequest, GenerationBackend, ScriptedBackend};
pub use http::{build_request, parse_response, ChatMessage, ChatRequest, HttpBackendConfig, HttpChatBackend};
pub use sample::{generate, Batch, CandidateOutcome, GeneratedResponse, DEFAULT_CANDIDATES};
pub use select::{select_best, CandidateScore, Selection, Strategy};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("no scripted fixture for prompt {prompt_hash} candidate {candidate}")]
    FixtureMissing { prompt_hash: String, candidate: usize },
    #[error("fixture file: {0}")]
    Fixture(String),
    #[error("candidate {candidate} came back empty after a retry")]
    EmptyCompletion { candidate: usize },
    #[error("candidate count must be at least 1")]
    InvalidCount,
    #[error("no candidates to select from")]
    EmptyCandidateList,
    #[error("{candidates} candidates but {annotations} annotations")]
    LengthMismatch { candidates: usize, annotations: usize },
    #[error("manual index {index} out of range for {len} candidates")]
    IndexOutOfRange { index: usize, len: usize },
}
