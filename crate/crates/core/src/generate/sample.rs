use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::backend::{prompt_hash, BackendDescriptor, CompletionRequest, GenerationBackend};
use super::GenError;
use crate::clock::Clock;
use crate::prompt::{render, PromptBundle};

/// Default number of candidates sampled per prompt.
pub const DEFAULT_CANDIDATES: usize = 5;

/// One sampled line of dialogue with full provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedResponse {
    pub id: String,
    pub text: String,
    pub scenario_id: String,
    /// Hash of the exact prompt bytes.
    pub prompt_hash: String,
    pub template_version: String,
    pub candidate_index: usize,
    pub batch_size: usize,
    pub backend: BackendDescriptor,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CandidateOutcome {
    Response(GeneratedResponse),
    Failed { candidate_index: usize, error: String },
}

/// The candidates sampled for one prompt, in candidate-index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub scenario_id: String,
    pub prompt_hash: String,
    pub template_version: String,
    pub outcomes: Vec<CandidateOutcome>,
}

impl Batch {
    pub fn responses(&self) -> Vec<&GeneratedResponse> {
        self.outcomes
            .iter()
            .filter_map(|o| match o {
                CandidateOutcome::Response(r) => Some(r),
                CandidateOutcome::Failed { .. } => None,
            })
            .collect()
    }

    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| matches!(o, CandidateOutcome::Failed { .. })).count()
    }
}

fn call_with_retry(backend: &dyn GenerationBackend, request: &CompletionRequest<'_>) -> Result<String, GenError> {
    match backend.complete(request) {
        Err(GenError::Transport(_)) | Err(GenError::Protocol(_)) => backend.complete(request).map_err(|e| match e {
            GenError::Transport(m) | GenError::Protocol(m) => GenError::BackendUnavailable(m),
            other => other,
        }),
        other => other,
    }
}

/// Samples `n` candidates for the bundle, sequentially.
///
/// Transport failures and empty completions are retried once. A slot that is
/// still empty is recorded as a failed outcome; a second transport failure or
/// a missing fixture aborts the batch.
pub fn generate(
    bundle: &PromptBundle,
    n: usize,
    backend: &dyn GenerationBackend,
    clock: &dyn Clock,
) -> Result<Batch, GenError> {
    if n == 0 {
        return Err(GenError::InvalidCount);
    }
    let prompt = render(bundle);
    let hash = prompt_hash(&prompt);
    let mut outcomes = Vec::with_capacity(n);
    for candidate_index in 0..n {
        let request = CompletionRequest { prompt: &prompt, prompt_hash: &hash, candidate_index };
        let mut text = call_with_retry(backend, &request)?;
        if text.trim().is_empty() {
            text = call_with_retry(backend, &request)?;
        }
        let text = text.trim().to_string();
        if text.is_empty() {
            outcomes.push(CandidateOutcome::Failed {
                candidate_index,
                error: GenError::EmptyCompletion { candidate: candidate_index }.to_string(),
            });
            continue;
        }
        outcomes.push(CandidateOutcome::Response(GeneratedResponse {
            id: format!("{}-{}-c{candidate_index}", bundle.scenario_id, &hash[..12]),
            text,
            scenario_id: bundle.scenario_id.clone(),
            prompt_hash: hash.clone(),
            template_version: bundle.template_version.clone(),
            candidate_index,
            batch_size: n,
            backend: backend.descriptor(),
            timestamp: clock.now(),
        }));
    }
    Ok(Batch {
        scenario_id: bundle.scenario_id.clone(),
        prompt_hash: hash,
        template_version: bundle.template_version.clone(),
        outcomes,
    })
}
