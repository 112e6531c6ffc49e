use serde::{Deserialize, Serialize};

use super::sample::GeneratedResponse;
use super::GenError;
use crate::grounding::GroundingAnnotation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "strategy", content = "index", rename_all = "snake_case")]
pub enum Strategy {
    /// Most words inside knowledge spans; ties go to the lower candidate index.
    Grounding,
    /// Operator-chosen position in the candidate list.
    Manual(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate_index: usize,
    pub knowledge_tokens: usize,
    pub situation_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    /// Position of the chosen candidate in the input list.
    pub chosen: usize,
    pub candidate_index: usize,
    pub strategy: Strategy,
    pub scores: Vec<CandidateScore>,
}

/// Picks one candidate. `annotations[i]` must annotate `candidates[i]`.
pub fn select_best(
    candidates: &[GeneratedResponse],
    annotations: &[GroundingAnnotation],
    strategy: Strategy,
) -> Result<Selection, GenError> {
    if candidates.is_empty() {
        return Err(GenError::EmptyCandidateList);
    }
    if candidates.len() != annotations.len() {
        return Err(GenError::LengthMismatch { candidates: candidates.len(), annotations: annotations.len() });
    }
    let scores: Vec<CandidateScore> = candidates
        .iter()
        .zip(annotations)
        .map(|(c, a)| CandidateScore {
            candidate_index: c.candidate_index,
            knowledge_tokens: a.knowledge_tokens,
            situation_tokens: a.situation_tokens,
        })
        .collect();
    let chosen = match strategy {
        Strategy::Manual(index) if index < candidates.len() => index,
        Strategy::Manual(index) => return Err(GenError::IndexOutOfRange { index, len: candidates.len() }),
        Strategy::Grounding => best_by_knowledge(&scores),
    };
    Ok(Selection { chosen, candidate_index: candidates[chosen].candidate_index, strategy, scores })
}

fn best_by_knowledge(scores: &[CandidateScore]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        let current = &scores[best];
        if s.knowledge_tokens > current.knowledge_tokens
            || (s.knowledge_tokens == current.knowledge_tokens && s.candidate_index < current.candidate_index)
        {
            best = i;
        }
    }
    best
}
