//! K-option speaker identification: evaluators see a line and pick who said it.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentificationTask {
    pub task_id: String,
    pub response: String,
    pub true_speaker: String,
    /// Shuffled with `seed`; contains the true speaker exactly once.
    pub options: Vec<String>,
    pub seed: u64,
    #[serde(default)]
    pub answer: Option<String>,
}

impl IdentificationTask {
    pub fn record_answer(&mut self, answer: &str) -> Result<(), EvalError> {
        if !self.options.iter().any(|o| o == answer) {
            return Err(EvalError::InvalidAnswer { task_id: self.task_id.clone(), answer: answer.to_string() });
        }
        self.answer = Some(answer.to_string());
        Ok(())
    }
}

/// Builds a task with `k` options: the true speaker plus the first `k - 1`
/// distinct decoys, shuffled by a ChaCha8 generator seeded with `seed`.
pub fn build_identification_task(
    task_id: &str,
    response: &str,
    true_speaker: &str,
    decoys: &[String],
    k: usize,
    seed: u64,
) -> Result<IdentificationTask, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidOptionCount(k));
    }
    let mut options = vec![true_speaker.to_string()];
    for d in decoys {
        if options.len() == k {
            break;
        }
        if !options.contains(d) {
            options.push(d.clone());
        }
    }
    if options.len() < k {
        return Err(EvalError::InsufficientDecoys { needed: k - 1, available: options.len() - 1 });
    }
    options.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(IdentificationTask {
        task_id: task_id.to_string(),
        response: response.to_string(),
        true_speaker: true_speaker.to_string(),
        options,
        seed,
        answer: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterScore {
    pub character: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Answered tasks whose true speaker is this character.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationScore {
    /// One entry per character that is a true speaker or an answer, sorted by
    /// name. Characters that were only ever answered have zero support.
    pub per_character: Vec<CharacterScore>,
    /// Unweighted mean of F1 over the true speakers (support above zero).
    pub macro_f1: f64,
    pub answered: usize,
    /// Tasks without an answer, skipped.
    pub unanswered: Vec<String>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Macro-averaged F1 over the set of true speakers among answered tasks.
pub fn score_identification(tasks: &[IdentificationTask]) -> Result<IdentificationScore, EvalError> {
    let mut unanswered = Vec::new();
    let mut pairs = Vec::new();
    for t in tasks {
        match &t.answer {
            Some(a) => pairs.push((t.true_speaker.as_str(), a.as_str())),
            None => unanswered.push(t.task_id.clone()),
        }
    }
    if pairs.is_empty() {
        return Err(EvalError::UnansweredTasks(unanswered.len()));
    }
    // (true positives, false positives, false negatives)
    let mut counts: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for (truth, answer) in &pairs {
        if truth == answer {
            counts.entry(truth).or_default().0 += 1;
        } else {
            counts.entry(truth).or_default().2 += 1;
            counts.entry(answer).or_default().1 += 1;
        }
    }
    let per_character: Vec<CharacterScore> = counts
        .into_iter()
        .map(|(character, (tp, fp, fn_))| {
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            CharacterScore { character: character.to_string(), precision, recall, f1, support: tp + fn_ }
        })
        .collect();
    let labels: Vec<&CharacterScore> = per_character.iter().filter(|c| c.support > 0).collect();
    let macro_f1 = labels.iter().map(|c| c.f1).sum::<f64>() / labels.len() as f64;
    Ok(IdentificationScore { per_character, macro_f1, answered: pairs.len(), unanswered })
}
