use std::collections::HashSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EvalError, EvalWarning};
use crate::clock::Clock;

/// Lowest and highest slider positions.
pub const MIN_SCORE: f64 = 1.0;
pub const MAX_SCORE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatementId {
    S1,
    S2,
}

impl StatementId {
    pub const ALL: [StatementId; 2] = [StatementId::S1, StatementId::S2];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::S1 => "s1",
            Self::S2 => "s2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub id: StatementId,
    pub text: String,
}

/// The two statements evaluators agree or disagree with.
pub fn statements_for(speaker: &str) -> [Statement; 2] {
    [
        Statement {
            id: StatementId::S1,
            text: format!("{speaker}'s response adequately expresses {speaker}'s personality"),
        },
        Statement { id: StatementId::S2, text: format!("{speaker}'s response is reasonable and fits in conversation") },
    ]
}

/// One response to rate, with everything the evaluator needs to judge it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignItem {
    pub response_id: String,
    pub speaker: String,
    pub persona_key: String,
    /// Persona description shown to the evaluator.
    pub persona: String,
    pub counterpart: String,
    /// Situation or utterance the response answers.
    pub context: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalTask {
    pub task_id: String,
    pub response_id: String,
    pub speaker: String,
    pub persona_key: String,
    pub persona: String,
    pub counterpart: String,
    pub context: String,
    pub response: String,
    pub statements: [Statement; 2],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Campaign {
    pub id: String,
    pub created: DateTime<Utc>,
    pub tasks: Vec<EvalTask>,
}

impl Campaign {
    pub fn task(&self, task_id: &str) -> Option<&EvalTask> {
        self.tasks.iter().find(|t| t.task_id == task_id)
    }
}

/// Task ids are derived from the response id so they survive re-creation.
pub fn task_id_for(response_id: &str) -> String {
    let digest = hex::encode(Sha256::digest(response_id.as_bytes()));
    format!("t-{}", &digest[..12])
}

fn check_item(item: &CampaignItem) -> Result<(), EvalError> {
    let fields = [
        ("response_id", &item.response_id),
        ("speaker", &item.speaker),
        ("persona_key", &item.persona_key),
        ("persona", &item.persona),
        ("counterpart", &item.counterpart),
        ("context", &item.context),
        ("response", &item.response),
    ];
    for (field, value) in fields {
        if value.trim().is_empty() {
            return Err(EvalError::MissingMetadata { response_id: item.response_id.clone(), field });
        }
    }
    Ok(())
}

/// Builds one task per item, keeping input order.
pub fn create_campaign(
    id: &str,
    items: &[CampaignItem],
    clock: &dyn Clock,
) -> Result<(Campaign, Vec<EvalWarning>), EvalError> {
    if id.trim().is_empty() || id.contains(['/', '\\']) {
        return Err(EvalError::InvalidCampaignId(id.to_string()));
    }
    let mut seen = HashSet::new();
    let mut tasks = Vec::with_capacity(items.len());
    for item in items {
        check_item(item)?;
        if !seen.insert(item.response_id.as_str()) {
            return Err(EvalError::DuplicateTask(item.response_id.clone()));
        }
        tasks.push(EvalTask {
            task_id: task_id_for(&item.response_id),
            response_id: item.response_id.clone(),
            speaker: item.speaker.clone(),
            persona_key: item.persona_key.clone(),
            persona: item.persona.clone(),
            counterpart: item.counterpart.clone(),
            context: item.context.clone(),
            response: item.response.clone(),
            statements: statements_for(&item.speaker),
        });
    }
    let warnings = if tasks.is_empty() { vec![EvalWarning::EmptyCampaign] } else { Vec::new() };
    Ok((Campaign { id: id.to_string(), created: clock.now(), tasks }, warnings))
}

/// A stored judgment of one task by one evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub task_id: String,
    pub evaluator: String,
    pub s1: f64,
    pub s2: f64,
    pub timestamp: DateTime<Utc>,
}

impl Rating {
    pub fn score(&self, statement: StatementId) -> f64 {
        match statement {
            StatementId::S1 => self.s1,
            StatementId::S2 => self.s2,
        }
    }
}

/// Checks a slider value: within [1, 5] and on a half step.
pub fn check_score(statement: StatementId, value: f64) -> Result<(), EvalError> {
    if !value.is_finite() || !(MIN_SCORE..=MAX_SCORE).contains(&value) {
        return Err(EvalError::ScoreOutOfRange { statement, value });
    }
    if (value * 2.0).fract() != 0.0 {
        return Err(EvalError::ScoreNotHalfStep { statement, value });
    }
    Ok(())
}
