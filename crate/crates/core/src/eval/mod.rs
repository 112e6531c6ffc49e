//! Human evaluation campaigns: tasks, ratings, statistics and speaker
//! identification.

mod campaign;
mod ident;
mod stats;
mod store;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use campaign::{
    check_score, create_campaign, statements_for, task_id_for, Campaign, CampaignItem, EvalTask, Rating, Statement,
    StatementId, MAX_SCORE, MIN_SCORE,
};
pub use ident::{build_identification_task, score_identification, CharacterScore, IdentificationScore, IdentificationTask};
pub use stats::{
    bin_of, compute_stats, export_csv, rank_personas, CampaignStats, Histograms, PersonaMeans, PersonaRanking,
    RankedPersona, ResponseMeans, BIN_EDGES, BIN_LABELS,
};
pub use store::{CampaignStore, Progress, Record};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum EvalWarning {
    EmptyCampaign,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("response {response_id} has no {field}")]
    MissingMetadata { response_id: String, field: &'static str },
    #[error("response {0} appears twice")]
    DuplicateTask(String),
    #[error("invalid campaign id {0:?}")]
    InvalidCampaignId(String),
    #[error("campaign already exists at {0}")]
    CampaignExists(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("invalid evaluator id {0:?}")]
    InvalidEvaluator(String),
    #[error("{evaluator} already rated {task_id}")]
    DuplicateRating { task_id: String, evaluator: String },
    #[error("{} score {value} is outside 1.0 to 5.0", statement.as_str())]
    ScoreOutOfRange { statement: StatementId, value: f64 },
    #[error("{} score {value} is not a multiple of 0.5", statement.as_str())]
    ScoreNotHalfStep { statement: StatementId, value: f64 },
    #[error("no ratings yet")]
    NoRatings,
    #[error("need {needed} distinct decoys, got {available}")]
    InsufficientDecoys { needed: usize, available: usize },
    #[error("identification tasks need at least 2 options, got {0}")]
    InvalidOptionCount(usize),
    #[error("{answer:?} is not an option of task {task_id}")]
    InvalidAnswer { task_id: String, answer: String },
    #[error("no answered tasks ({0} unanswered)")]
    UnansweredTasks(usize),
    #[error("campaign log line {line}: {reason}")]
    CorruptStore { line: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl EvalError {
    /// Stable machine-readable name, used in HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Self::MissingMetadata { .. } => "MissingMetadata",
            Self::DuplicateTask(_) => "DuplicateTask",
            Self::InvalidCampaignId(_) => "InvalidCampaignId",
            Self::CampaignExists(_) => "CampaignExists",
            Self::UnknownTask(_) => "UnknownTask",
            Self::InvalidEvaluator(_) => "InvalidEvaluator",
            Self::DuplicateRating { .. } => "DuplicateRating",
            Self::ScoreOutOfRange { .. } => "ScoreOutOfRange",
            Self::ScoreNotHalfStep { .. } => "ScoreNotHalfStep",
            Self::NoRatings => "NoRatings",
            Self::InsufficientDecoys { .. } => "InsufficientDecoys",
            Self::InvalidOptionCount(_) => "InvalidOptionCount",
            Self::InvalidAnswer { .. } => "InvalidAnswer",
            Self::UnansweredTasks(_) => "UnansweredTasks",
            Self::CorruptStore { .. } => "CorruptStore",
            Self::Csv(_) => "Csv",
            Self::Io(_) => "Io",
        }
    }
}
