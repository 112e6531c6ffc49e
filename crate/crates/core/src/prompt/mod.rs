//! Prompt assembly for battle lines and NPC replies.

mod bundle;
mod persona;
mod scenario;
mod template;

use thiserror::Error;

pub use bundle::{assemble_battle_prompt, assemble_npc_prompt, render, PromptBundle, Section, MAX_PROMPT_CHARS};
pub use persona::{parse_personas, Persona};
pub use scenario::{Scenario, ScenarioSet, Situation};
pub use template::{PromptKind, PromptTemplate, BUILTIN_BATTLE, BUILTIN_NPC};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("expected a {expected} scenario, got {found}")]
    WrongScenarioKind { expected: &'static str, found: &'static str },
    #[error("no knowledge triples for {0}")]
    EmptySubgraph(String),
    #[error("persona {persona} does not belong to game {game}")]
    PersonaGameMismatch { persona: String, game: String },
    #[error("unknown persona {0}")]
    UnknownPersona(String),
    #[error("scenario {id}: {reason}")]
    InvalidScenario { id: String, reason: String },
    #[error("scenario file: {0}")]
    ScenarioFile(String),
    #[error("template: {0}")]
    Template(String),
    #[error("rendered prompt has {chars} characters, limit is {limit}")]
    TooLong { chars: usize, limit: usize },
}
