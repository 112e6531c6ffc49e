use serde::{Deserialize, Serialize};

use super::PromptError;

const BUNDLED_PERSONAS: &str = include_str!("../../data/personas.toml");

/// A named personality injected into NPC-interaction prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub key: String,
    pub name: String,
    pub game: String,
    pub traits: String,
}

#[derive(Deserialize)]
struct PersonaFile {
    persona: Vec<Persona>,
}

impl Persona {
    /// The five shipped personalities: mature Pokémon trainer, amateur Pokémon
    /// trainer, talkative, timid, confident.
    pub fn builtin() -> Vec<Persona> {
        parse_personas(BUNDLED_PERSONAS).expect("bundled persona file is valid")
    }

    /// Looks a persona up by key or display name, case-insensitively.
    pub fn find<'a>(personas: &'a [Persona], name: &str) -> Result<&'a Persona, PromptError> {
        personas
            .iter()
            .find(|p| p.key.eq_ignore_ascii_case(name) || p.name.to_lowercase() == name.to_lowercase())
            .ok_or_else(|| PromptError::UnknownPersona(name.to_string()))
    }
}

pub fn parse_personas(text: &str) -> Result<Vec<Persona>, PromptError> {
    let file: PersonaFile = toml::from_str(text).map_err(|e| PromptError::Template(e.to_string()))?;
    for p in &file.persona {
        if p.key.trim().is_empty() || p.name.trim().is_empty() || p.traits.trim().is_empty() {
            return Err(PromptError::Template(format!("persona {:?} has an empty field", p.key)));
        }
    }
    Ok(file.persona)
}
