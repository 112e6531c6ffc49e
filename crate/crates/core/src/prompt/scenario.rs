use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PromptError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Situation {
    Battle {
        boss: String,
        situation: String,
        /// Free-text party notes such as "Barret: health is very low".
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        party_state: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        boss_health: Option<u8>,
    },
    NpcInteraction {
        npc: String,
        /// The NPC's line, kept byte for byte.
        utterance: String,
        /// Persona key used by batch runs.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        persona: Option<String>,
    },
}

/// A battle state or an NPC line that the generated dialogue responds to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    /// The character who speaks the generated line.
    pub speaker: String,
    #[serde(flatten)]
    pub situation: Situation,
}

impl Scenario {
    pub fn battle(id: &str, speaker: &str, boss: &str, situation: &str) -> Self {
        Self {
            id: id.into(),
            speaker: speaker.into(),
            situation: Situation::Battle {
                boss: boss.into(),
                situation: situation.into(),
                party_state: Vec::new(),
                boss_health: None,
            },
        }
    }

    pub fn npc(id: &str, speaker: &str, npc: &str, utterance: &str) -> Self {
        Self {
            id: id.into(),
            speaker: speaker.into(),
            situation: Situation::NpcInteraction { npc: npc.into(), utterance: utterance.into(), persona: None },
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.situation {
            Situation::Battle { .. } => "battle",
            Situation::NpcInteraction { .. } => "npc-interaction",
        }
    }

    /// The boss or NPC the speaker is facing.
    pub fn counterpart(&self) -> &str {
        match &self.situation {
            Situation::Battle { boss, .. } => boss,
            Situation::NpcInteraction { npc, .. } => npc,
        }
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        let invalid = |reason: &str| PromptError::InvalidScenario { id: self.id.clone(), reason: reason.into() };
        if self.id.trim().is_empty() {
            return Err(invalid("empty id"));
        }
        if self.speaker.trim().is_empty() {
            return Err(invalid("empty speaker"));
        }
        match &self.situation {
            Situation::Battle { boss, situation, boss_health, .. } => {
                if boss.trim().is_empty() || situation.trim().is_empty() {
                    return Err(invalid("battle needs a boss and situation text"));
                }
                if boss_health.is_some_and(|h| h > 100) {
                    return Err(invalid("boss health must be within 0..=100"));
                }
            }
            Situation::NpcInteraction { npc, utterance, .. } => {
                if npc.trim().is_empty() || utterance.trim().is_empty() {
                    return Err(invalid("npc interaction needs an npc and an utterance"));
                }
            }
        }
        Ok(())
    }

    /// Text placed in the prompt's scenario section.
    pub fn prompt_text(&self) -> String {
        match &self.situation {
            Situation::Battle { situation, party_state, boss_health, .. } => {
                let mut lines = vec![situation.trim().to_string()];
                lines.extend(party_state.iter().map(|n| format!("Party: {}", n.trim())));
                if let Some(h) = boss_health {
                    lines.push(format!("Boss health: {h}%"));
                }
                lines.join("\n")
            }
            Situation::NpcInteraction { utterance, .. } => utterance.clone(),
        }
    }
}

/// A scenario file: `{"game": ..., "scenarios": [...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub game: String,
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let set: ScenarioSet = serde_json::from_str(text).map_err(|e| PromptError::ScenarioFile(e.to_string()))?;
        let mut seen = std::collections::HashSet::new();
        for s in &set.scenarios {
            s.validate()?;
            if !seen.insert(s.id.as_str()) {
                return Err(PromptError::InvalidScenario { id: s.id.clone(), reason: "duplicate id".into() });
            }
        }
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        let text = fs::read_to_string(path.as_ref())
            .map_err(|e| PromptError::ScenarioFile(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }
}
