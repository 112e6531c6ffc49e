use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::PromptError;

pub const BUILTIN_BATTLE: &str = include_str!("../../data/templates/battle.toml");
pub const BUILTIN_NPC: &str = include_str!("../../data/templates/npc.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptKind {
    Battle,
    NpcInteraction,
}

/// A versioned instruction plus the layout it is rendered into.
///
/// The layout uses `{{instruction}}`, `{{speaker_triples}}`,
/// `{{counterpart_triples}}`, `{{scenario}}` and `{{persona}}` for sections,
/// and `{{speaker}}` / `{{counterpart}}` for names. Names may also appear in
/// the instruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub version: String,
    pub kind: PromptKind,
    pub instruction: String,
    pub layout: String,
}

pub(crate) fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{\{\s*([A-Za-z_]+)\s*\}\}").expect("valid regex"))
}

const NAME_PLACEHOLDERS: [&str; 2] = ["speaker", "counterpart"];

impl PromptKind {
    /// Section placeholders a layout must contain, in order.
    pub fn section_order(self) -> &'static [&'static str] {
        match self {
            PromptKind::Battle => &["instruction", "speaker_triples", "counterpart_triples", "scenario"],
            PromptKind::NpcInteraction => &["instruction", "persona", "counterpart_triples", "scenario"],
        }
    }
}

impl PromptTemplate {
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let template: PromptTemplate = toml::from_str(text).map_err(|e| PromptError::Template(e.to_string()))?;
        template.check()?;
        Ok(template)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        let text = fs::read_to_string(path.as_ref())
            .map_err(|e| PromptError::Template(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    pub fn builtin(kind: PromptKind) -> Self {
        let text = match kind {
            PromptKind::Battle => BUILTIN_BATTLE,
            PromptKind::NpcInteraction => BUILTIN_NPC,
        };
        Self::parse(text).expect("bundled template is valid")
    }

    fn check(&self) -> Result<(), PromptError> {
        if self.version.trim().is_empty() {
            return Err(PromptError::Template("template version is empty".into()));
        }
        if self.instruction.trim().is_empty() {
            return Err(PromptError::Template("template instruction is empty".into()));
        }
        for cap in placeholder_re().captures_iter(&self.instruction) {
            if !NAME_PLACEHOLDERS.contains(&&cap[1]) {
                return Err(PromptError::Template(format!("instruction may not use {{{{{}}}}}", &cap[1])));
            }
        }
        let expected = self.kind.section_order();
        let mut found = Vec::new();
        for cap in placeholder_re().captures_iter(&self.layout) {
            let name = cap.get(1).expect("group").as_str();
            if NAME_PLACEHOLDERS.contains(&name) {
                continue;
            }
            if !expected.contains(&name) {
                return Err(PromptError::Template(format!(
                    "placeholder {{{{{name}}}}} is not allowed in a {:?} layout",
                    self.kind
                )));
            }
            found.push(name);
        }
        if found != expected {
            return Err(PromptError::Template(format!(
                "layout sections must be {expected:?} exactly once and in order, found {found:?}"
            )));
        }
        Ok(())
    }
}
