use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::persona::Persona;
use super::scenario::{Scenario, Situation};
use super::template::{placeholder_re, PromptKind, PromptTemplate};
use super::PromptError;
use crate::kg::{Triple, TripleKey};

/// Upper bound on rendered prompt length, in characters.
pub const MAX_PROMPT_CHARS: usize = 32_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "section", rename_all = "snake_case")]
pub enum Section {
    Instruction { text: String },
    SpeakerTriples { triples: Vec<Triple> },
    CounterpartTriples { triples: Vec<Triple> },
    Persona { name: String, traits: String },
    Scenario { text: String },
}

impl Section {
    fn placeholder(&self) -> &'static str {
        match self {
            Section::Instruction { .. } => "instruction",
            Section::SpeakerTriples { .. } => "speaker_triples",
            Section::CounterpartTriples { .. } => "counterpart_triples",
            Section::Persona { .. } => "persona",
            Section::Scenario { .. } => "scenario",
        }
    }
}

/// The ordered, renderable content of one prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub kind: PromptKind,
    pub game: String,
    pub template_version: String,
    pub scenario_id: String,
    pub speaker: String,
    pub counterpart: String,
    pub layout: String,
    pub sections: Vec<Section>,
}

impl PromptBundle {
    pub fn section(&self, placeholder: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.placeholder() == placeholder)
    }

    /// Every triple in the bundle, speaker section first.
    pub fn triples(&self) -> Vec<Triple> {
        self.sections
            .iter()
            .flat_map(|s| match s {
                Section::SpeakerTriples { triples } | Section::CounterpartTriples { triples } => triples.clone(),
                _ => Vec::new(),
            })
            .collect()
    }

    pub fn scenario_text(&self) -> &str {
        match self.section("scenario") {
            Some(Section::Scenario { text }) => text,
            _ => "",
        }
    }
}

fn sorted(triples: &[Triple], seen: &mut HashSet<TripleKey>) -> Vec<Triple> {
    let mut out: Vec<Triple> = triples.iter().filter(|t| seen.insert(t.key())).cloned().collect();
    out.sort_by(|a, b| (a.predicate().to_lowercase(), a.object()).cmp(&(b.predicate().to_lowercase(), b.object())));
    out
}

fn check_length(bundle: PromptBundle) -> Result<PromptBundle, PromptError> {
    let chars = render(&bundle).chars().count();
    if chars > MAX_PROMPT_CHARS {
        return Err(PromptError::TooLong { chars, limit: MAX_PROMPT_CHARS });
    }
    Ok(bundle)
}

/// Battle prompt: instruction, speaker triples, boss triples, situation.
pub fn assemble_battle_prompt(
    game: &str,
    speaker_triples: &[Triple],
    boss_triples: &[Triple],
    scenario: &Scenario,
    template: &PromptTemplate,
) -> Result<PromptBundle, PromptError> {
    let Situation::Battle { boss, .. } = &scenario.situation else {
        return Err(PromptError::WrongScenarioKind { expected: "battle", found: scenario.kind_name() });
    };
    if template.kind != PromptKind::Battle {
        return Err(PromptError::WrongScenarioKind { expected: "battle", found: "npc-interaction template" });
    }
    scenario.validate()?;
    if speaker_triples.is_empty() {
        return Err(PromptError::EmptySubgraph(scenario.speaker.clone()));
    }
    if boss_triples.is_empty() {
        return Err(PromptError::EmptySubgraph(boss.clone()));
    }
    let mut seen = HashSet::new();
    let speaker = sorted(speaker_triples, &mut seen);
    let counterpart = sorted(boss_triples, &mut seen);
    check_length(PromptBundle {
        kind: PromptKind::Battle,
        game: game.to_string(),
        template_version: template.version.clone(),
        scenario_id: scenario.id.clone(),
        speaker: scenario.speaker.clone(),
        counterpart: boss.clone(),
        layout: template.layout.clone(),
        sections: vec![
            Section::Instruction { text: template.instruction.clone() },
            Section::SpeakerTriples { triples: speaker },
            Section::CounterpartTriples { triples: counterpart },
            Section::Scenario { text: scenario.prompt_text() },
        ],
    })
}

/// NPC prompt: instruction, persona, NPC triples, the NPC's verbatim line.
pub fn assemble_npc_prompt(
    game: &str,
    persona: &Persona,
    npc_triples: &[Triple],
    scenario: &Scenario,
    template: &PromptTemplate,
) -> Result<PromptBundle, PromptError> {
    let Situation::NpcInteraction { npc, utterance, .. } = &scenario.situation else {
        return Err(PromptError::WrongScenarioKind { expected: "npc-interaction", found: scenario.kind_name() });
    };
    if template.kind != PromptKind::NpcInteraction {
        return Err(PromptError::WrongScenarioKind { expected: "npc-interaction", found: "battle template" });
    }
    scenario.validate()?;
    if !persona.game.eq_ignore_ascii_case(game) {
        return Err(PromptError::PersonaGameMismatch { persona: persona.name.clone(), game: game.to_string() });
    }
    if npc_triples.is_empty() {
        return Err(PromptError::EmptySubgraph(npc.clone()));
    }
    let triples = sorted(npc_triples, &mut HashSet::new());
    check_length(PromptBundle {
        kind: PromptKind::NpcInteraction,
        game: game.to_string(),
        template_version: template.version.clone(),
        scenario_id: scenario.id.clone(),
        speaker: scenario.speaker.clone(),
        counterpart: npc.clone(),
        layout: template.layout.clone(),
        sections: vec![
            Section::Instruction { text: template.instruction.clone() },
            Section::Persona { name: persona.name.clone(), traits: persona.traits.clone() },
            Section::CounterpartTriples { triples },
            Section::Scenario { text: utterance.clone() },
        ],
    })
}

fn substitute_names(text: &str, bundle: &PromptBundle) -> String {
    placeholder_re()
        .replace_all(text, |cap: &regex::Captures<'_>| match &cap[1] {
            "speaker" => bundle.speaker.clone(),
            "counterpart" => bundle.counterpart.clone(),
            _ => cap[0].to_string(),
        })
        .into_owned()
}

fn section_text(section: &Section, bundle: &PromptBundle) -> String {
    match section {
        Section::Instruction { text } => substitute_names(text.trim(), bundle),
        Section::SpeakerTriples { triples } | Section::CounterpartTriples { triples } => {
            triples.iter().map(Triple::to_string).collect::<Vec<_>>().join("\n")
        }
        Section::Persona { name, traits } => format!("Personality: {name}\n{}", traits.trim()),
        Section::Scenario { text } => text.clone(),
    }
}

/// Renders the bundle into prompt text. Pure: equal bundles give equal bytes.
pub fn render(bundle: &PromptBundle) -> String {
    let mut out = String::with_capacity(bundle.layout.len() * 2);
    let mut last = 0;
    for cap in placeholder_re().captures_iter(&bundle.layout) {
        let whole = cap.get(0).expect("match");
        out.push_str(&bundle.layout[last..whole.start()]);
        let name = &cap[1];
        match name {
            "speaker" => out.push_str(&bundle.speaker),
            "counterpart" => out.push_str(&bundle.counterpart),
            _ => {
                if let Some(section) = bundle.section(name) {
                    out.push_str(&section_text(section, bundle));
                }
            }
        }
        last = whole.end();
    }
    out.push_str(&bundle.layout[last..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::parse_triple;

    fn triples(lines: &[&str]) -> Vec<Triple> {
        lines.iter().map(|l| parse_triple(l).unwrap()).collect()
    }

    fn battle() -> PromptTemplate {
        PromptTemplate::builtin(PromptKind::Battle)
    }

    #[test]
    fn battle_sections_in_order() {
        let scenario = Scenario::battle(
            "ss-4",
            "Cloud",
            "Scorpion Sentinel",
            "[When Scorpion Sentinel first activates its Auto-Repair]",
        );
        let b = assemble_battle_prompt(
            "ffviir",
            &triples(&["(Cloud, has_personality, cold but tactical)"]),
            &triples(&["(Scorpion Sentinel, has_ability, Auto-Repair)"]),
            &scenario,
            &battle(),
        )
        .unwrap();
        let order: Vec<_> = b.sections.iter().map(Section::placeholder).collect();
        assert_eq!(order, ["instruction", "speaker_triples", "counterpart_triples", "scenario"]);
        let text = render(&b);
        let lines: Vec<_> = text.lines().filter(|l| l.starts_with('(')).collect();
        assert_eq!(lines, ["(Cloud, has_personality, cold but tactical)", "(Scorpion Sentinel, has_ability, Auto-Repair)"]);
        let pos = |needle: &str| text.find(needle).unwrap();
        assert!(pos("## Instruction") < pos("(Cloud,"));
        assert!(pos("(Cloud,") < pos("(Scorpion"));
        assert!(pos("(Scorpion") < pos("[When Scorpion"));
        assert!(text.contains("Use the given knowledge about the character and the boss"));
    }

    #[test]
    fn wrong_kind_and_empty_subgraph() {
        let npc = Scenario::npc("b", "Red", "Brock", "I'm BROCK!");
        let some = triples(&["(Cloud, has_personality, cold)"]);
        assert!(matches!(
            assemble_battle_prompt("ffviir", &some, &some, &npc, &battle()),
            Err(PromptError::WrongScenarioKind { .. })
        ));
        let fight = Scenario::battle("r", "Cloud", "Reno", "[When Reno uses EM Shot]");
        assert!(matches!(
            assemble_battle_prompt("ffviir", &some, &[], &fight, &battle()),
            Err(PromptError::EmptySubgraph(e)) if e == "Reno"
        ));
    }

    #[test]
    fn npc_prompt_embeds_utterance_verbatim() {
        let utterance = "I'm BROCK! I'm PEWTER's GYM LEADER! I believe in rock-hard defense and determination!";
        let personas = Persona::builtin();
        let talkative = Persona::find(&personas, "talkative").unwrap();
        let b = assemble_npc_prompt(
            "pokemon",
            talkative,
            &triples(&["(Brock, has_pokemon, Geodude)", "(Brock, has_pokemon, Onix)"]),
            &Scenario::npc("brock", "Red", "Brock", utterance),
            &PromptTemplate::builtin(PromptKind::NpcInteraction),
        )
        .unwrap();
        let text = render(&b);
        assert!(text.contains(utterance));
        assert!(text.contains("Personality: talkative"));
        assert!(text.contains("(Brock, has_pokemon, Geodude)\n(Brock, has_pokemon, Onix)"));
        assert!(!text.contains("{{"));
    }

    #[test]
    fn npc_prompt_errors() {
        let personas = Persona::builtin();
        let timid = Persona::find(&personas, "timid").unwrap();
        let npc = Scenario::npc("s", "Red", "Sabrina", "I had a vision of your arrival!");
        let template = PromptTemplate::builtin(PromptKind::NpcInteraction);
        assert!(matches!(
            assemble_npc_prompt("pokemon", timid, &[], &npc, &template),
            Err(PromptError::EmptySubgraph(_))
        ));
        let facts = triples(&["(Sabrina, has_pokemon, Mr. Mime)"]);
        assert!(matches!(
            assemble_npc_prompt("ffviir", timid, &facts, &npc, &template),
            Err(PromptError::PersonaGameMismatch { .. })
        ));
    }

    #[test]
    fn shared_triples_appear_once() {
        let shared = triples(&["(Cloud, has_relationship, Barret)"]);
        let b = assemble_battle_prompt(
            "ffviir",
            &shared,
            &[shared[0].clone(), parse_triple("(Reno, has_ability, EM Shot)").unwrap()],
            &Scenario::battle("r", "Cloud", "Reno", "[When Reno uses EM Shot]"),
            &battle(),
        )
        .unwrap();
        assert_eq!(render(&b).matches("(Cloud, has_relationship, Barret)").count(), 1);
    }

    #[test]
    fn oversized_prompt_is_rejected() {
        let huge = Triple::new("Cloud", "has_personality", "x".repeat(MAX_PROMPT_CHARS)).unwrap();
        let result = assemble_battle_prompt(
            "ffviir",
            &[huge],
            &triples(&["(Reno, has_ability, EM Shot)"]),
            &Scenario::battle("r", "Cloud", "Reno", "[When Reno uses EM Shot]"),
            &battle(),
        );
        assert!(matches!(result, Err(PromptError::TooLong { .. })));
    }
}
