#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeMap;
use std::path::PathBuf;

use kgdf_core::kg::{self, Depth, KnowledgeGraph, Triple};
use kgdf_core::prompt::{
    assemble_battle_prompt, assemble_npc_prompt, Persona, PromptKind, PromptTemplate, ScenarioSet, Situation,
};

pub fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

/// One scenario of the shipped fixtures with the texts scripted for it.
pub struct CorpusItem {
    pub scenario_id: String,
    pub triples: Vec<Triple>,
    pub scenario_text: String,
    pub responses: Vec<String>,
}

fn script(rel: &str) -> BTreeMap<String, Vec<String>> {
    serde_json::from_str(&std::fs::read_to_string(data(rel)).unwrap()).unwrap()
}

fn items(set: &ScenarioSet, kg: &KnowledgeGraph, script: &BTreeMap<String, Vec<String>>) -> Vec<CorpusItem> {
    let personas = Persona::builtin();
    set.scenarios
        .iter()
        .map(|s| {
            let bundle = match &s.situation {
                Situation::Battle { boss, .. } => assemble_battle_prompt(
                    &set.game,
                    &kg.subgraph(&s.speaker, Depth::One).unwrap(),
                    &kg.subgraph(boss, Depth::One).unwrap(),
                    s,
                    &PromptTemplate::builtin(PromptKind::Battle),
                ),
                Situation::NpcInteraction { npc, persona, .. } => assemble_npc_prompt(
                    &set.game,
                    Persona::find(&personas, persona.as_deref().unwrap()).unwrap(),
                    &kg.subgraph(npc, Depth::One).unwrap(),
                    s,
                    &PromptTemplate::builtin(PromptKind::NpcInteraction),
                ),
            }
            .unwrap();
            CorpusItem {
                scenario_id: s.id.clone(),
                triples: bundle.triples(),
                scenario_text: bundle.scenario_text().to_string(),
                responses: script[&s.id].clone(),
            }
        })
        .collect()
}

/// The battle corpus and the persona corpus.
pub fn corpus() -> Vec<CorpusItem> {
    let ffviir = kg::load(data("kg/ffviir.kg")).unwrap();
    let pokemon = kg::load(data("kg/pokemon.kg")).unwrap();
    let battles = ScenarioSet::load(data("scenarios/battles.json")).unwrap();
    let personas = ScenarioSet::load(data("scenarios/personas.json")).unwrap();
    let mut out = items(&battles, &ffviir, &script("fixtures/battles.script.json"));
    out.extend(items(&personas, &pokemon, &script("fixtures/personas.script.json")));
    out
}
