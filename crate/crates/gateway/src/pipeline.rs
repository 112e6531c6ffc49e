//! Batch run: subgraph, assemble, generate, annotate and select for every
//! scenario of a scenario file, persisted as plain files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use kgdf_core::clock::Clock;
use kgdf_core::eval::CampaignItem;
use kgdf_core::generate::{
    generate, prompt_hash, select_best, CandidateOutcome, GeneratedResponse, GenerationBackend, Selection, Strategy,
};
use kgdf_core::grounding::{annotate, build_knowledge_lexicon, build_situation_lexicon, GroundingAnnotation};
use kgdf_core::kg::{Depth, KnowledgeGraph, Triple};
use kgdf_core::prompt::{
    assemble_battle_prompt, assemble_npc_prompt, render, Persona, PromptBundle, PromptError, PromptKind,
    PromptTemplate, Scenario, ScenarioSet, Situation,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROMPTS_DIR: &str = "prompts";
pub const RESPONSES_FILE: &str = "responses.jsonl";
pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const SELECTIONS_FILE: &str = "selections.jsonl";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no knowledge graph configured for game {0}")]
    NoGraph(String),
    #[error("scenario {0} has no scripted responses")]
    MissingScript(String),
    #[error("scenario {id}: {message}")]
    Scenario { id: String, message: String },
    #[error("cannot build worker pool: {0}")]
    Pool(String),
    #[error("{path}: {message}")]
    Record { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Everything a run needs besides the scenarios and the backend.
#[derive(Debug, Clone)]
pub struct PipelineContext {
    pub graphs: BTreeMap<String, KnowledgeGraph>,
    pub battle_template: PromptTemplate,
    pub npc_template: PromptTemplate,
    pub personas: Vec<Persona>,
    pub candidates: usize,
    pub parallelism: usize,
    pub depth: Depth,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Subgraph,
    Assemble,
    Generate,
    Annotate,
    Select,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioFailure {
    pub scenario_id: String,
    pub stage: Stage,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedCandidate {
    pub scenario_id: String,
    pub candidate_index: usize,
    pub error: String,
}

/// Counts per stage plus every failure. Contains no timestamps, so two runs
/// over the same inputs produce the same report.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub game: String,
    pub scenarios: usize,
    pub prompts: usize,
    pub responses: usize,
    pub annotations: usize,
    pub selections: usize,
    pub failed_candidates: Vec<FailedCandidate>,
    pub failures: Vec<ScenarioFailure>,
}

impl RunReport {
    pub fn succeeded(&self) -> usize {
        self.scenarios - self.failures.len()
    }

    /// Process exit code: nonzero iff a scenario failed.
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub response_id: String,
    pub scenario_id: String,
    pub text: String,
    pub annotation: GroundingAnnotation,
}

/// The chosen candidate for one scenario, with the metadata an evaluation
/// task needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub scenario_id: String,
    pub kind: String,
    pub speaker: String,
    pub counterpart: String,
    /// Persona key for NPC scenarios; the speaker for battles.
    pub persona_key: String,
    pub persona: String,
    pub context: String,
    pub prompt_hash: String,
    pub template_version: String,
    pub response_id: String,
    pub response: String,
    pub selection: Selection,
}

impl SelectionRecord {
    pub fn campaign_item(&self) -> CampaignItem {
        CampaignItem {
            response_id: self.response_id.clone(),
            speaker: self.speaker.clone(),
            persona_key: self.persona_key.clone(),
            persona: self.persona.clone(),
            counterpart: self.counterpart.clone(),
            context: self.context.clone(),
            response: self.response.clone(),
        }
    }
}

/// Campaign items for every stored response (not only the selected ones),
/// taking scenario metadata from the selections.
pub fn campaign_items_from_responses(
    responses: &[GeneratedResponse],
    selections: &[SelectionRecord],
) -> Result<Vec<CampaignItem>, PipelineError> {
    let by_scenario: BTreeMap<&str, &SelectionRecord> =
        selections.iter().map(|s| (s.scenario_id.as_str(), s)).collect();
    responses
        .iter()
        .map(|r| {
            let s = by_scenario.get(r.scenario_id.as_str()).ok_or_else(|| PipelineError::Scenario {
                id: r.scenario_id.clone(),
                message: "no selection record for this scenario".into(),
            })?;
            let mut item = s.campaign_item();
            item.response_id = r.id.clone();
            item.response = r.text.clone();
            Ok(item)
        })
        .collect()
}

struct Prepared {
    bundle: PromptBundle,
    persona_key: String,
    persona: String,
}

struct ScenarioOutput {
    prompt: Option<(String, String)>,
    responses: Vec<GeneratedResponse>,
    failed: Vec<FailedCandidate>,
    annotations: Vec<AnnotationRecord>,
    selection: Option<SelectionRecord>,
    failure: Option<ScenarioFailure>,
}

impl ScenarioOutput {
    fn failed(scenario: &Scenario, stage: Stage, error: impl ToString) -> Self {
        ScenarioOutput {
            prompt: None,
            responses: Vec::new(),
            failed: Vec::new(),
            annotations: Vec::new(),
            selection: None,
            failure: Some(ScenarioFailure { scenario_id: scenario.id.clone(), stage, error: error.to_string() }),
        }
    }
}

fn personality(triples: &[Triple]) -> Option<String> {
    let traits: Vec<&str> =
        triples.iter().filter(|t| t.predicate().eq_ignore_ascii_case("has_personality")).map(|t| t.object()).collect();
    (!traits.is_empty()).then(|| traits.join(", "))
}

impl PipelineContext {
    pub fn graph(&self, game: &str) -> Result<&KnowledgeGraph, PipelineError> {
        self.graphs.get(game).ok_or_else(|| PipelineError::NoGraph(game.to_string()))
    }

    pub fn template(&self, kind: PromptKind) -> &PromptTemplate {
        match kind {
            PromptKind::Battle => &self.battle_template,
            PromptKind::NpcInteraction => &self.npc_template,
        }
    }

    fn prepare(&self, kg: &KnowledgeGraph, scenario: &Scenario) -> Result<Prepared, (Stage, String)> {
        let subgraph = |entity: &str| kg.subgraph(entity, self.depth).map_err(|e| (Stage::Subgraph, e.to_string()));
        let assemble = |e: PromptError| (Stage::Assemble, e.to_string());
        match &scenario.situation {
            Situation::Battle { boss, .. } => {
                let speaker = subgraph(&scenario.speaker)?;
                let boss_triples = subgraph(boss)?;
                let bundle = assemble_battle_prompt(kg.game(), &speaker, &boss_triples, scenario, &self.battle_template)
                    .map_err(assemble)?;
                let persona = personality(&speaker).unwrap_or_else(|| scenario.speaker.clone());
                Ok(Prepared { bundle, persona_key: scenario.speaker.clone(), persona })
            }
            Situation::NpcInteraction { npc, persona, .. } => {
                let key = persona.as_deref().ok_or_else(|| (Stage::Assemble, "scenario names no persona".to_string()))?;
                let persona = Persona::find(&self.personas, key).map_err(assemble)?;
                let npc_triples = subgraph(npc)?;
                let bundle = assemble_npc_prompt(kg.game(), persona, &npc_triples, scenario, &self.npc_template)
                    .map_err(assemble)?;
                Ok(Prepared { bundle, persona_key: persona.key.clone(), persona: persona.traits.clone() })
            }
        }
    }

    /// The prompt bundle a scenario renders to.
    pub fn bundle_for(&self, game: &str, scenario: &Scenario) -> Result<PromptBundle, PipelineError> {
        let kg = self.graph(game)?;
        self.prepare(kg, scenario)
            .map(|p| p.bundle)
            .map_err(|(stage, message)| PipelineError::Scenario {
                id: scenario.id.clone(),
                message: format!("{stage:?}: {message}"),
            })
    }

    fn run_one(
        &self,
        kg: &KnowledgeGraph,
        scenario: &Scenario,
        backend: &dyn GenerationBackend,
        clock: &dyn Clock,
    ) -> ScenarioOutput {
        let prepared = match self.prepare(kg, scenario) {
            Ok(p) => p,
            Err((stage, e)) => return ScenarioOutput::failed(scenario, stage, e),
        };
        let text = render(&prepared.bundle);
        let hash = prompt_hash(&text);
        let batch = match generate(&prepared.bundle, self.candidates, backend, clock) {
            Ok(b) => b,
            Err(e) => {
                let mut out = ScenarioOutput::failed(scenario, Stage::Generate, e);
                out.prompt = Some((hash, text));
                return out;
            }
        };

        let mut responses = Vec::new();
        let mut failed = Vec::new();
        for outcome in batch.outcomes {
            match outcome {
                CandidateOutcome::Response(r) => responses.push(r),
                CandidateOutcome::Failed { candidate_index, error } => {
                    failed.push(FailedCandidate { scenario_id: scenario.id.clone(), candidate_index, error })
                }
            }
        }

        let knowledge = build_knowledge_lexicon(&prepared.bundle.triples());
        let situation = build_situation_lexicon(prepared.bundle.scenario_text());
        let annotations: Vec<GroundingAnnotation> =
            responses.iter().map(|r| annotate(&r.text, &knowledge, &situation).for_response(&r.id)).collect();
        let records = responses
            .iter()
            .zip(&annotations)
            .map(|(r, a)| AnnotationRecord {
                response_id: r.id.clone(),
                scenario_id: scenario.id.clone(),
                text: r.text.clone(),
                annotation: a.clone(),
            })
            .collect();

        let mut out = ScenarioOutput {
            prompt: Some((hash.clone(), text)),
            responses,
            failed,
            annotations: records,
            selection: None,
            failure: None,
        };
        match select_best(&out.responses, &annotations, self.strategy) {
            Ok(selection) => {
                let chosen = &out.responses[selection.chosen];
                out.selection = Some(SelectionRecord {
                    scenario_id: scenario.id.clone(),
                    kind: scenario.kind_name().to_string(),
                    speaker: scenario.speaker.clone(),
                    counterpart: scenario.counterpart().to_string(),
                    persona_key: prepared.persona_key,
                    persona: prepared.persona,
                    context: prepared.bundle.scenario_text().to_string(),
                    prompt_hash: hash,
                    template_version: prepared.bundle.template_version.clone(),
                    response_id: chosen.id.clone(),
                    response: chosen.text.clone(),
                    selection,
                });
            }
            Err(e) => out.failure = Some(ScenarioFailure { scenario_id: scenario.id.clone(), stage: Stage::Select, error: e.to_string() }),
        }
        out
    }
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Runs every scenario and writes the artifacts under `out_dir`.
///
/// Scenarios run on a pool of `parallelism` workers; results are written in
/// scenario-file order whatever the completion order. A failing scenario is
/// recorded in the report and does not stop the others.
pub fn run_pipeline(
    ctx: &PipelineContext,
    scenarios: &ScenarioSet,
    backend: &dyn GenerationBackend,
    clock: &dyn Clock,
    out_dir: &Path,
) -> Result<RunReport, PipelineError> {
    use rayon::prelude::*;

    let kg = ctx.graph(&scenarios.game)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.parallelism)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    let outputs: Vec<ScenarioOutput> =
        pool.install(|| scenarios.scenarios.par_iter().map(|s| ctx.run_one(kg, s, backend, clock)).collect());

    let prompts_dir = out_dir.join(PROMPTS_DIR);
    fs::create_dir_all(&prompts_dir)?;
    let mut report = RunReport { game: scenarios.game.clone(), scenarios: outputs.len(), ..RunReport::default() };
    for out in &outputs {
        if let Some((hash, text)) = &out.prompt {
            fs::write(prompts_dir.join(format!("{hash}.txt")), text)?;
            report.prompts += 1;
        }
        report.responses += out.responses.len();
        report.annotations += out.annotations.len();
        report.selections += usize::from(out.selection.is_some());
        report.failed_candidates.extend(out.failed.iter().cloned());
        report.failures.extend(out.failure.clone());
    }
    fs::write(out_dir.join(RESPONSES_FILE), jsonl(outputs.iter().flat_map(|o| &o.responses)))?;
    fs::write(out_dir.join(ANNOTATIONS_FILE), jsonl(outputs.iter().flat_map(|o| &o.annotations)))?;
    fs::write(out_dir.join(SELECTIONS_FILE), jsonl(outputs.iter().filter_map(|o| o.selection.as_ref())))?;
    let mut report_text = serde_json::to_string_pretty(&report).expect("report serializes");
    report_text.push('\n');
    fs::write(out_dir.join(REPORT_FILE), report_text)?;
    Ok(report)
}

/// Converts a per-scenario response script into a hash-keyed fixture table.
pub fn record_fixtures(
    ctx: &PipelineContext,
    scenarios: &ScenarioSet,
    script: &BTreeMap<String, Vec<String>>,
) -> Result<BTreeMap<String, Vec<String>>, PipelineError> {
    let mut fixtures = BTreeMap::new();
    for s in &scenarios.scenarios {
        let lines = script.get(&s.id).ok_or_else(|| PipelineError::MissingScript(s.id.clone()))?;
        let bundle = ctx.bundle_for(&scenarios.game, s)?;
        fixtures.insert(prompt_hash(&render(&bundle)), lines.clone());
    }
    Ok(fixtures)
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::Record {
                path: format!("{}:{}", path.display(), i + 1),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Every run directory under `root` (one per scenario file), sorted.
pub fn run_dirs(root: &Path) -> Vec<PathBuf> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .into_iter()
        .flatten()
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join(ANNOTATIONS_FILE).is_file())
        .collect();
    dirs.sort();
    dirs
}
