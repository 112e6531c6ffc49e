//! The `kgdf` command line and HTTP service.

pub mod config;
pub mod pipeline;
pub mod server;

use std::collections::BTreeMap;
use std::sync::Arc;

use kgdf_core::eval::EvalError;
use kgdf_core::generate::{GenError, GenerationBackend, HttpBackendConfig, HttpChatBackend, ScriptedBackend, Strategy};
use kgdf_core::kg::{self, parse_triple, Depth, KgError, KnowledgeGraph, Ontology, Provenance, ProvenanceKind};
use kgdf_core::prompt::{parse_personas, Persona, PromptError, PromptKind, PromptTemplate};
use thiserror::Error;

use config::{BackendSection, ConfigError, ServiceConfig};
use pipeline::{PipelineContext, PipelineError};

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("data directory {path} is not writable: {reason}")]
    DataDirUnwritable { path: String, reason: String },
    #[error("{source_name}:{line}: {message}")]
    Seed { source_name: String, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Builds a graph from seed lines, one serialized triple per line. Blank lines
/// and `#` comments are skipped; every triple gets manual provenance naming
/// `source_name`.
pub fn seed_graph(ontology: Ontology, seeds: &str, source_name: &str) -> Result<KnowledgeGraph, AppError> {
    let mut graph = KnowledgeGraph::new(Arc::new(ontology));
    for (i, line) in seeds.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let seed_error =
            |e: KgError| AppError::Seed { source_name: source_name.to_string(), line: i + 1, message: e.to_string() };
        let mut t = parse_triple(line).map_err(seed_error)?;
        t.set_provenance(Provenance::new(ProvenanceKind::Manual, source_name));
        graph.insert(t).map_err(seed_error)?;
    }
    Ok(graph)
}

/// Loads graphs, templates and personas named by the config.
pub fn load_context(config: &ServiceConfig) -> Result<PipelineContext, AppError> {
    let mut graphs = BTreeMap::new();
    for (game, path) in &config.paths.kg {
        let graph = kg::load(path).map_err(|e| match e {
            KgError::Io(io) => KgError::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
            other => other,
        })?;
        graphs.insert(game.clone(), graph);
    }
    let template = |path: &Option<std::path::PathBuf>, kind| match path {
        Some(p) => PromptTemplate::load(p),
        None => Ok(PromptTemplate::builtin(kind)),
    };
    let personas = match &config.paths.personas {
        Some(p) => parse_personas(&std::fs::read_to_string(p)?)?,
        None => Persona::builtin(),
    };
    Ok(PipelineContext {
        graphs,
        battle_template: template(&config.paths.battle_template, PromptKind::Battle)?,
        npc_template: template(&config.paths.npc_template, PromptKind::NpcInteraction)?,
        personas,
        candidates: config.generation.candidates,
        parallelism: config.generation.parallelism,
        depth: Depth::try_from(config.generation.depth)?,
        strategy: Strategy::Grounding,
    })
}

pub fn build_backend(section: &BackendSection) -> Result<Arc<dyn GenerationBackend>, GenError> {
    Ok(match section {
        BackendSection::Scripted { fixture } => Arc::new(ScriptedBackend::load(fixture)?),
        BackendSection::HttpChat { endpoint, model, temperature, api_key_env, timeout_secs, .. } => {
            Arc::new(HttpChatBackend::from_env(HttpBackendConfig {
                endpoint: endpoint.clone(),
                model: model.clone(),
                temperature: *temperature,
                api_key_env: api_key_env.clone(),
                timeout_secs: *timeout_secs,
            })?)
        }
    })
}
